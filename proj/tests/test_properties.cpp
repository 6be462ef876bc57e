#include "property_suite.hpp"

#include <gtest/gtest.h>

namespace {

void expect_ok(const igt::props::Report& r) {
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_GT(r.cases, 0);
}

TEST(Properties, TelescopeIsExact) { expect_ok(igt::props::telescope_suite()); }
TEST(Properties, WindowInequalityOnLoggedRuns) { expect_ok(igt::props::window_inequality_suite()); }
TEST(Properties, QueueSetIdentityAndEnvelope) { expect_ok(igt::props::queue_suite()); }
TEST(Properties, DijkstraMatchesBruteForce) { expect_ok(igt::props::dijkstra_suite()); }
TEST(Properties, ConjugateGradientContract) { expect_ok(igt::props::cg_suite()); }
TEST(Properties, FiniteDifferenceGradients) { expect_ok(igt::props::finite_difference_suite()); }
TEST(Properties, ZeroDelayTrajectoryIdentity) { expect_ok(igt::props::zero_delay_identity_suite()); }

TEST(Properties, CsvOutputIsBitIdentical) {
  expect_ok(igt::props::csv_determinism_suite(std::filesystem::temp_directory_path() /
                                              "igt_props_csv"));
}

}  // namespace
