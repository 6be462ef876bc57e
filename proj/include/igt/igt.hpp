#pragma once

// Everything: core types, solvers, transport, optimizers, environments,
// statistics and the experiment harness.

#include "igt/bilevel.hpp"
#include "igt/core.hpp"
#include "igt/delay.hpp"
#include "igt/env/environment.hpp"
#include "igt/env/grid_path.hpp"
#include "igt/env/hard_quadratic.hpp"
#include "igt/env/lqr.hpp"
#include "igt/env/mlp.hpp"
#include "igt/env/sinkhorn_ot.hpp"
#include "igt/harness/config.hpp"
#include "igt/harness/csv.hpp"
#include "igt/harness/experiment.hpp"
#include "igt/harness/presets.hpp"
#include "igt/optimizers.hpp"
#include "igt/run.hpp"
#include "igt/solvers/assignment.hpp"
#include "igt/solvers/cg.hpp"
#include "igt/solvers/dijkstra.hpp"
#include "igt/solvers/inner_gd.hpp"
#include "igt/solvers/sinkhorn.hpp"
#include "igt/stats.hpp"
#include "igt/transport.hpp"
