#pragma once

// Shipped experiment presets. Seeds are always 0..n-1.

#include <span>
#include <string_view>

namespace igt::harness {

struct Preset {
  std::string_view name;
  std::string_view summary;
  std::string_view text;
};

inline constexpr Preset kPresets[] = {
    {"transport-scaling", "R_sq and R_3 versus constant delay on Sinkhorn OT",
     R"([experiment]
name = transport-scaling
mode = run
rounds = 1000
seeds = 0-4
delays = const:1, const:2, const:5, const:10, const:20, const:50

[environment]
kind = sinkhorn
ou_noise = 0.01

# A small constant step keeps the trajectory nearly straight over a 50-round
# window (R_sq / R_3 -> d) and the per-step size independent of d (R_3 ~ d).
# A queue-adaptive step shrinks steps by 1/(1 + d) and flattens the slopes.
[algorithm stale-omd]
base = stale-omd
eta0 = 0.00015
schedule = constant
)"},

    {"controlled-comparison", "Adam+IGT against Stale-Adam on Sinkhorn OT, paired delays",
     R"([experiment]
name = controlled-comparison
mode = compare
rounds = 1000
seeds = 0-4
delays = const:1, const:5, const:10, const:20, const:50

[environment]
kind = sinkhorn

[algorithm adam-igt]
base = adam-igt
eta0 = 0.001
clip = 1.0
beta = 0

[algorithm stale-adam]
base = stale-adam
eta0 = 0.001
clip = 1.0
beta = 0

[compare]
treatment = adam-igt
control = stale-adam
)"},

    {"dftrl-comparison", "D-FTRL with and without transport on Sinkhorn OT",
     R"([experiment]
name = dftrl-comparison
mode = compare
rounds = 1000
seeds = 0-4
delays = const:1, const:5, const:10, const:20, const:50

[environment]
kind = sinkhorn

[algorithm dftrl-igt]
base = dftrl-igt
eta0 = 0.05
beta = 1

[algorithm dftrl]
base = dftrl
eta0 = 0.05
beta = 1

[compare]
treatment = dftrl-igt
control = dftrl
)"},

    {"hard-floor", "Stale OMD on the hard quadratic: the eps^2/2 regret floor",
     R"([experiment]
name = hard-floor
mode = run
rounds = 5000
seeds = 0
delays = const:10
summary_window = 500

[environment]
kind = hard_quadratic
a = 1
b = 2
mu_w = 1
epsilon_inner = 0.1

[algorithm stale-omd]
base = stale-omd
eta0 = 0.04
schedule = constant
)"},

    {"lqr-stability", "Largest stable step versus queue length on LQR",
     R"([experiment]
name = lqr-stability
mode = stability
seeds = 0-2
delays = const:1, const:10, const:20, const:40

[environment]
kind = lqr

[algorithm igt-omd]
base = igt-omd
eta0 = 0.01
beta = 1

[algorithm two-stage]
base = two-stage
eta0 = 0.01

[stability]
lo = 0.0001
hi = 2
resolution = 0.001
horizon = 500
radius = inf
)"},

    {"grid-delay", "Shortest-path optimality gap at d=0 and d=50",
     R"([experiment]
name = grid-delay
mode = compare
rounds = 2000
seeds = 0-4
delays = const:0, const:50
summary_window = 200

[environment]
kind = grid

[algorithm igt-omd]
base = igt-omd
rule = adam
eta0 = 0.001
beta = 1

[algorithm two-stage]
base = two-stage
rule = adam
eta0 = 0.001

[compare]
treatment = igt-omd
control = two-stage
metric = gap
)"},

    {"uniform-delay", "Adam+IGT benefit under Uniform[0,d] against constant d",
     R"([experiment]
name = uniform-delay
mode = compare
rounds = 1000
seeds = 0-4
delays = const:10, uniform:10, const:20, uniform:20, const:50, uniform:50

[environment]
kind = sinkhorn

[algorithm adam-igt]
base = adam-igt
eta0 = 0.001
clip = 1.0
beta = 0

[algorithm stale-adam]
base = stale-adam
eta0 = 0.001
clip = 1.0
beta = 0

[compare]
treatment = adam-igt
control = stale-adam
)"},

    {"sweep-k", "Inner Sinkhorn iterations K at d=20",
     R"([experiment]
name = sweep-k
mode = sweep-k
rounds = 1000
seeds = 0-4
delays = const:20

[environment]
kind = sinkhorn

[algorithm adam-igt]
base = adam-igt
eta0 = 0.001
clip = 1.0
beta = 0

[algorithm stale-adam]
base = stale-adam
eta0 = 0.001
clip = 1.0
beta = 0

[compare]
treatment = adam-igt
control = stale-adam

[sweep_k]
values = 1, 3, 5, 10, 20, 50
)"},

    {"delay-patterns", "Constant, uniform and bursty delays with the same mean scale",
     R"([experiment]
name = delay-patterns
mode = delay-patterns
rounds = 1000
seeds = 0-4
delays = const:20, uniform:40, bursty:10:40

[environment]
kind = sinkhorn

[algorithm adam-igt]
base = adam-igt
eta0 = 0.001
clip = 1.0
beta = 0

[algorithm stale-adam]
base = stale-adam
eta0 = 0.001
clip = 1.0
beta = 0

[compare]
treatment = adam-igt
control = stale-adam
)"},
};

inline std::span<const Preset> presets() { return kPresets; }

inline const Preset* find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace igt::harness
