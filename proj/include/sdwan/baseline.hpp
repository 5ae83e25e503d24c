#pragma once

#include <cstdint>
#include <vector>

#include "sdwan/env.hpp"

namespace sdwan {

// Static benchmark solver: minimizes the average tunnel delay over split
// ratios subject to the per-tunnel simplex and a max-utilization cap, by
// multistart projected descent with numerical subgradients. Stands in for an
// exact NLP solver at this problem size (a handful of free variables).
struct BaselineConfig {
  double mlu_target = 1.0;  // utilization cap on every edge
  int restarts = 8;         // random starts beyond the two deterministic ones
  int max_iters = 300;      // descent iterations per start
  double step_init = 0.1;   // initial step along the negative subgradient
  double tol = 1e-9;        // relative objective-improvement acceptance
  int workers = 1;          // starts run in parallel
  std::uint64_t seed = 0;
};

struct StaticEval {
  double avg_delay = 0.0;  // mean over tunnels of max-over-paths delay
  double mlu = 0.0;        // max edge utilization of the offered loads
};

// Objective evaluation without admission control: link delays on the offered
// loads, tunnel delay as the max over ALL candidate paths (no usage mask).
StaticEval evaluate_static(const LoadModel& lm, const DemandVector& demand,
                           const SplitAction& a);

struct BaselineResult {
  SplitAction action;
  double avg_delay = 0.0;
  double mlu = 0.0;
  bool feasible = false;  // no start satisfied the utilization cap otherwise
  int best_start = -1;
  // Final objective per start (infinity for starts that stayed infeasible);
  // start 0 = uniform, 1 = everything on each tunnel's first path, then the
  // seeded random starts.
  std::vector<double> start_objectives;
};

// Deterministic given (inputs, cfg.seed, cfg.restarts), independent of
// cfg.workers. The returned action satisfies the simplex exactly and
// mlu <= mlu_target + 1e-6 whenever feasible is true.
BaselineResult solve(const LoadModel& lm, const DemandVector& demand,
                     const BaselineConfig& cfg);

void validate_config(const BaselineConfig& cfg);  // throws std::invalid_argument

}  // namespace sdwan
