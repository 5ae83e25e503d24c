#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sdwan/baseline.hpp"
#include "sdwan/env.hpp"
#include "sdwan/topo.hpp"
#include "test_util.hpp"

using namespace sdwan;
using testutil::single_tunnel_net;

namespace {

const OverlayNetwork& hub3() {
  static const OverlayNetwork net = build_hub_spoke(3, 15.0, 6.0, 0.001);
  return net;
}

DemandVector demand6(std::initializer_list<double> v) {
  DemandVector d;
  d.demands = v;
  return d;
}

SplitAction uniform_action(const LoadModel& lm) {
  SplitAction a;
  a.splits.resize(static_cast<std::size_t>(lm.n_paths()));
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    const int n = lm.tp_end(k) - lm.tp_begin(k);
    for (int i = lm.tp_begin(k); i < lm.tp_end(k); ++i)
      a.splits[i] = 1.0 / n;
  }
  return a;
}

struct GridBest {
  double x = -1.0;
  double objective = std::numeric_limits<double>::infinity();
};

void check_simplex_ok(const LoadModel& lm, const SplitAction& a) {
  REQUIRE(static_cast<int>(a.splits.size()) == lm.n_paths());
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    double sum = 0.0;
    for (int i = lm.tp_begin(k); i < lm.tp_end(k); ++i) {
      CHECK(a.splits[i] >= -1e-12);
      sum += a.splits[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

}  // namespace

TEST_CASE("symmetric two-path tunnel settles on an even split") {
  const OverlayNetwork net = single_tunnel_net({10.0, 10.0});
  const LoadModel lm(net);
  const DemandVector d = demand6({8.0});
  BaselineConfig cfg;
  cfg.seed = 3;
  const BaselineResult res = solve(lm, d, cfg);
  REQUIRE(res.feasible);
  CHECK(res.action.splits[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.action.splits[1] == doctest::Approx(0.5).epsilon(1e-6));
  // Objective at the even split: both links carry 4 on capacity 10.
  CHECK(res.avg_delay == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("asymmetric two-path tunnel matches a fine grid search") {
  const OverlayNetwork net = single_tunnel_net({15.0, 6.0});
  const LoadModel lm(net);
  const DemandVector d = demand6({6.0});
  BaselineConfig cfg;
  cfg.seed = 17;
  const BaselineResult res = solve(lm, d, cfg);
  REQUIRE(res.feasible);

  GridBest ref;
  {
    SplitAction a;
    for (int i = 0; i <= 1000; ++i) {
      const double x = i / 1000.0;
      a.splits = {x, 1.0 - x};
      const StaticEval ev = evaluate_static(lm, d, a);
      if (ev.mlu <= cfg.mlu_target + 1e-12 && ev.avg_delay < ref.objective) {
        ref.x = x;
        ref.objective = ev.avg_delay;
      }
    }
  }
  CHECK(std::abs(res.avg_delay - ref.objective) <= 1e-3);
  CHECK(std::abs(res.action.splits[0] - ref.x) <= 2e-2);
}

TEST_CASE("coupled tunnels match a two-dimensional grid search") {
  // Two tunnels share both edges, so the optimum balances them jointly.
  OverlayNetwork shared;
  shared.site_count = 2;
  shared.edges = {{0, 12.0, 0.0}, {1, 9.0, 0.0}};
  shared.tunnels = {{0, 0, 1, {{0}, {1}}}, {1, 1, 0, {{0}, {1}}}};
  REQUIRE(validate(shared).empty());
  const LoadModel lm(shared);
  DemandVector d;
  d.demands = {7.0, 5.0};
  BaselineConfig cfg;
  cfg.seed = 11;
  cfg.restarts = 12;
  const BaselineResult res = solve(lm, d, cfg);
  REQUIRE(res.feasible);

  double best = std::numeric_limits<double>::infinity();
  SplitAction a;
  a.splits = {0, 0, 0, 0};
  for (int i = 0; i <= 1000; ++i) {
    for (int j = 0; j <= 1000; ++j) {
      a.splits = {i / 1000.0, 1.0 - i / 1000.0, j / 1000.0, 1.0 - j / 1000.0};
      const StaticEval ev = evaluate_static(lm, d, a);
      if (ev.mlu <= cfg.mlu_target + 1e-12 && ev.avg_delay < best)
        best = ev.avg_delay;
    }
  }
  CHECK(std::abs(res.avg_delay - best) <= 1e-3);
}

TEST_CASE("static evaluation agrees with the dynamic model when nothing is dropped") {
  // With strictly positive splits and utilization under 1, the dynamic step
  // admits everything and every path is in use, so the two delay computations
  // must coincide.
  const LoadModel lm(hub3());
  const DemandVector d = demand6({2.0, 1.0, 2.5, 1.5, 1.0, 2.0});
  SplitAction a = uniform_action(lm);
  a.splits[0] = 0.7;
  a.splits[1] = 0.3;
  const StaticEval st = evaluate_static(lm, d, a);
  REQUIRE(st.mlu < 1.0);

  RewardConfig rc;
  const StepOutcome dyn = evaluate_step(lm, d, a, rc);
  CHECK(st.mlu == doctest::Approx(dyn.mlu).epsilon(1e-12));
  CHECK(st.avg_delay == doctest::Approx(dyn.avg_delay).epsilon(1e-12));
  CHECK(st.mlu == doctest::Approx(mlu(lm, d, a)).epsilon(1e-15));
}

TEST_CASE("idle paths still count toward the static objective") {
  // All-on-first-path: the unused second path contributes its empty-link
  // delay to the max, unlike the dynamic model which masks unused paths.
  const OverlayNetwork net = single_tunnel_net({10.0, 5.0});
  const LoadModel lm(net);
  const DemandVector d = demand6({8.0});
  SplitAction a;
  a.splits = {1.0, 0.0};
  const StaticEval st = evaluate_static(lm, d, a);
  // Path 0 delay 1/(10-8) = 0.5; idle path 1 delay 1/5 = 0.2; max is 0.5.
  CHECK(st.avg_delay == doctest::Approx(0.5).epsilon(1e-12));
  a.splits = {0.0, 1.0};
  const StaticEval st2 = evaluate_static(lm, d, a);
  // Path 1 is overloaded (8 > 5): clamped delay; idle path 0 gives 0.1.
  CHECK(st2.mlu == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(st2.avg_delay > 1.0);  // clamped saturation delay dominates
}

TEST_CASE("solver never loses to the uniform split and tracks its best start") {
  const LoadModel lm(hub3());
  const DemandVector d = demand6({3.0, 1.0, 2.0, 1.5, 2.5, 0.5});
  BaselineConfig cfg;
  cfg.seed = 5;
  const BaselineResult res = solve(lm, d, cfg);
  REQUIRE(res.feasible);

  const StaticEval uni = evaluate_static(lm, d, uniform_action(lm));
  if (uni.mlu <= cfg.mlu_target) CHECK(res.avg_delay <= uni.avg_delay + 1e-12);

  REQUIRE(res.best_start >= 0);
  REQUIRE(res.best_start < static_cast<int>(res.start_objectives.size()));
  CHECK(static_cast<int>(res.start_objectives.size()) == 2 + cfg.restarts);
  const double best =
      *std::min_element(res.start_objectives.begin(), res.start_objectives.end());
  CHECK(res.start_objectives[res.best_start] == best);
  CHECK(res.avg_delay == doctest::Approx(best).epsilon(1e-12));
  // Reported numbers are honest re-evaluations of the returned action.
  const StaticEval re = evaluate_static(lm, d, res.action);
  CHECK(re.avg_delay == doctest::Approx(res.avg_delay).epsilon(1e-12));
  CHECK(re.mlu == doctest::Approx(res.mlu).epsilon(1e-12));
  CHECK(res.mlu <= cfg.mlu_target + 1e-6);
  check_simplex_ok(lm, res.action);
}

TEST_CASE("overload that no split can fix is reported as infeasible") {
  const OverlayNetwork net = single_tunnel_net({4.0, 3.0});
  const LoadModel lm(net);
  const DemandVector d = demand6({10.0});  // exceeds total capacity 7
  BaselineConfig cfg;
  const BaselineResult res = solve(lm, d, cfg);
  CHECK(!res.feasible);
  for (double obj : res.start_objectives)
    CHECK(obj == std::numeric_limits<double>::infinity());
}

TEST_CASE("solver is deterministic and worker-count independent") {
  const LoadModel lm(hub3());
  const DemandVector d = demand6({2.0, 3.0, 1.0, 2.0, 3.0, 1.0});
  BaselineConfig cfg;
  cfg.seed = 77;
  cfg.restarts = 6;
  const BaselineResult a = solve(lm, d, cfg);
  const BaselineResult b = solve(lm, d, cfg);
  BaselineConfig par = cfg;
  par.workers = 4;
  const BaselineResult c = solve(lm, d, par);

  CHECK(a.action.splits == b.action.splits);
  CHECK(a.avg_delay == b.avg_delay);
  CHECK(a.start_objectives == b.start_objectives);
  CHECK(a.action.splits == c.action.splits);
  CHECK(a.best_start == c.best_start);
  CHECK(a.start_objectives == c.start_objectives);
}

TEST_CASE("tighter utilization caps trade delay for headroom") {
  const LoadModel lm(hub3());
  const DemandVector d = demand6({3.5, 1.0, 3.5, 1.0, 3.5, 1.0});
  BaselineConfig loose;
  loose.seed = 9;
  BaselineConfig tight = loose;
  tight.mlu_target = 0.7;
  const BaselineResult rl = solve(lm, d, loose);
  const BaselineResult rt = solve(lm, d, tight);
  REQUIRE(rl.feasible);
  REQUIRE(rt.feasible);
  CHECK(rt.mlu <= 0.7 + 1e-6);
  // The tighter cap can only shrink the feasible set.
  CHECK(rt.avg_delay >= rl.avg_delay - 1e-9);
}

TEST_CASE("config validation rejects nonsense") {
  BaselineConfig cfg;
  cfg.mlu_target = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.restarts = -1;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.workers = 0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.step_init = -0.1;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}
