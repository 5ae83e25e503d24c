#include "sdwan/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sdwan/cbf.hpp"
#include "sdwan/parallel.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasSlack = 1e-6;

// Objective on raw split values; tolerates slightly off-simplex points, which
// the finite-difference probes need.
double objective(const LoadModel& lm, const DemandVector& demand,
                 const std::vector<double>& splits) {
  std::vector<double> rates(lm.n_paths());
  for (int tp = 0; tp < lm.n_paths(); ++tp)
    rates[tp] = demand.demands[lm.tunnel_of(tp)] * splits[tp];
  const std::vector<double> loads = edge_loads_from_rates(lm, rates);
  std::vector<double> edge_delay(lm.n_edges());
  for (int e = 0; e < lm.n_edges(); ++e)
    edge_delay[e] = link_delay(lm.capacity(e), loads[e], lm.prop_delay(e));
  double sum = 0.0;
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    double dmax = 0.0;
    for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp) {
      double d = 0.0;
      for (int e : lm.edges_of(tp)) d += edge_delay[e];
      dmax = std::max(dmax, d);
    }
    sum += dmax;
  }
  return sum / lm.n_tunnels();
}

double mlu_of(const LoadModel& lm, const DemandVector& demand,
              const std::vector<double>& splits) {
  std::vector<double> rates(lm.n_paths());
  for (int tp = 0; tp < lm.n_paths(); ++tp)
    rates[tp] = demand.demands[lm.tunnel_of(tp)] * splits[tp];
  return max_utilization(lm, edge_loads_from_rates(lm, rates));
}

// Euclidean projection of one tunnel's slice onto {x >= 0, sum x = 1}.
void project_slice(double* x, int n) {
  std::vector<double> u(x, x + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (int j = 0; j < n; ++j) {
    css += u[j];
    const double t = (css - 1.0) / (j + 1);
    if (u[j] - t > 0.0) {
      rho = j + 1;
      theta = t;
    }
  }
  (void)rho;
  for (int i = 0; i < n; ++i) x[i] = std::max(0.0, x[i] - theta);
}

void project_simplexes(const LoadModel& lm, std::vector<double>& x) {
  for (int k = 0; k < lm.n_tunnels(); ++k)
    project_slice(x.data() + lm.tp_begin(k), lm.tp_end(k) - lm.tp_begin(k));
}

struct StartOutcome {
  double obj = kInf;
  std::vector<double> x;
  double mlu = kInf;
  bool feasible = false;
};

CbfConfig repair_config(const BaselineConfig& cfg) {
  CbfConfig rc;
  rc.policy = CbfPolicy::kMaxUtil;
  rc.candidates_per_iter = 250;
  rc.max_iters = 8;
  rc.mlu_threshold = cfg.mlu_target;
  rc.seed = mix64(cfg.seed, 0xba5e11);
  return rc;
}

// Pull x back inside the utilization cap. Returns false when no nearby
// feasible point was found.
bool repair(const LoadModel& lm, const DemandVector& demand,
            const CbfConfig& rc, std::vector<double>& x) {
  if (mlu_of(lm, demand, x) <= rc.mlu_threshold) return true;
  SplitAction a;
  a.splits = x;
  const ProjectionResult pr = project(lm, demand, a, rc);
  if (!pr.feasible_found) return false;
  x = pr.action.splits;
  return true;
}

StartOutcome descend(const LoadModel& lm, const DemandVector& demand,
                     const BaselineConfig& cfg, const CbfConfig& rc,
                     std::vector<double> x) {
  StartOutcome out;
  project_simplexes(lm, x);
  if (!repair(lm, demand, rc, x)) {
    out.x = std::move(x);
    out.mlu = mlu_of(lm, demand, out.x);
    return out;  // start is stuck outside the cap
  }

  constexpr double kDiff = 1e-6;  // central-difference probe step
  double f = objective(lm, demand, x);
  double alpha = cfg.step_init;
  std::vector<double> g(x.size()), trial;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + kDiff;
      const double fp = objective(lm, demand, x);
      x[i] = keep - kDiff;
      const double fm = objective(lm, demand, x);
      x[i] = keep;
      g[i] = (fp - fm) / (2.0 * kDiff);
    }
    double gnorm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    if (gnorm == 0.0) break;

    bool accepted = false;
    while (alpha * gnorm > 1e-12) {
      trial = x;
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] -= alpha * g[i];
      project_simplexes(lm, trial);
      if (repair(lm, demand, rc, trial)) {
        const double ft = objective(lm, demand, trial);
        if (ft < f - cfg.tol * std::max(1.0, std::abs(f))) {
          x.swap(trial);
          f = ft;
          alpha = std::min(alpha * 1.5, 10.0 * cfg.step_init);
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }
  out.obj = f;
  out.x = std::move(x);
  out.mlu = mlu_of(lm, demand, out.x);
  out.feasible = out.mlu <= cfg.mlu_target + kFeasSlack;
  if (!out.feasible) out.obj = kInf;
  return out;
}

}  // namespace

void validate_config(const BaselineConfig& cfg) {
  if (!(cfg.mlu_target > 0.0) || cfg.mlu_target > 1.0)
    throw std::invalid_argument("baseline: mlu_target must be in (0, 1]");
  if (cfg.restarts < 1)
    throw std::invalid_argument("baseline: restarts must be >= 1");
  if (cfg.max_iters < 1)
    throw std::invalid_argument("baseline: max_iters must be >= 1");
  if (!(cfg.step_init > 0.0))
    throw std::invalid_argument("baseline: step_init must be > 0");
  if (!(cfg.tol >= 0.0))
    throw std::invalid_argument("baseline: tol must be >= 0");
  if (cfg.workers < 1)
    throw std::invalid_argument("baseline: workers must be >= 1");
}

StaticEval evaluate_static(const LoadModel& lm, const DemandVector& demand,
                           const SplitAction& a) {
  check_action(lm, a);
  if (static_cast<int>(demand.demands.size()) != lm.n_tunnels())
    throw std::invalid_argument("evaluate_static: demand size mismatch");
  StaticEval ev;
  ev.avg_delay = objective(lm, demand, a.splits);
  ev.mlu = mlu_of(lm, demand, a.splits);
  return ev;
}

BaselineResult solve(const LoadModel& lm, const DemandVector& demand,
                     const BaselineConfig& cfg) {
  validate_config(cfg);
  if (static_cast<int>(demand.demands.size()) != lm.n_tunnels())
    throw std::invalid_argument("baseline: demand size mismatch");
  for (double d : demand.demands)
    if (!std::isfinite(d) || d < 0.0)
      throw std::invalid_argument("baseline: demand must be finite and >= 0");

  const CbfConfig rc = repair_config(cfg);
  const int n_starts = 2 + cfg.restarts;
  std::vector<std::vector<double>> starts(n_starts);

  // start 0: uniform; start 1: everything on each tunnel's first path
  starts[0].assign(lm.n_paths(), 0.0);
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    const double u = 1.0 / (lm.tp_end(k) - lm.tp_begin(k));
    for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp) starts[0][tp] = u;
  }
  starts[1].assign(lm.n_paths(), 0.0);
  for (int k = 0; k < lm.n_tunnels(); ++k) starts[1][lm.tp_begin(k)] = 1.0;
  for (int s = 2; s < n_starts; ++s) {
    StreamRng rng(mix64(cfg.seed, s));
    starts[s].resize(lm.n_paths());
    for (int k = 0; k < lm.n_tunnels(); ++k) {
      double sum = 0.0;
      for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp) {
        starts[s][tp] = -std::log(to_unit_open(rng.next_u64()));
        sum += starts[s][tp];
      }
      for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp)
        starts[s][tp] /= sum;
    }
  }

  std::vector<StartOutcome> outcomes(n_starts);
  parallel_for(cfg.workers, n_starts, [&](int, int b, int e) {
    for (int s = b; s < e; ++s)
      outcomes[s] = descend(lm, demand, cfg, rc, starts[s]);
  });

  BaselineResult res;
  res.start_objectives.resize(n_starts);
  int best = -1;
  for (int s = 0; s < n_starts; ++s) {
    res.start_objectives[s] = outcomes[s].obj;
    if (outcomes[s].feasible && (best < 0 || outcomes[s].obj < outcomes[best].obj))
      best = s;
  }
  if (best < 0) {
    // nothing satisfied the cap; report the least-bad point seen
    int least = 0;
    for (int s = 1; s < n_starts; ++s)
      if (outcomes[s].mlu < outcomes[least].mlu) least = s;
    res.action.splits = outcomes[least].x;
    res.avg_delay = objective(lm, demand, res.action.splits);
    res.mlu = outcomes[least].mlu;
    res.feasible = false;
    return res;
  }
  res.action.splits = outcomes[best].x;
  res.avg_delay = outcomes[best].obj;
  res.mlu = outcomes[best].mlu;
  res.feasible = true;
  res.best_start = best;
  return res;
}

}  // namespace sdwan
