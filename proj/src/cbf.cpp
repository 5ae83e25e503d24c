#include "sdwan/cbf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdwan/kernels.hpp"
#include "sdwan/parallel.hpp"

namespace sdwan {

const char* to_string(CbfPolicy p) {
  switch (p) {
    case CbfPolicy::kNaive: return "naive";
    case CbfPolicy::kDeltaUtil: return "deltautil";
    case CbfPolicy::kMaxUtil: return "maxutil";
  }
  return "?";
}

std::optional<CbfPolicy> policy_from_string(std::string_view s) {
  std::string t(s);
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "naive") return CbfPolicy::kNaive;
  if (t == "deltautil") return CbfPolicy::kDeltaUtil;
  if (t == "maxutil") return CbfPolicy::kMaxUtil;
  return std::nullopt;
}

void validate_config(const CbfConfig& cfg) {
  if (!(cfg.radius > 0.0) || cfg.radius > 1.0)
    throw std::invalid_argument("cbf: radius must be in (0, 1]");
  if (cfg.candidates_per_iter < 1)
    throw std::invalid_argument("cbf: candidates_per_iter must be >= 1");
  if (cfg.max_iters < 1)
    throw std::invalid_argument("cbf: max_iters must be >= 1");
  if (cfg.delta_util_threshold < 0.0 || cfg.delta_util_threshold > 1.0)
    throw std::invalid_argument("cbf: delta_util_threshold must be in [0, 1]");
  if (!(cfg.mlu_threshold > 0.0))
    throw std::invalid_argument("cbf: mlu_threshold must be positive");
  if (cfg.workers < 1)
    throw std::invalid_argument("cbf: workers must be >= 1");
}

namespace {

// Everything the generators need about the proto, computed once per project()
// call: per-path utilizations of the proto's offered loads and the derived
// tunnel sets for each policy. Candidates are always perturbations of the
// ORIGINAL proto, so none of this changes during the search.
struct ProtoView {
  const double* proto = nullptr;  // n_paths splits
  std::vector<double> path_util;  // per tunnel-path
  std::vector<int> argmax_tp;     // per tunnel: highest-utilization path
  std::vector<int> eligible;      // tunnels with util spread > threshold
  std::vector<int> congested;     // tunnels with a path at/above safety level
};

ProtoView make_view(const LoadModel& lm, const DemandVector& demand,
                    const SplitAction& proto, const CbfConfig& cfg) {
  ProtoView v;
  v.proto = proto.splits.data();
  const std::vector<double> rates = offered_tp_rates(lm, demand, proto);
  const std::vector<double> loads = edge_loads_from_rates(lm, rates);
  v.path_util.resize(lm.n_paths());
  for (int tp = 0; tp < lm.n_paths(); ++tp) {
    double u = 0.0;
    for (int e : lm.edges_of(tp)) u = std::max(u, loads[e] * lm.inv_capacity(e));
    v.path_util[tp] = u;
  }
  v.argmax_tp.resize(lm.n_tunnels());
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    int top = lm.tp_begin(k);
    double umax = v.path_util[top], umin = umax;
    for (int tp = lm.tp_begin(k) + 1; tp < lm.tp_end(k); ++tp) {
      const double u = v.path_util[tp];
      if (u > umax) {
        umax = u;
        top = tp;
      }
      if (u < umin) umin = u;
    }
    v.argmax_tp[k] = top;
    if (umax - umin > cfg.delta_util_threshold) v.eligible.push_back(k);
    if (umax >= cfg.mlu_threshold) v.congested.push_back(k);
  }
  return v;
}

int pick(double u, int n) { return std::min(static_cast<int>(u * n), n - 1); }

void renorm_tunnel(const LoadModel& lm, int k, double* out) {
  const int lo = lm.tp_begin(k), hi = lm.tp_end(k);
  double sum = 0.0;
  for (int tp = lo; tp < hi; ++tp) {
    if (out[tp] < 0.0) out[tp] = 0.0;
    sum += out[tp];
  }
  if (sum <= 0.0) {
    const double u = 1.0 / (hi - lo);
    for (int tp = lo; tp < hi; ++tp) out[tp] = u;
  } else {
    for (int tp = lo; tp < hi; ++tp) out[tp] /= sum;
  }
}

// Move `amount` of split mass off tunnel k's highest-utilization path, spread
// equally over its other paths. No-op for single-path tunnels.
void shed(const LoadModel& lm, const ProtoView& v, int k, double amount,
          double* out) {
  const int lo = lm.tp_begin(k), hi = lm.tp_end(k);
  if (hi - lo < 2) return;
  const int top = v.argmax_tp[k];
  const double share = amount / (hi - lo - 1);
  out[top] -= amount;
  for (int tp = lo; tp < hi; ++tp)
    if (tp != top) out[tp] += share;
  renorm_tunnel(lm, k, out);
}

// One candidate into out[n_paths]. The draw protocol per policy is part of
// the determinism contract (see header); the same (seed, candidate index)
// always reproduces the same candidate.
void gen_into(const LoadModel& lm, const ProtoView& v, const CbfConfig& cfg,
              CandidateRng& rng, double* out) {
  std::copy_n(v.proto, lm.n_paths(), out);
  switch (cfg.policy) {
    case CbfPolicy::kNaive: {
      const int k = pick(rng.uniform(), lm.n_tunnels());
      shed(lm, v, k, rng.uniform() * cfg.radius, out);
      break;
    }
    case CbfPolicy::kDeltaUtil: {
      if (v.eligible.empty()) {  // degrade to Naive on the same draw stream
        const int k = pick(rng.uniform(), lm.n_tunnels());
        shed(lm, v, k, rng.uniform() * cfg.radius, out);
      } else {
        const int k = v.eligible[pick(rng.uniform(), static_cast<int>(v.eligible.size()))];
        shed(lm, v, k, rng.uniform() * cfg.radius, out);
      }
      break;
    }
    case CbfPolicy::kMaxUtil: {
      for (int k : v.congested)
        shed(lm, v, k, rng.uniform() * cfg.radius * out[v.argmax_tp[k]], out);
      break;
    }
  }
}

struct Best {
  double l1 = std::numeric_limits<double>::infinity();  // best feasible
  std::int64_t l1_idx = -1;
  double mlu = std::numeric_limits<double>::infinity();  // best overall
  std::int64_t mlu_idx = -1;
};

// Merge must be called in ascending candidate-index order (worker order);
// strict comparisons then give the lowest index on ties.
void merge(Best& into, const Best& b) {
  if (b.l1 < into.l1) {
    into.l1 = b.l1;
    into.l1_idx = b.l1_idx;
  }
  if (b.mlu < into.mlu) {
    into.mlu = b.mlu;
    into.mlu_idx = b.mlu_idx;
  }
}

constexpr int kLane = 64;  // candidates evaluated per kernel call

// Generate and evaluate candidates [begin, end) of iteration m. Lane-blocked:
// offered rates are laid out [path][lane] so that per-edge accumulation and
// the running max run as vector kernels across candidates. The accumulation
// visits paths in the same ascending order as the scalar evaluator, so each
// lane's utilization is bitwise equal to evaluating that candidate alone.
Best scan_range(const LoadModel& lm, const DemandVector& demand,
                const ProtoView& v, const CbfConfig& cfg, int m, int begin,
                int end) {
  const kernels::Ops& K = kernels::ops();
  const int ntp = lm.n_paths();
  Best best;
  std::vector<double> cand(ntp);
  std::vector<double> rates(static_cast<std::size_t>(kLane) * ntp);
  std::vector<double> loads(kLane), util(kLane), l1s(kLane);
  const CounterRng base{cfg.seed};
  int n = begin;
  while (n < end) {
    const int w = std::min(kLane, end - n);
    for (int lane = 0; lane < w; ++lane) {
      const std::int64_t idx =
          static_cast<std::int64_t>(m) * cfg.candidates_per_iter + (n + lane);
      CandidateRng rng{base, static_cast<std::uint64_t>(idx), 0};
      gen_into(lm, v, cfg, rng, cand.data());
      double l1 = 0.0;
      for (int tp = 0; tp < ntp; ++tp) l1 += std::abs(cand[tp] - v.proto[tp]);
      l1s[lane] = l1;
      for (int tp = 0; tp < ntp; ++tp)
        rates[static_cast<std::size_t>(tp) * kLane + lane] =
            demand.demands[lm.tunnel_of(tp)] * cand[tp];
    }
    std::fill_n(util.data(), w, 0.0);
    for (int e = 0; e < lm.n_edges(); ++e) {
      const std::span<const int> inc = lm.paths_through(e);
      if (inc.empty()) continue;
      std::fill_n(loads.data(), w, 0.0);
      for (int tp : inc)
        K.axpy(w, 1.0, rates.data() + static_cast<std::size_t>(tp) * kLane,
               loads.data());
      K.scale_max(w, loads.data(), lm.inv_capacity(e), util.data());
    }
    for (int lane = 0; lane < w; ++lane) {
      const std::int64_t idx =
          static_cast<std::int64_t>(m) * cfg.candidates_per_iter + (n + lane);
      if (util[lane] <= cfg.mlu_threshold && l1s[lane] < best.l1) {
        best.l1 = l1s[lane];
        best.l1_idx = idx;
      }
      if (util[lane] < best.mlu) {
        best.mlu = util[lane];
        best.mlu_idx = idx;
      }
    }
    n += w;
  }
  return best;
}

}  // namespace

ProjectionResult project(const LoadModel& lm, const DemandVector& demand,
                         const SplitAction& proto, const CbfConfig& cfg) {
  validate_config(cfg);
  check_action(lm, proto);
  if (static_cast<int>(demand.demands.size()) != lm.n_tunnels())
    throw std::invalid_argument("project: demand size does not match network");

  ProjectionResult res;
  res.action = proto;
  const double proto_mlu = mlu(lm, demand, proto);
  if (proto_mlu <= cfg.mlu_threshold) {
    res.was_safe_input = true;
    res.feasible_found = true;
    return res;
  }

  const ProtoView v = make_view(lm, demand, proto, cfg);
  const int N = cfg.candidates_per_iter;
  Best global;
  for (int m = 0; m < cfg.max_iters; ++m) {
    std::vector<Best> local(cfg.workers);
    parallel_for(cfg.workers, N, [&](int w, int b, int e) {
      local[w] = scan_range(lm, demand, v, cfg, m, b, e);
    });
    for (const Best& b : local) merge(global, b);
    res.candidates_evaluated += N;
    if (global.l1_idx >= 0) break;  // feasible found; batch finished, stop
  }

  // The winner is regenerated from its candidate index rather than stored
  // during the scan; gen_into is a pure function of (seed, index).
  const auto regen = [&](std::int64_t idx) {
    std::vector<double> out(lm.n_paths());
    CandidateRng rng{CounterRng{cfg.seed}, static_cast<std::uint64_t>(idx), 0};
    gen_into(lm, v, cfg, rng, out.data());
    return out;
  };

  if (global.l1_idx >= 0) {
    res.feasible_found = true;
    res.action.splits = regen(global.l1_idx);
    res.l1_distance = global.l1;
  } else if (global.mlu_idx >= 0 && global.mlu <= proto_mlu) {
    res.action.splits = regen(global.mlu_idx);
    double l1 = 0.0;
    for (int tp = 0; tp < lm.n_paths(); ++tp)
      l1 += std::abs(res.action.splits[tp] - proto.splits[tp]);
    res.l1_distance = l1;
  } else {
    // every candidate would raise utilization; keep the proto
    res.action = proto;
  }
  return res;
}

namespace {

SplitAction gen_one(const LoadModel& lm, const DemandVector& demand,
                    const SplitAction& proto, CbfConfig cfg, CbfPolicy policy,
                    CandidateRng& rng) {
  cfg.policy = policy;
  validate_config(cfg);
  check_action(lm, proto);
  const ProtoView v = make_view(lm, demand, proto, cfg);
  SplitAction a;
  a.splits.resize(lm.n_paths());
  gen_into(lm, v, cfg, rng, a.splits.data());
  return a;
}

}  // namespace

SplitAction gen_naive(const LoadModel& lm, const DemandVector& demand,
                      const SplitAction& proto, const CbfConfig& cfg,
                      CandidateRng& rng) {
  return gen_one(lm, demand, proto, cfg, CbfPolicy::kNaive, rng);
}

SplitAction gen_delta_util(const LoadModel& lm, const DemandVector& demand,
                           const SplitAction& proto, const CbfConfig& cfg,
                           CandidateRng& rng) {
  return gen_one(lm, demand, proto, cfg, CbfPolicy::kDeltaUtil, rng);
}

SplitAction gen_max_util(const LoadModel& lm, const DemandVector& demand,
                         const SplitAction& proto, const CbfConfig& cfg,
                         CandidateRng& rng) {
  return gen_one(lm, demand, proto, cfg, CbfPolicy::kMaxUtil, rng);
}

}  // namespace sdwan
