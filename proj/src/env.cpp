#include "sdwan/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdwan {

LoadModel::LoadModel(const OverlayNetwork& net) : net_(&net) {
  n_tunnels_ = static_cast<int>(net.tunnels.size());
  n_edges_ = static_cast<int>(net.edges.size());

  tp_offset_.assign(n_tunnels_ + 1, 0);
  for (int k = 0; k < n_tunnels_; ++k)
    tp_offset_[k + 1] = tp_offset_[k] + static_cast<int>(net.tunnels[k].paths.size());
  n_tp_ = tp_offset_[n_tunnels_];

  tp_tunnel_.resize(n_tp_);
  path_edge_offset_.assign(n_tp_ + 1, 0);
  for (int k = 0; k < n_tunnels_; ++k) {
    for (std::size_t p = 0; p < net.tunnels[k].paths.size(); ++p) {
      const int tp = tp_offset_[k] + static_cast<int>(p);
      tp_tunnel_[tp] = k;
      path_edge_offset_[tp + 1] =
          path_edge_offset_[tp] + static_cast<int>(net.tunnels[k].paths[p].size());
    }
  }
  path_edges_.reserve(path_edge_offset_[n_tp_]);
  for (const Tunnel& tun : net.tunnels)
    for (const auto& path : tun.paths)
      path_edges_.insert(path_edges_.end(), path.begin(), path.end());

  // per-edge incidence, built in ascending tp order so that edge-major and
  // path-major accumulation visit contributions in the same sequence
  std::vector<int> counts(n_edges_, 0);
  for (int e : path_edges_) ++counts[e];
  edge_inc_offset_.assign(n_edges_ + 1, 0);
  for (int e = 0; e < n_edges_; ++e) edge_inc_offset_[e + 1] = edge_inc_offset_[e] + counts[e];
  edge_inc_tp_.resize(path_edges_.size());
  std::vector<int> cursor(edge_inc_offset_.begin(), edge_inc_offset_.end() - 1);
  for (int tp = 0; tp < n_tp_; ++tp)
    for (int i = path_edge_offset_[tp]; i < path_edge_offset_[tp + 1]; ++i)
      edge_inc_tp_[cursor[path_edges_[i]]++] = tp;

  capacity_.resize(n_edges_);
  inv_capacity_.resize(n_edges_);
  prop_delay_.resize(n_edges_);
  for (int e = 0; e < n_edges_; ++e) {
    capacity_[e] = net.edges[e].capacity;
    inv_capacity_[e] = 1.0 / net.edges[e].capacity;
    prop_delay_[e] = net.edges[e].prop_delay;
  }
}

std::span<const int> LoadModel::edges_of(int tp) const {
  return {path_edges_.data() + path_edge_offset_[tp],
          static_cast<std::size_t>(path_edge_offset_[tp + 1] - path_edge_offset_[tp])};
}

std::span<const int> LoadModel::paths_through(int edge) const {
  return {edge_inc_tp_.data() + edge_inc_offset_[edge],
          static_cast<std::size_t>(edge_inc_offset_[edge + 1] - edge_inc_offset_[edge])};
}

void check_action(const LoadModel& lm, const SplitAction& a) {
  if (static_cast<int>(a.splits.size()) != lm.n_paths())
    throw std::invalid_argument("action: split count does not match network");
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    double sum = 0.0;
    for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp) {
      const double x = a.splits[tp];
      if (!(x >= 0.0) || x > 1.0 + kSimplexTol)
        throw std::invalid_argument("action: split outside [0,1]");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
      throw std::invalid_argument("action: tunnel splits must sum to 1");
  }
}

void renormalize(const LoadModel& lm, SplitAction& a) {
  if (static_cast<int>(a.splits.size()) != lm.n_paths())
    throw std::invalid_argument("action: split count does not match network");
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    const int lo = lm.tp_begin(k), hi = lm.tp_end(k);
    double sum = 0.0;
    for (int tp = lo; tp < hi; ++tp) {
      if (a.splits[tp] < 0.0) a.splits[tp] = 0.0;
      sum += a.splits[tp];
    }
    if (sum <= 0.0) {
      const double u = 1.0 / (hi - lo);
      for (int tp = lo; tp < hi; ++tp) a.splits[tp] = u;
    } else {
      for (int tp = lo; tp < hi; ++tp) a.splits[tp] /= sum;
    }
  }
}

std::vector<double> offered_tp_rates(const LoadModel& lm,
                                     const DemandVector& demand,
                                     const SplitAction& a) {
  if (static_cast<int>(demand.demands.size()) != lm.n_tunnels())
    throw std::invalid_argument("demand: tunnel count does not match network");
  std::vector<double> rates(lm.n_paths());
  for (int tp = 0; tp < lm.n_paths(); ++tp)
    rates[tp] = demand.demands[lm.tunnel_of(tp)] * a.splits[tp];
  return rates;
}

std::vector<double> edge_loads_from_rates(const LoadModel& lm,
                                          std::span<const double> tp_rates) {
  std::vector<double> loads(lm.n_edges(), 0.0);
  for (int tp = 0; tp < lm.n_paths(); ++tp) {
    const double w = tp_rates[tp];
    for (int e : lm.edges_of(tp)) loads[e] += w;
  }
  return loads;
}

std::vector<double> offered_loads(const LoadModel& lm, const DemandVector& demand,
                                  const SplitAction& a) {
  check_action(lm, a);
  return edge_loads_from_rates(lm, offered_tp_rates(lm, demand, a));
}

double max_utilization(const LoadModel& lm, std::span<const double> edge_loads) {
  double m = 0.0;
  for (int e = 0; e < lm.n_edges(); ++e) {
    const double u = edge_loads[e] * lm.inv_capacity(e);
    if (u > m) m = u;
  }
  return m;
}

double mlu(const LoadModel& lm, const DemandVector& demand, const SplitAction& a) {
  return max_utilization(lm, offered_loads(lm, demand, a));
}

std::vector<double> water_fill(const LoadModel& lm,
                               std::span<const double> offered_tp) {
  const int nf = lm.n_paths();
  const int ne = lm.n_edges();
  std::vector<double> rate(nf, 0.0);
  std::vector<char> active(nf, 0);
  std::vector<double> residual(ne);
  std::vector<int> active_count(ne, 0);

  int n_active = 0;
  for (int f = 0; f < nf; ++f) {
    if (offered_tp[f] > 0.0) {
      active[f] = 1;
      ++n_active;
    }
  }
  for (int e = 0; e < ne; ++e) residual[e] = lm.capacity(e);
  for (int f = 0; f < nf; ++f)
    if (active[f])
      for (int e : lm.edges_of(f)) ++active_count[e];

  // progressive filling: raise all unfrozen flows by the same increment until
  // either a flow reaches its offered rate or a link runs out of capacity
  while (n_active > 0) {
    double delta = std::numeric_limits<double>::infinity();
    for (int f = 0; f < nf; ++f)
      if (active[f]) delta = std::min(delta, offered_tp[f] - rate[f]);
    for (int e = 0; e < ne; ++e)
      if (active_count[e] > 0)
        delta = std::min(delta, residual[e] / active_count[e]);
    if (delta < 0.0) delta = 0.0;

    for (int f = 0; f < nf; ++f)
      if (active[f]) rate[f] += delta;
    for (int e = 0; e < ne; ++e)
      if (active_count[e] > 0) residual[e] -= delta * active_count[e];

    // freeze at demand first (admitted == offered must be exact)
    const double eps = 1e-12;
    std::vector<char> freeze(nf, 0);
    for (int f = 0; f < nf; ++f)
      if (active[f] && rate[f] >= offered_tp[f] - eps * std::max(1.0, offered_tp[f])) {
        rate[f] = offered_tp[f];
        freeze[f] = 1;
      }
    for (int e = 0; e < ne; ++e) {
      if (active_count[e] > 0 && residual[e] <= eps * lm.capacity(e)) {
        residual[e] = std::max(residual[e], 0.0);
        for (int f : lm.paths_through(e))
          if (active[f]) freeze[f] = 1;
      }
    }
    bool any = false;
    for (int f = 0; f < nf; ++f) {
      if (freeze[f] && active[f]) {
        active[f] = 0;
        --n_active;
        for (int e : lm.edges_of(f)) --active_count[e];
        any = true;
      }
    }
    if (!any) {
      // numerically stuck; freeze everything at the current level
      break;
    }
  }
  return rate;
}

double link_delay(double capacity, double load, double prop_delay) {
  const double effective = std::min(load, kLoadClamp * capacity);
  return prop_delay + 1.0 / (capacity - effective);
}

DelayResult path_and_tunnel_delays(const LoadModel& lm,
                                   std::span<const double> edge_loads,
                                   std::span<const double> tp_rates) {
  DelayResult out;
  std::vector<double> edge_delay(lm.n_edges());
  for (int e = 0; e < lm.n_edges(); ++e)
    edge_delay[e] = link_delay(lm.capacity(e), edge_loads[e], lm.prop_delay(e));

  out.path_delay.resize(lm.n_paths());
  for (int tp = 0; tp < lm.n_paths(); ++tp) {
    double d = 0.0;
    for (int e : lm.edges_of(tp)) d += edge_delay[e];
    out.path_delay[tp] = d;
  }

  out.tunnel_delay.assign(lm.n_tunnels(), 0.0);
  for (int k = 0; k < lm.n_tunnels(); ++k) {
    double used_max = -1.0, all_max = 0.0;
    for (int tp = lm.tp_begin(k); tp < lm.tp_end(k); ++tp) {
      all_max = std::max(all_max, out.path_delay[tp]);
      if (tp_rates[tp] > 0.0) used_max = std::max(used_max, out.path_delay[tp]);
    }
    out.tunnel_delay[k] = used_max >= 0.0 ? used_max : all_max;
  }
  return out;
}

double reward(const StepOutcome& outcome, const RewardConfig& cfg) {
  if (cfg.sigma < 0.0 || cfg.sigma > 1.0)
    throw std::invalid_argument("reward: sigma must be in [0,1]");
  return -cfg.sigma * outcome.avg_delay - (1.0 - cfg.sigma) * outcome.mlu;
}

StepOutcome evaluate_step(const LoadModel& lm, const DemandVector& demand,
                          const SplitAction& a, const RewardConfig& cfg) {
  check_action(lm, a);
  StepOutcome out;
  const std::vector<double> offered_tp = offered_tp_rates(lm, demand, a);
  out.offered_load = edge_loads_from_rates(lm, offered_tp);
  out.mlu = max_utilization(lm, out.offered_load);

  out.admitted_rate = water_fill(lm, offered_tp);
  out.admitted_load = edge_loads_from_rates(lm, out.admitted_rate);

  DelayResult delays = path_and_tunnel_delays(lm, out.admitted_load, out.admitted_rate);
  out.path_delay = std::move(delays.path_delay);
  out.tunnel_delay = std::move(delays.tunnel_delay);
  out.link_delay.resize(lm.n_edges());
  for (int e = 0; e < lm.n_edges(); ++e)
    out.link_delay[e] = link_delay(lm.capacity(e), out.admitted_load[e], lm.prop_delay(e));

  double offered_sum = 0.0, admitted_sum = 0.0;
  for (double v : offered_tp) offered_sum += v;
  for (double v : out.admitted_rate) admitted_sum += v;
  out.acceptance = offered_sum > 0.0 ? admitted_sum / offered_sum : 1.0;
  if (out.acceptance > 1.0) out.acceptance = 1.0;

  double delay_sum = 0.0;
  for (double d : out.tunnel_delay) delay_sum += d;
  out.avg_delay = delay_sum / lm.n_tunnels();
  out.reward = reward(out, cfg);
  return out;
}

SdwanEnv::SdwanEnv(const OverlayNetwork& net, TrafficConfig traffic,
                   RewardConfig rew, int episode_len, std::int64_t t0)
    : lm_(net), traffic_(std::move(traffic)), reward_(rew),
      episode_len_(episode_len), t_(t0) {
  if (episode_len_ < 1) throw std::invalid_argument("env: episode_len must be >= 1");
  validate_config(traffic_);
  demand_ = generate(traffic_, lm_.n_tunnels(), t_);
}

SdwanEnv::StepResult SdwanEnv::step(const SplitAction& a) {
  StepResult res;
  res.outcome = evaluate_step(lm_, demand_, a, reward_);
  ++t_;
  ++episode_step_;
  res.done = episode_step_ >= episode_len_;
  if (res.done) episode_step_ = 0;
  demand_ = generate(traffic_, lm_.n_tunnels(), t_);
  res.next = demand_;
  return res;
}

}  // namespace sdwan
