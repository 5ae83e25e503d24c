#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdwan/topo.hpp"
#include "sdwan/traffic.hpp"

namespace sdwan {

// Per-tunnel split ratios over candidate paths, flattened in (tunnel, path)
// order. Each tunnel's slice must lie on the probability simplex (C1).
struct SplitAction {
  std::vector<double> splits;
};

inline constexpr double kSimplexTol = 1e-9;
// Effective load is clamped at kLoadClamp * capacity inside the M/M/1 term so
// a saturated link yields a large finite delay instead of a pole.
inline constexpr double kLoadClamp = 0.999;

// Flattened, index-based view of an OverlayNetwork used by every load/delay
// evaluator. Holds a pointer to the network; keep the network alive.
class LoadModel {
 public:
  explicit LoadModel(const OverlayNetwork& net);

  const OverlayNetwork& net() const { return *net_; }
  int n_tunnels() const { return n_tunnels_; }
  int n_paths() const { return n_tp_; }      // total tunnel-paths
  int n_edges() const { return n_edges_; }
  int tp_begin(int k) const { return tp_offset_[k]; }
  int tp_end(int k) const { return tp_offset_[k + 1]; }
  int tp_index(int k, int p) const { return tp_offset_[k] + p; }
  int tunnel_of(int tp) const { return tp_tunnel_[tp]; }
  std::span<const int> edges_of(int tp) const;
  std::span<const int> paths_through(int edge) const;  // tp ids, ascending
  double capacity(int e) const { return capacity_[e]; }
  double inv_capacity(int e) const { return inv_capacity_[e]; }
  double prop_delay(int e) const { return prop_delay_[e]; }
  // propagation + idle/queueing delay precomputation is left to callers

 private:
  const OverlayNetwork* net_;
  int n_tunnels_ = 0, n_tp_ = 0, n_edges_ = 0;
  std::vector<int> tp_offset_, tp_tunnel_;
  std::vector<int> path_edge_offset_, path_edges_;
  std::vector<int> edge_inc_offset_, edge_inc_tp_;
  std::vector<double> capacity_, inv_capacity_, prop_delay_;
};

struct RewardConfig {
  double sigma = 0.8;  // weight of average delay vs MLU
};

struct StepOutcome {
  std::vector<double> offered_load;   // per edge, Mbps (pre water-filling)
  std::vector<double> admitted_load;  // per edge, Mbps
  std::vector<double> admitted_rate;  // per tunnel-path, Mbps
  std::vector<double> link_delay;     // per edge, s (from admitted loads)
  std::vector<double> path_delay;     // per tunnel-path, s
  std::vector<double> tunnel_delay;   // per tunnel, s
  double mlu = 0.0;         // max_e offered_load / capacity
  double acceptance = 1.0;  // sum admitted / sum offered
  double avg_delay = 0.0;   // mean tunnel delay, s
  double reward = 0.0;
};

// Throws std::invalid_argument on dimension mismatch or C1 violation.
void check_action(const LoadModel& lm, const SplitAction& a);
// Renormalize each tunnel slice to the simplex (clips negatives to 0;
// all-zero slices become uniform).
void renormalize(const LoadModel& lm, SplitAction& a);

std::vector<double> offered_tp_rates(const LoadModel& lm,
                                     const DemandVector& demand,
                                     const SplitAction& a);
std::vector<double> edge_loads_from_rates(const LoadModel& lm,
                                          std::span<const double> tp_rates);
std::vector<double> offered_loads(const LoadModel& lm, const DemandVector& demand,
                                  const SplitAction& a);
double max_utilization(const LoadModel& lm, std::span<const double> edge_loads);
double mlu(const LoadModel& lm, const DemandVector& demand, const SplitAction& a);

// Max-min fair admitted rates via progressive filling over (tunnel, path)
// flows. Admitted <= offered per flow, per-edge sums <= capacity, and when no
// edge is over capacity every flow is admitted exactly.
std::vector<double> water_fill(const LoadModel& lm,
                               std::span<const double> offered_tp);

// M/M/1 with clamped effective load: prop + 1 / (c - min(l, kLoadClamp * c)).
double link_delay(double capacity, double load, double prop_delay);

struct DelayResult {
  std::vector<double> path_delay;    // per tunnel-path
  std::vector<double> tunnel_delay;  // per tunnel
};
// Tunnel delay is the max path delay over paths with positive admitted rate;
// a fully starved tunnel falls back to the max over all its paths.
DelayResult path_and_tunnel_delays(const LoadModel& lm,
                                   std::span<const double> edge_loads,
                                   std::span<const double> tp_rates);

double reward(const StepOutcome& outcome, const RewardConfig& cfg);

// One full evaluation of (demand, action): offered loads / MLU, water-filled
// admission, delays on admitted loads, acceptance, reward.
StepOutcome evaluate_step(const LoadModel& lm, const DemandVector& demand,
                          const SplitAction& a, const RewardConfig& cfg);

// Episodic wrapper. Traffic is a continuous function of the global step t;
// episode boundaries only flip the done flag, they do not reset the phase.
class SdwanEnv {
 public:
  SdwanEnv(const OverlayNetwork& net, TrafficConfig traffic, RewardConfig rew,
           int episode_len, std::int64_t t0 = 0);

  const LoadModel& model() const { return lm_; }
  const DemandVector& demand() const { return demand_; }
  std::int64_t t() const { return t_; }
  int episode_step() const { return episode_step_; }

  struct StepResult {
    StepOutcome outcome;
    DemandVector next;
    bool done = false;
  };
  StepResult step(const SplitAction& a);

 private:
  LoadModel lm_;
  TrafficConfig traffic_;
  RewardConfig reward_;
  int episode_len_;
  std::int64_t t_;
  int episode_step_ = 0;
  DemandVector demand_;
};

}  // namespace sdwan
