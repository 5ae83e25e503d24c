#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sdwan/env.hpp"
#include "sdwan/nn.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

// One environment transition as stored for learning. deployed_action is what
// actually ran (post safety projection); raw_action/raw_logits are the
// actor's own sample. log_prob is the Gaussian log-density of raw_logits
// under the behavior policy (on-policy agents only; NaN otherwise).
struct Experience {
  DemandVector state;
  SplitAction deployed_action;
  SplitAction raw_action;
  std::vector<double> raw_logits;
  double log_prob = std::numeric_limits<double>::quiet_NaN();
  double reward = 0.0;
  DemandVector next_state;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(data_.size()); }
  void push(Experience e);  // overwrites oldest once full
  const Experience& at(int i) const { return data_[i]; }
  // Uniform without replacement within the batch; throws when batch > size.
  std::vector<int> sample_indices(int batch, StreamRng& rng) const;

 private:
  int capacity_ = 0;
  int next_ = 0;
  std::vector<Experience> data_;
};

// demand / scale, elementwise (state fed to the networks)
std::vector<double> normalize_state(const DemandVector& demand, double scale);

namespace detail {
// {in, hidden x layers, out}
std::vector<int> mlp_dims(int in, int hidden, int layers, int out);
// flattened tunnel boundaries copied out of the load model
std::vector<int> tunnel_offsets(const LoadModel& lm);
}  // namespace detail

// Per-tunnel softmax over path logits; tp_off are the flattened tunnel
// boundaries (tp_off[k]..tp_off[k+1] is tunnel k's slice).
SplitAction softmax_action(std::span<const int> tp_off,
                           std::span<const double> logits);

struct ActResult {
  std::vector<double> logits;  // pre-softmax sample (or mean when not exploring)
  SplitAction action;
  double log_prob = std::numeric_limits<double>::quiet_NaN();
};

struct PpoConfig {
  // Adam step size for actor, critic, and log-std. Sized so a single epoch's
  // policy movement stays well under the KL ceiling; larger steps get eaten
  // by the rollback guard and the policy stops improving.
  double lr = 1e-4;
  double clip_eps = 0.2;
  double target_kl = 0.03;
  double grad_clip = 0.5;   // global L2 norm, per network
  double gamma = 0.7;
  double gae_lambda = 0.95;
  int epochs_per_update = 10;
  int batch = 256;    // minibatch size within an update
  int rollout = 256;  // steps per update
  bool normalize_adv = true;
  // State-independent exploration log-std, learned, clamped to this range.
  // The floor matters twice over: measured KL scales with 1/sd^2, so letting
  // sd collapse makes every update overshoot the KL ceiling and roll back.
  double init_log_std = -0.7;
  double log_std_min = -1.9;   // sd ~ 0.15
  double log_std_max = -0.51;  // sd ~ 0.6
  int hidden = 512;
  int hidden_layers = 3;
  double state_scale = 15.0;  // Mbps; demand normalization divisor
};

struct PpoDiag {
  double policy_loss = 0.0;  // last completed epoch
  double value_loss = 0.0;
  double kl = 0.0;  // mean KL(old || new) of the returned parameters
  double clip_fraction = 0.0;
  int epochs_run = 0;
  bool rolled_back = false;  // last epoch undone because KL > 2 * target
};

// On-policy actor-critic. The actor maps normalized demand to one logit per
// (tunnel, path); sampling adds Gaussian noise to the logits before the
// per-tunnel softmax. Updates run clipped-surrogate epochs with measured-KL
// early stop at 1.5x target; an epoch that lands beyond 2x target is undone,
// so the deployed parameters never exceed 2x target KL.
class PpoAgent {
 public:
  PpoAgent(const LoadModel& lm, PpoConfig cfg, std::uint64_t seed);

  ActResult act(const DemandVector& state, bool explore);
  double value(const DemandVector& state);
  PpoDiag update(std::span<const Experience> rollout);

  const PpoConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  std::span<const double> log_std() const { return log_std_; }

  void save(Checkpoint& ck) const;
  static PpoAgent load(const Checkpoint& ck, const LoadModel& lm);

 private:
  PpoAgent(const LoadModel& lm, PpoConfig cfg);  // shared layout setup

  PpoConfig cfg_;
  std::vector<int> tp_off_;
  Mlp actor_, critic_;
  std::vector<double> log_std_;
  AdamState actor_adam_, critic_adam_, log_std_adam_;
  StreamRng noise_;
};

struct DdpgConfig {
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double tau = 0.05;
  double gamma = 0.7;
  double grad_clip = 0.0;  // 0 = off
  int buffer_capacity = 100000;
  int batch = 256;
  int updates_per_cycle = 32;  // gradient steps per update phase
  // Gaussian exploration noise on logits, sd annealed linearly over
  // anneal_steps acting steps
  double expl_sd_start = 0.2;
  double expl_sd_end = 0.05;
  std::int64_t expl_anneal_steps = 50000;
  int hidden = 512;
  int hidden_layers = 3;
  double state_scale = 15.0;
};

struct DdpgDiag {
  double critic_loss = 0.0;
  double actor_q = 0.0;  // mean Q(s, mu(s)) before the actor step
};

// Off-policy deterministic actor-critic with target networks. Learns from the
// deployed (projected) actions; the critic takes [normalized state, flattened
// action].
class DdpgAgent {
 public:
  DdpgAgent(const LoadModel& lm, DdpgConfig cfg, std::uint64_t seed);

  ActResult act(const DemandVector& state, bool explore);
  DdpgDiag update(const ReplayBuffer& buffer);  // throws if size < batch

  const DdpgConfig& config() const { return cfg_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic() const { return target_critic_; }

  void save(Checkpoint& ck) const;
  static DdpgAgent load(const Checkpoint& ck, const LoadModel& lm);

 private:
  DdpgAgent(const LoadModel& lm, DdpgConfig cfg);

  DdpgConfig cfg_;
  std::vector<int> tp_off_;
  Mlp actor_, critic_, target_actor_, target_critic_;
  AdamState actor_adam_, critic_adam_;
  StreamRng noise_;
  std::int64_t act_steps_ = 0;  // drives the exploration schedule
};

}  // namespace sdwan
