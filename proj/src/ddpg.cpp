#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdwan/agents.hpp"

namespace sdwan {

namespace {

void validate(const DdpgConfig& c) {
  if (!(c.lr_actor > 0.0) || !(c.lr_critic > 0.0))
    throw std::invalid_argument("ddpg: learning rates must be > 0");
  if (!(c.tau > 0.0) || c.tau > 1.0)
    throw std::invalid_argument("ddpg: tau must be in (0, 1]");
  if (c.gamma < 0.0 || c.gamma > 1.0)
    throw std::invalid_argument("ddpg: gamma must be in [0, 1]");
  if (c.buffer_capacity < 1 || c.batch < 1 || c.updates_per_cycle < 1)
    throw std::invalid_argument("ddpg: capacity/batch/updates must be >= 1");
  if (c.expl_sd_start < 0.0 || c.expl_sd_end < 0.0 || c.expl_anneal_steps < 1)
    throw std::invalid_argument("ddpg: bad exploration schedule");
  if (c.hidden < 1 || c.hidden_layers < 1)
    throw std::invalid_argument("ddpg: hidden sizing must be >= 1");
  if (!(c.state_scale > 0.0))
    throw std::invalid_argument("ddpg: state_scale must be > 0");
}

}  // namespace

DdpgAgent::DdpgAgent(const LoadModel& lm, DdpgConfig cfg)
    : cfg_(cfg), tp_off_(detail::tunnel_offsets(lm)), noise_(0) {}

DdpgAgent::DdpgAgent(const LoadModel& lm, DdpgConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      tp_off_(detail::tunnel_offsets(lm)),
      actor_(detail::mlp_dims(lm.n_tunnels(), cfg.hidden, cfg.hidden_layers,
                              lm.n_paths()),
             OutputAct::kLinear, mix64(seed, 11)),
      critic_(detail::mlp_dims(lm.n_tunnels() + lm.n_paths(), cfg.hidden,
                               cfg.hidden_layers, 1),
              OutputAct::kLinear, mix64(seed, 12)),
      target_actor_(actor_),
      target_critic_(critic_),
      noise_(mix64(seed, 13)) {
  validate(cfg_);
  actor_adam_.lr = cfg_.lr_actor;
  critic_adam_.lr = cfg_.lr_critic;
}

ActResult DdpgAgent::act(const DemandVector& state, bool explore) {
  const std::vector<double> s = normalize_state(state, cfg_.state_scale);
  if (static_cast<int>(s.size()) != actor_.input_dim())
    throw std::invalid_argument("ddpg: state size does not match actor input");
  ActResult r;
  r.logits = actor_.forward(s);
  if (explore) {
    const double frac =
        std::min(1.0, static_cast<double>(act_steps_) /
                          static_cast<double>(cfg_.expl_anneal_steps));
    const double sd =
        cfg_.expl_sd_start + (cfg_.expl_sd_end - cfg_.expl_sd_start) * frac;
    for (double& l : r.logits) l += sd * noise_.normal();
    ++act_steps_;
  }
  r.action = softmax_action(tp_off_, r.logits);
  return r;
}

DdpgDiag DdpgAgent::update(const ReplayBuffer& buffer) {
  if (buffer.size() < cfg_.batch)
    throw std::runtime_error("ddpg: replay buffer smaller than one batch");
  const int B = cfg_.batch;
  const int ns = actor_.input_dim();
  const int na = actor_.output_dim();
  const int nq = ns + na;
  const std::vector<int> idx = buffer.sample_indices(B, noise_);

  std::vector<double> S(static_cast<std::size_t>(B) * ns);
  std::vector<double> SN(static_cast<std::size_t>(B) * ns);
  std::vector<double> A(static_cast<std::size_t>(B) * na);
  std::vector<double> R(B);
  std::vector<char> D(B);
  for (int j = 0; j < B; ++j) {
    const Experience& e = buffer.at(idx[j]);
    if (static_cast<int>(e.deployed_action.splits.size()) != na)
      throw std::invalid_argument("ddpg: stored action size mismatch");
    const std::vector<double> s = normalize_state(e.state, cfg_.state_scale);
    const std::vector<double> sn =
        normalize_state(e.next_state, cfg_.state_scale);
    std::copy(s.begin(), s.end(), S.begin() + static_cast<std::size_t>(j) * ns);
    std::copy(sn.begin(), sn.end(),
              SN.begin() + static_cast<std::size_t>(j) * ns);
    std::copy(e.deployed_action.splits.begin(), e.deployed_action.splits.end(),
              A.begin() + static_cast<std::size_t>(j) * na);
    R[j] = e.reward;
    D[j] = e.done ? 1 : 0;
  }

  // Bellman targets from the target networks
  std::vector<double> TL(static_cast<std::size_t>(B) * na);
  target_actor_.forward_batch(B, SN.data(), TL.data());
  std::vector<double> qin(static_cast<std::size_t>(B) * nq);
  for (int j = 0; j < B; ++j) {
    double* row = qin.data() + static_cast<std::size_t>(j) * nq;
    std::copy_n(SN.data() + static_cast<std::size_t>(j) * ns, ns, row);
    const SplitAction ta = softmax_action(
        tp_off_, {TL.data() + static_cast<std::size_t>(j) * na,
                  static_cast<std::size_t>(na)});
    std::copy(ta.splits.begin(), ta.splits.end(), row + ns);
  }
  std::vector<double> qt(B);
  target_critic_.forward_batch(B, qin.data(), qt.data());

  // critic regression on the deployed actions
  for (int j = 0; j < B; ++j) {
    double* row = qin.data() + static_cast<std::size_t>(j) * nq;
    std::copy_n(S.data() + static_cast<std::size_t>(j) * ns, ns, row);
    std::copy_n(A.data() + static_cast<std::size_t>(j) * na, na, row + ns);
  }
  Mlp::Tape ctape;
  std::vector<double> q(B);
  critic_.forward_batch(B, qin.data(), q.data(), ctape);
  DdpgDiag diag;
  std::vector<double> dq(B);
  for (int j = 0; j < B; ++j) {
    const double y = R[j] + cfg_.gamma * (D[j] ? 0.0 : 1.0) * qt[j];
    const double err = q[j] - y;
    diag.critic_loss += err * err;
    dq[j] = 2.0 * err / B;
  }
  diag.critic_loss /= B;
  std::vector<double> cgrads(critic_.param_count());
  critic_.backward(ctape, dq.data(), cgrads);
  adam_step(critic_.params(), cgrads, critic_adam_, cfg_.grad_clip);

  // actor ascent on Q(s, softmax(mu(s)))
  Mlp::Tape atape;
  std::vector<double> L(static_cast<std::size_t>(B) * na);
  actor_.forward_batch(B, S.data(), L.data(), atape);
  std::vector<double> pa(static_cast<std::size_t>(B) * na);
  for (int j = 0; j < B; ++j) {
    double* row = qin.data() + static_cast<std::size_t>(j) * nq;
    std::copy_n(S.data() + static_cast<std::size_t>(j) * ns, ns, row);
    const SplitAction a = softmax_action(
        tp_off_, {L.data() + static_cast<std::size_t>(j) * na,
                  static_cast<std::size_t>(na)});
    std::copy(a.splits.begin(), a.splits.end(),
              pa.begin() + static_cast<std::size_t>(j) * na);
    std::copy(a.splits.begin(), a.splits.end(), row + ns);
  }
  Mlp::Tape ctape2;
  std::vector<double> q2(B);
  critic_.forward_batch(B, qin.data(), q2.data(), ctape2);
  for (int j = 0; j < B; ++j) diag.actor_q += q2[j];
  diag.actor_q /= B;

  std::vector<double> dq2(B, -1.0 / B);  // minimize -Q
  std::vector<double> scratch(critic_.param_count());
  std::vector<double> din(static_cast<std::size_t>(B) * nq);
  critic_.backward(ctape2, dq2.data(), scratch, din.data());
  // chain the action part of dQ/dinput back through the per-tunnel softmax
  std::vector<double> dl(static_cast<std::size_t>(B) * na);
  const int n_tunnels = static_cast<int>(tp_off_.size()) - 1;
  for (int j = 0; j < B; ++j) {
    const double* g = din.data() + static_cast<std::size_t>(j) * nq + ns;
    const double* y = pa.data() + static_cast<std::size_t>(j) * na;
    double* out = dl.data() + static_cast<std::size_t>(j) * na;
    for (int k = 0; k < n_tunnels; ++k) {
      double dot = 0.0;
      for (int i = tp_off_[k]; i < tp_off_[k + 1]; ++i) dot += g[i] * y[i];
      for (int i = tp_off_[k]; i < tp_off_[k + 1]; ++i)
        out[i] = y[i] * (g[i] - dot);
    }
  }
  std::vector<double> agrads(actor_.param_count());
  actor_.backward(atape, dl.data(), agrads);
  adam_step(actor_.params(), agrads, actor_adam_, cfg_.grad_clip);

  soft_update(target_actor_, actor_, cfg_.tau);
  soft_update(target_critic_, critic_, cfg_.tau);
  return diag;
}

void DdpgAgent::save(Checkpoint& ck) const {
  ck.i64["algo"] = {1};  // 1 = off-policy agent
  save_mlp(ck, "ddpg/actor", actor_);
  save_mlp(ck, "ddpg/critic", critic_);
  save_mlp(ck, "ddpg/target_actor", target_actor_);
  save_mlp(ck, "ddpg/target_critic", target_critic_);
  save_adam(ck, "ddpg/actor_adam", actor_adam_);
  save_adam(ck, "ddpg/critic_adam", critic_adam_);
  ck.f64["ddpg/cfg_f"] = {cfg_.lr_actor,      cfg_.lr_critic,
                          cfg_.tau,           cfg_.gamma,
                          cfg_.grad_clip,     cfg_.expl_sd_start,
                          cfg_.expl_sd_end,   cfg_.state_scale};
  ck.i64["ddpg/cfg_i"] = {cfg_.buffer_capacity, cfg_.batch,
                          cfg_.updates_per_cycle, cfg_.expl_anneal_steps,
                          cfg_.hidden, cfg_.hidden_layers};
  ck.i64["ddpg/act_steps"] = {act_steps_};
}

DdpgAgent DdpgAgent::load(const Checkpoint& ck, const LoadModel& lm) {
  const auto fi = ck.f64.find("ddpg/cfg_f");
  const auto ii = ck.i64.find("ddpg/cfg_i");
  const auto si = ck.i64.find("ddpg/act_steps");
  if (fi == ck.f64.end() || ii == ck.i64.end() || si == ck.i64.end())
    throw std::runtime_error("checkpoint: missing off-policy agent entries");
  const std::vector<double>& f = fi->second;
  const std::vector<std::int64_t>& ic = ii->second;
  if (f.size() != 8 || ic.size() != 6)
    throw std::runtime_error("checkpoint: bad agent config entries");
  DdpgConfig cfg;
  cfg.lr_actor = f[0];
  cfg.lr_critic = f[1];
  cfg.tau = f[2];
  cfg.gamma = f[3];
  cfg.grad_clip = f[4];
  cfg.expl_sd_start = f[5];
  cfg.expl_sd_end = f[6];
  cfg.state_scale = f[7];
  cfg.buffer_capacity = static_cast<int>(ic[0]);
  cfg.batch = static_cast<int>(ic[1]);
  cfg.updates_per_cycle = static_cast<int>(ic[2]);
  cfg.expl_anneal_steps = ic[3];
  cfg.hidden = static_cast<int>(ic[4]);
  cfg.hidden_layers = static_cast<int>(ic[5]);

  DdpgAgent agent(lm, cfg);
  agent.actor_ = load_mlp(ck, "ddpg/actor");
  agent.critic_ = load_mlp(ck, "ddpg/critic");
  agent.target_actor_ = load_mlp(ck, "ddpg/target_actor");
  agent.target_critic_ = load_mlp(ck, "ddpg/target_critic");
  agent.actor_adam_ = load_adam(ck, "ddpg/actor_adam");
  agent.critic_adam_ = load_adam(ck, "ddpg/critic_adam");
  agent.act_steps_ = si->second.at(0);
  if (agent.actor_.input_dim() != lm.n_tunnels() ||
      agent.actor_.output_dim() != lm.n_paths())
    throw std::runtime_error("checkpoint: agent does not match this network");
  return agent;
}

}  // namespace sdwan
