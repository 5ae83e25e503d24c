#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sdwan/agents.hpp"
#include "sdwan/kernels.hpp"

namespace sdwan {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void validate(const PpoConfig& c) {
  if (!(c.lr > 0.0)) throw std::invalid_argument("ppo: lr must be > 0");
  if (!(c.clip_eps > 0.0)) throw std::invalid_argument("ppo: clip_eps must be > 0");
  if (!(c.target_kl > 0.0)) throw std::invalid_argument("ppo: target_kl must be > 0");
  if (c.gamma < 0.0 || c.gamma > 1.0)
    throw std::invalid_argument("ppo: gamma must be in [0, 1]");
  if (c.gae_lambda < 0.0 || c.gae_lambda > 1.0)
    throw std::invalid_argument("ppo: gae_lambda must be in [0, 1]");
  if (c.epochs_per_update < 1 || c.batch < 1 || c.rollout < 1)
    throw std::invalid_argument("ppo: epochs/batch/rollout must be >= 1");
  if (c.hidden < 1 || c.hidden_layers < 1)
    throw std::invalid_argument("ppo: hidden sizing must be >= 1");
  if (!(c.state_scale > 0.0))
    throw std::invalid_argument("ppo: state_scale must be > 0");
  if (c.log_std_min > c.init_log_std || c.init_log_std > c.log_std_max)
    throw std::invalid_argument("ppo: init_log_std outside clamp range");
}

}  // namespace

PpoAgent::PpoAgent(const LoadModel& lm, PpoConfig cfg)
    : cfg_(cfg), tp_off_(detail::tunnel_offsets(lm)), noise_(0) {}

PpoAgent::PpoAgent(const LoadModel& lm, PpoConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      tp_off_(detail::tunnel_offsets(lm)),
      actor_(detail::mlp_dims(lm.n_tunnels(), cfg.hidden, cfg.hidden_layers,
                              lm.n_paths()),
             OutputAct::kLinear, mix64(seed, 1)),
      critic_(detail::mlp_dims(lm.n_tunnels(), cfg.hidden, cfg.hidden_layers, 1),
              OutputAct::kLinear, mix64(seed, 2)),
      log_std_(lm.n_paths(), cfg.init_log_std),
      noise_(mix64(seed, 3)) {
  validate(cfg_);
  actor_adam_.lr = cfg_.lr;
  critic_adam_.lr = cfg_.lr;
  log_std_adam_.lr = cfg_.lr;
}

ActResult PpoAgent::act(const DemandVector& state, bool explore) {
  const std::vector<double> s = normalize_state(state, cfg_.state_scale);
  if (static_cast<int>(s.size()) != actor_.input_dim())
    throw std::invalid_argument("ppo: state size does not match actor input");
  ActResult r;
  r.logits = actor_.forward(s);
  if (explore) {
    double logp = 0.0;
    for (std::size_t i = 0; i < r.logits.size(); ++i) {
      const double z = noise_.normal();
      r.logits[i] += std::exp(log_std_[i]) * z;
      logp += -0.5 * z * z - log_std_[i] - 0.5 * kLog2Pi;
    }
    r.log_prob = logp;
  }
  r.action = softmax_action(tp_off_, r.logits);
  return r;
}

double PpoAgent::value(const DemandVector& state) {
  return critic_.forward(normalize_state(state, cfg_.state_scale))[0];
}

PpoDiag PpoAgent::update(std::span<const Experience> rollout) {
  const int T = static_cast<int>(rollout.size());
  if (T != cfg_.rollout)
    throw std::invalid_argument("ppo: rollout length does not match config");
  const int ns = actor_.input_dim();
  const int na = actor_.output_dim();

  std::vector<double> S(static_cast<std::size_t>(T) * ns);
  std::vector<double> SN(static_cast<std::size_t>(T) * ns);
  std::vector<double> X(static_cast<std::size_t>(T) * na);
  std::vector<double> oldlp(T), rew(T);
  std::vector<char> done(T);
  for (int t = 0; t < T; ++t) {
    const Experience& e = rollout[t];
    if (!std::isfinite(e.log_prob))
      throw std::invalid_argument("ppo: experience is missing log_prob");
    if (static_cast<int>(e.raw_logits.size()) != na)
      throw std::invalid_argument("ppo: experience logits size mismatch");
    const std::vector<double> s = normalize_state(e.state, cfg_.state_scale);
    const std::vector<double> sn =
        normalize_state(e.next_state, cfg_.state_scale);
    std::copy(s.begin(), s.end(), S.begin() + static_cast<std::size_t>(t) * ns);
    std::copy(sn.begin(), sn.end(),
              SN.begin() + static_cast<std::size_t>(t) * ns);
    std::copy(e.raw_logits.begin(), e.raw_logits.end(),
              X.begin() + static_cast<std::size_t>(t) * na);
    oldlp[t] = e.log_prob;
    rew[t] = e.reward;
    done[t] = e.done ? 1 : 0;
  }

  std::vector<double> V(T), VN(T);
  critic_.forward_batch(T, S.data(), V.data());
  critic_.forward_batch(T, SN.data(), VN.data());

  // generalized advantage estimation; done is treated as terminal
  std::vector<double> adv(T), ret(T);
  double acc = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double nonterm = done[t] ? 0.0 : 1.0;
    const double delta = rew[t] + cfg_.gamma * nonterm * VN[t] - V[t];
    acc = delta + cfg_.gamma * cfg_.gae_lambda * nonterm * acc;
    adv[t] = acc;
    ret[t] = adv[t] + V[t];
  }
  if (cfg_.normalize_adv) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= T;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / T);
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  // behavior policy snapshot, for the KL measurement
  std::vector<double> oldM(static_cast<std::size_t>(T) * na);
  actor_.forward_batch(T, S.data(), oldM.data());
  const std::vector<double> old_ls = log_std_;

  const auto measure_kl = [&]() {
    std::vector<double> M(static_cast<std::size_t>(T) * na);
    actor_.forward_batch(T, S.data(), M.data());
    double kl = 0.0;
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < na; ++i) {
        const std::size_t j = static_cast<std::size_t>(t) * na + i;
        const double so2 = std::exp(2.0 * old_ls[i]);
        const double sn2 = std::exp(2.0 * log_std_[i]);
        const double dm = oldM[j] - M[j];
        kl += (log_std_[i] - old_ls[i]) + (so2 + dm * dm) / (2.0 * sn2) - 0.5;
      }
    }
    return kl / T;
  };

  const kernels::Ops& K = kernels::ops();
  std::vector<double> agrads(actor_.param_count());
  std::vector<double> lsgrads(na);
  std::vector<double> cgrads(critic_.param_count());
  std::vector<int> order(T);
  std::iota(order.begin(), order.end(), 0);

  PpoDiag diag;
  double last_kl = 0.0;
  for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
    // actor-side snapshot so an oversized policy step can be undone
    const std::vector<double> actor_snap(actor_.params().begin(),
                                         actor_.params().end());
    const std::vector<double> ls_snap = log_std_;
    const AdamState aadam_snap = actor_adam_;
    const AdamState lsadam_snap = log_std_adam_;

    if (cfg_.batch < T)
      for (int i = 0; i < T - 1; ++i)
        std::swap(order[i], order[i + static_cast<int>(noise_.below(T - i))]);

    double ep_policy_loss = 0.0, ep_value_loss = 0.0;
    int clipped = 0, minibatches = 0;
    for (int start = 0; start < T; start += cfg_.batch) {
      const int B = std::min(cfg_.batch, T - start);
      std::vector<double> Sb(static_cast<std::size_t>(B) * ns);
      std::vector<double> Xb(static_cast<std::size_t>(B) * na);
      std::vector<double> advb(B), retb(B), oldlpb(B);
      for (int j = 0; j < B; ++j) {
        const int t = order[start + j];
        std::copy_n(S.begin() + static_cast<std::size_t>(t) * ns, ns,
                    Sb.begin() + static_cast<std::size_t>(j) * ns);
        std::copy_n(X.begin() + static_cast<std::size_t>(t) * na, na,
                    Xb.begin() + static_cast<std::size_t>(j) * na);
        advb[j] = adv[t];
        retb[j] = ret[t];
        oldlpb[j] = oldlp[t];
      }

      Mlp::Tape atape;
      std::vector<double> M(static_cast<std::size_t>(B) * na);
      actor_.forward_batch(B, Sb.data(), M.data(), atape);
      std::vector<double> dM(static_cast<std::size_t>(B) * na, 0.0);
      std::fill(lsgrads.begin(), lsgrads.end(), 0.0);
      for (int j = 0; j < B; ++j) {
        double lp = 0.0;
        for (int i = 0; i < na; ++i) {
          const std::size_t q = static_cast<std::size_t>(j) * na + i;
          const double z = (Xb[q] - M[q]) / std::exp(log_std_[i]);
          lp += -0.5 * z * z - log_std_[i] - 0.5 * kLog2Pi;
        }
        const double rho = std::exp(lp - oldlpb[j]);
        const double u = rho * advb[j];
        const double v =
            std::clamp(rho, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps) * advb[j];
        const bool unclipped = u <= v;
        const double coef = unclipped ? rho * advb[j] : 0.0;
        ep_policy_loss += -std::min(u, v);
        if (std::abs(rho - 1.0) > cfg_.clip_eps) ++clipped;
        for (int i = 0; i < na; ++i) {
          const std::size_t q = static_cast<std::size_t>(j) * na + i;
          const double s2 = std::exp(2.0 * log_std_[i]);
          const double d = Xb[q] - M[q];
          dM[q] = -(coef / B) * d / s2;
          lsgrads[i] += -(coef / B) * (d * d / s2 - 1.0);
        }
      }
      actor_.backward(atape, dM.data(), agrads);
      // one global-norm clip across the actor net and the log-std head
      if (cfg_.grad_clip > 0.0) {
        const double norm =
            std::sqrt(K.dot(agrads.size(), agrads.data(), agrads.data()) +
                      K.dot(lsgrads.size(), lsgrads.data(), lsgrads.data()));
        if (norm > cfg_.grad_clip) {
          const double sc = cfg_.grad_clip / norm;
          for (double& g : agrads) g *= sc;
          for (double& g : lsgrads) g *= sc;
        }
      }
      adam_step(actor_.params(), agrads, actor_adam_, 0.0);
      adam_step(log_std_, lsgrads, log_std_adam_, 0.0);
      for (double& ls : log_std_)
        ls = std::clamp(ls, cfg_.log_std_min, cfg_.log_std_max);

      Mlp::Tape ctape;
      std::vector<double> Vb(B);
      critic_.forward_batch(B, Sb.data(), Vb.data(), ctape);
      std::vector<double> dV(B);
      double vloss = 0.0;
      for (int j = 0; j < B; ++j) {
        const double err = Vb[j] - retb[j];
        vloss += err * err;
        dV[j] = 2.0 * err / B;
      }
      critic_.backward(ctape, dV.data(), cgrads);
      adam_step(critic_.params(), cgrads, critic_adam_, cfg_.grad_clip);

      ep_value_loss += vloss / B;
      ++minibatches;
    }

    diag.policy_loss = ep_policy_loss / T;
    diag.value_loss = ep_value_loss / minibatches;
    diag.clip_fraction = static_cast<double>(clipped) / T;

    const double kl = measure_kl();
    if (kl > 2.0 * cfg_.target_kl) {
      std::copy(actor_snap.begin(), actor_snap.end(), actor_.params().begin());
      log_std_ = ls_snap;
      actor_adam_ = aadam_snap;
      log_std_adam_ = lsadam_snap;
      diag.rolled_back = true;
      diag.kl = last_kl;
      break;
    }
    last_kl = kl;
    diag.kl = kl;
    diag.epochs_run = epoch + 1;
    if (kl > 1.5 * cfg_.target_kl) break;
  }
  return diag;
}

void PpoAgent::save(Checkpoint& ck) const {
  ck.i64["algo"] = {0};  // 0 = on-policy agent
  save_mlp(ck, "ppo/actor", actor_);
  save_mlp(ck, "ppo/critic", critic_);
  ck.f64["ppo/log_std"] = log_std_;
  save_adam(ck, "ppo/actor_adam", actor_adam_);
  save_adam(ck, "ppo/critic_adam", critic_adam_);
  save_adam(ck, "ppo/log_std_adam", log_std_adam_);
  ck.f64["ppo/cfg_f"] = {cfg_.lr,           cfg_.clip_eps,
                         cfg_.target_kl,    cfg_.grad_clip,
                         cfg_.gamma,        cfg_.gae_lambda,
                         cfg_.init_log_std, cfg_.log_std_min,
                         cfg_.log_std_max,  cfg_.state_scale};
  ck.i64["ppo/cfg_i"] = {cfg_.epochs_per_update, cfg_.batch, cfg_.rollout,
                         cfg_.normalize_adv ? 1 : 0, cfg_.hidden,
                         cfg_.hidden_layers};
}

PpoAgent PpoAgent::load(const Checkpoint& ck, const LoadModel& lm) {
  const auto fi = ck.f64.find("ppo/cfg_f");
  const auto ii = ck.i64.find("ppo/cfg_i");
  const auto li = ck.f64.find("ppo/log_std");
  if (fi == ck.f64.end() || ii == ck.i64.end() || li == ck.f64.end())
    throw std::runtime_error("checkpoint: missing on-policy agent entries");
  PpoConfig cfg;
  const std::vector<double>& f = fi->second;
  const std::vector<std::int64_t>& ic = ii->second;
  if (f.size() != 10 || ic.size() != 6)
    throw std::runtime_error("checkpoint: bad agent config entries");
  cfg.lr = f[0];
  cfg.clip_eps = f[1];
  cfg.target_kl = f[2];
  cfg.grad_clip = f[3];
  cfg.gamma = f[4];
  cfg.gae_lambda = f[5];
  cfg.init_log_std = f[6];
  cfg.log_std_min = f[7];
  cfg.log_std_max = f[8];
  cfg.state_scale = f[9];
  cfg.epochs_per_update = static_cast<int>(ic[0]);
  cfg.batch = static_cast<int>(ic[1]);
  cfg.rollout = static_cast<int>(ic[2]);
  cfg.normalize_adv = ic[3] != 0;
  cfg.hidden = static_cast<int>(ic[4]);
  cfg.hidden_layers = static_cast<int>(ic[5]);

  PpoAgent agent(lm, cfg);
  agent.actor_ = load_mlp(ck, "ppo/actor");
  agent.critic_ = load_mlp(ck, "ppo/critic");
  agent.log_std_ = li->second;
  agent.actor_adam_ = load_adam(ck, "ppo/actor_adam");
  agent.critic_adam_ = load_adam(ck, "ppo/critic_adam");
  agent.log_std_adam_ = load_adam(ck, "ppo/log_std_adam");
  if (agent.actor_.input_dim() != lm.n_tunnels() ||
      agent.actor_.output_dim() != lm.n_paths())
    throw std::runtime_error("checkpoint: agent does not match this network");
  return agent;
}

}  // namespace sdwan
