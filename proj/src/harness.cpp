#include "sdwan/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "sdwan/csv.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " +
                                  where);
    }
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void read_traffic(const json& j, TrafficConfig& t) {
  check_keys(j, {"base", "amplitude", "period", "noise_sd", "phases", "seed"},
             "traffic");
  read_if(j, "base", t.base);
  read_if(j, "amplitude", t.amplitude);
  read_if(j, "period", t.period);
  read_if(j, "noise_sd", t.noise_sd);
  read_if(j, "phases", t.phases);
  read_if(j, "seed", t.seed);
}

json traffic_to_json(const TrafficConfig& t) {
  return json{{"base", t.base},         {"amplitude", t.amplitude},
              {"period", t.period},     {"noise_sd", t.noise_sd},
              {"phases", t.phases},     {"seed", t.seed}};
}

void read_cbf(const json& j, CbfConfig& c) {
  check_keys(j,
             {"policy", "radius", "candidates_per_iter", "max_iters",
              "delta_util_threshold", "mlu_threshold", "workers", "seed"},
             "cbf");
  if (auto it = j.find("policy"); it != j.end()) {
    const std::string s = it->get<std::string>();
    auto p = policy_from_string(s);
    if (!p) throw std::invalid_argument("config: unknown cbf policy '" + s + "'");
    c.policy = *p;
  }
  read_if(j, "radius", c.radius);
  read_if(j, "candidates_per_iter", c.candidates_per_iter);
  read_if(j, "max_iters", c.max_iters);
  read_if(j, "delta_util_threshold", c.delta_util_threshold);
  read_if(j, "mlu_threshold", c.mlu_threshold);
  read_if(j, "workers", c.workers);
  read_if(j, "seed", c.seed);
}

json cbf_to_json(const CbfConfig& c) {
  return json{{"policy", to_string(c.policy)},
              {"radius", c.radius},
              {"candidates_per_iter", c.candidates_per_iter},
              {"max_iters", c.max_iters},
              {"delta_util_threshold", c.delta_util_threshold},
              {"mlu_threshold", c.mlu_threshold},
              {"workers", c.workers},
              {"seed", c.seed}};
}

void read_ppo(const json& j, PpoConfig& p) {
  check_keys(j,
             {"lr", "clip_eps", "target_kl", "grad_clip", "gamma", "gae_lambda",
              "epochs_per_update", "batch", "rollout", "normalize_adv",
              "init_log_std", "log_std_min", "log_std_max", "hidden",
              "hidden_layers", "state_scale"},
             "ppo");
  read_if(j, "lr", p.lr);
  read_if(j, "clip_eps", p.clip_eps);
  read_if(j, "target_kl", p.target_kl);
  read_if(j, "grad_clip", p.grad_clip);
  read_if(j, "gamma", p.gamma);
  read_if(j, "gae_lambda", p.gae_lambda);
  read_if(j, "epochs_per_update", p.epochs_per_update);
  read_if(j, "batch", p.batch);
  read_if(j, "rollout", p.rollout);
  read_if(j, "normalize_adv", p.normalize_adv);
  read_if(j, "init_log_std", p.init_log_std);
  read_if(j, "log_std_min", p.log_std_min);
  read_if(j, "log_std_max", p.log_std_max);
  read_if(j, "hidden", p.hidden);
  read_if(j, "hidden_layers", p.hidden_layers);
  read_if(j, "state_scale", p.state_scale);
}

json ppo_to_json(const PpoConfig& p) {
  return json{{"lr", p.lr},
              {"clip_eps", p.clip_eps},
              {"target_kl", p.target_kl},
              {"grad_clip", p.grad_clip},
              {"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"epochs_per_update", p.epochs_per_update},
              {"batch", p.batch},
              {"rollout", p.rollout},
              {"normalize_adv", p.normalize_adv},
              {"init_log_std", p.init_log_std},
              {"log_std_min", p.log_std_min},
              {"log_std_max", p.log_std_max},
              {"hidden", p.hidden},
              {"hidden_layers", p.hidden_layers},
              {"state_scale", p.state_scale}};
}

void read_ddpg(const json& j, DdpgConfig& d) {
  check_keys(j,
             {"lr_actor", "lr_critic", "tau", "gamma", "grad_clip",
              "buffer_capacity", "batch", "updates_per_cycle", "expl_sd_start",
              "expl_sd_end", "expl_anneal_steps", "hidden", "hidden_layers",
              "state_scale"},
             "ddpg");
  read_if(j, "lr_actor", d.lr_actor);
  read_if(j, "lr_critic", d.lr_critic);
  read_if(j, "tau", d.tau);
  read_if(j, "gamma", d.gamma);
  read_if(j, "grad_clip", d.grad_clip);
  read_if(j, "buffer_capacity", d.buffer_capacity);
  read_if(j, "batch", d.batch);
  read_if(j, "updates_per_cycle", d.updates_per_cycle);
  read_if(j, "expl_sd_start", d.expl_sd_start);
  read_if(j, "expl_sd_end", d.expl_sd_end);
  read_if(j, "expl_anneal_steps", d.expl_anneal_steps);
  read_if(j, "hidden", d.hidden);
  read_if(j, "hidden_layers", d.hidden_layers);
  read_if(j, "state_scale", d.state_scale);
}

json ddpg_to_json(const DdpgConfig& d) {
  return json{{"lr_actor", d.lr_actor},
              {"lr_critic", d.lr_critic},
              {"tau", d.tau},
              {"gamma", d.gamma},
              {"grad_clip", d.grad_clip},
              {"buffer_capacity", d.buffer_capacity},
              {"batch", d.batch},
              {"updates_per_cycle", d.updates_per_cycle},
              {"expl_sd_start", d.expl_sd_start},
              {"expl_sd_end", d.expl_sd_end},
              {"expl_anneal_steps", d.expl_anneal_steps},
              {"hidden", d.hidden},
              {"hidden_layers", d.hidden_layers},
              {"state_scale", d.state_scale}};
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  int idx = static_cast<int>(std::ceil(q * n)) - 1;  // nearest-rank
  idx = std::clamp(idx, 0, n - 1);
  return v[static_cast<std::size_t>(idx)];
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error("csv: missing column '" + name + "'");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.header.size()) {
      throw std::runtime_error("csv: ragged row in " + path);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

const char* to_string(Algo a) { return a == Algo::kPpo ? "ppo" : "ddpg"; }

std::optional<Algo> algo_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ppo") return Algo::kPpo;
  if (lower == "ddpg") return Algo::kDdpg;
  return std::nullopt;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.topology_path.empty()) {
    if (cfg.branches < 1) throw std::invalid_argument("config: branches must be >= 1");
    if (cfg.internet_capacity <= 0.0 || cfg.mpls_capacity <= 0.0) {
      throw std::invalid_argument("config: capacities must be positive");
    }
    if (cfg.prop_delay < 0.0) {
      throw std::invalid_argument("config: prop_delay must be >= 0");
    }
  }
  if (cfg.reward.sigma < 0.0 || cfg.reward.sigma > 1.0) {
    throw std::invalid_argument("config: sigma must be in [0, 1]");
  }
  if (cfg.total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
  if (cfg.episode_len < 1) throw std::invalid_argument("config: episode_len must be >= 1");
  if (cfg.update_every < 1) throw std::invalid_argument("config: update_every must be >= 1");
  if (cfg.total_steps < cfg.update_every) {
    throw std::invalid_argument("config: total_steps must be >= update_every");
  }
  if (cfg.eval_trace_len < 1) {
    throw std::invalid_argument("config: eval_trace_len must be >= 1");
  }
  if (cfg.checkpoint_every < 0) {
    throw std::invalid_argument("config: checkpoint_every must be >= 0");
  }
  if (cfg.out_dir.empty()) {
    throw std::invalid_argument("config: out_dir must be non-empty");
  }
  if (cfg.cbf_enabled) validate_config(cfg.cbf);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  in >> j;
  check_keys(j,
             {"topology_path", "branches", "internet_capacity", "mpls_capacity",
              "prop_delay", "sigma", "algo", "cbf_enabled", "total_steps",
              "episode_len", "update_every", "eval_trace_len",
              "checkpoint_every", "seed", "out_dir", "traffic", "cbf", "ppo",
              "ddpg"},
             "top level");
  RunConfig cfg;
  read_if(j, "topology_path", cfg.topology_path);
  read_if(j, "branches", cfg.branches);
  read_if(j, "internet_capacity", cfg.internet_capacity);
  read_if(j, "mpls_capacity", cfg.mpls_capacity);
  read_if(j, "prop_delay", cfg.prop_delay);
  read_if(j, "sigma", cfg.reward.sigma);
  if (auto it = j.find("algo"); it != j.end()) {
    const std::string s = it->get<std::string>();
    auto a = algo_from_string(s);
    if (!a) throw std::invalid_argument("config: unknown algo '" + s + "'");
    cfg.algo = *a;
  }
  read_if(j, "cbf_enabled", cfg.cbf_enabled);
  read_if(j, "total_steps", cfg.total_steps);
  read_if(j, "episode_len", cfg.episode_len);
  read_if(j, "update_every", cfg.update_every);
  read_if(j, "eval_trace_len", cfg.eval_trace_len);
  read_if(j, "checkpoint_every", cfg.checkpoint_every);
  read_if(j, "seed", cfg.seed);
  read_if(j, "out_dir", cfg.out_dir);
  if (auto it = j.find("traffic"); it != j.end()) read_traffic(*it, cfg.traffic);
  if (auto it = j.find("cbf"); it != j.end()) read_cbf(*it, cfg.cbf);
  if (auto it = j.find("ppo"); it != j.end()) read_ppo(*it, cfg.ppo);
  if (auto it = j.find("ddpg"); it != j.end()) read_ddpg(*it, cfg.ddpg);
  validate_config(cfg);
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  json j{{"topology_path", cfg.topology_path},
         {"branches", cfg.branches},
         {"internet_capacity", cfg.internet_capacity},
         {"mpls_capacity", cfg.mpls_capacity},
         {"prop_delay", cfg.prop_delay},
         {"sigma", cfg.reward.sigma},
         {"algo", to_string(cfg.algo)},
         {"cbf_enabled", cfg.cbf_enabled},
         {"total_steps", cfg.total_steps},
         {"episode_len", cfg.episode_len},
         {"update_every", cfg.update_every},
         {"eval_trace_len", cfg.eval_trace_len},
         {"checkpoint_every", cfg.checkpoint_every},
         {"seed", cfg.seed},
         {"out_dir", cfg.out_dir},
         {"traffic", traffic_to_json(cfg.traffic)},
         {"cbf", cbf_to_json(cfg.cbf)},
         {"ppo", ppo_to_json(cfg.ppo)},
         {"ddpg", ddpg_to_json(cfg.ddpg)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << j.dump(2) << '\n';
}

OverlayNetwork network_from_config(const RunConfig& cfg) {
  if (!cfg.topology_path.empty()) return load_topology(cfg.topology_path);
  return build_hub_spoke(cfg.branches, cfg.internet_capacity, cfg.mpls_capacity,
                         cfg.prop_delay);
}

std::vector<DemandVector> make_eval_trace(const RunConfig& cfg) {
  OverlayNetwork net = network_from_config(cfg);
  TrafficConfig tc = cfg.traffic;
  tc.seed = mix64(cfg.traffic.seed, 0x7e57ULL);  // decorrelate from training noise
  return generate_trace(tc, static_cast<int>(net.tunnels.size()), 0,
                        cfg.eval_trace_len);
}

ActResult AgentHandle::act(const DemandVector& state, bool explore) {
  return std::visit([&](auto& a) { return a.act(state, explore); }, agent_);
}

void AgentHandle::save(Checkpoint& ck) const {
  std::visit([&](const auto& a) { a.save(ck); }, agent_);
}

void AgentHandle::save_file(const std::string& path) const {
  Checkpoint ck;
  save(ck);
  ck.save(path);
}

AgentHandle AgentHandle::load(const Checkpoint& ck, const LoadModel& lm) {
  auto it = ck.i64.find("algo");
  if (it == ck.i64.end() || it->second.size() != 1) {
    throw std::runtime_error("checkpoint: missing algo tag");
  }
  switch (it->second[0]) {
    case 0:
      return AgentHandle(PpoAgent::load(ck, lm));
    case 1:
      return AgentHandle(DdpgAgent::load(ck, lm));
    default:
      throw std::runtime_error("checkpoint: unknown algo tag");
  }
}

AgentHandle AgentHandle::load_file(const std::string& path, const LoadModel& lm) {
  return load(Checkpoint::load(path), lm);
}

TrainResult train(const RunConfig& cfg) {
  validate_config(cfg);

  RunConfig eff = cfg;
  // PPO consumes exactly one rollout per update cycle.
  eff.ppo.rollout = cfg.update_every;

  const OverlayNetwork net = network_from_config(eff);
  SdwanEnv env(net, eff.traffic, eff.reward, eff.episode_len, 0);
  const LoadModel& lm = env.model();

  std::filesystem::create_directories(eff.out_dir);
  save_run_config(eff, join_path(eff.out_dir, "config.json"));

  AgentHandle agent =
      eff.algo == Algo::kPpo
          ? AgentHandle(PpoAgent(lm, eff.ppo, mix64(eff.seed, 1)))
          : AgentHandle(DdpgAgent(lm, eff.ddpg, mix64(eff.seed, 2)));

  ReplayBuffer replay(eff.ddpg.buffer_capacity);  // DDPG only
  std::vector<Experience> rollout;                // PPO only
  rollout.reserve(static_cast<std::size_t>(eff.update_every));

  std::ofstream steps_csv(join_path(eff.out_dir, "steps.csv"));
  std::ofstream episodes_csv(join_path(eff.out_dir, "episodes.csv"));
  std::ofstream updates_csv(join_path(eff.out_dir, "updates.csv"));
  if (!steps_csv || !episodes_csv || !updates_csv) {
    throw std::runtime_error("train: cannot create metrics files in " + eff.out_dir);
  }
  steps_csv << "step,t,reward,avg_delay,mlu,acceptance,proto_mlu,was_safe,"
               "feasible_found,l1_distance,candidates\n";
  episodes_csv << "episode,mean_reward,mean_delay,mean_mlu,acceptance,"
                  "cbf_fallbacks\n";
  if (eff.algo == Algo::kPpo) {
    updates_csv << "update,step,policy_loss,value_loss,kl,clip_fraction,epochs,"
                   "rolled_back\n";
  } else {
    updates_csv << "update,step,critic_loss,actor_q\n";
  }

  const std::uint64_t cbf_base = mix64(eff.seed, mix64(eff.cbf.seed, 0xcbfULL));

  TrainResult res;
  // Episode accumulators. Acceptance is the ratio of two sums built from the
  // same per-flow doubles, so a fully admitted episode lands on exactly 1.0.
  double ep_reward = 0.0, ep_delay = 0.0, ep_mlu = 0.0;
  double ep_offered = 0.0, ep_admitted = 0.0;
  std::int64_t ep_fallbacks = 0;
  int ep_steps = 0;

  auto flush_episode = [&]() {
    if (ep_steps == 0) return;
    EpisodeRecord rec;
    rec.episode = res.episodes;
    rec.mean_reward = ep_reward / ep_steps;
    rec.mean_delay = ep_delay / ep_steps;
    rec.mean_mlu = ep_mlu / ep_steps;
    rec.acceptance =
        ep_offered > 0.0 ? std::min(1.0, ep_admitted / ep_offered) : 1.0;
    rec.cbf_fallbacks = ep_fallbacks;
    res.episode_records.push_back(rec);
    episodes_csv << rec.episode << ',' << csv::fmt(rec.mean_reward) << ','
                 << csv::fmt(rec.mean_delay) << ',' << csv::fmt(rec.mean_mlu)
                 << ',' << csv::fmt(rec.acceptance) << ',' << rec.cbf_fallbacks
                 << '\n';
    episodes_csv.flush();
    steps_csv.flush();
    ++res.episodes;
    ep_reward = ep_delay = ep_mlu = ep_offered = ep_admitted = 0.0;
    ep_fallbacks = 0;
    ep_steps = 0;
  };

  for (std::int64_t step = 0; step < eff.total_steps; ++step) {
    const DemandVector state = env.demand();
    ActResult ar = agent.act(state, /*explore=*/true);

    SplitAction deployed = ar.action;
    bool feasible = true;
    bool was_safe = true;
    double l1 = 0.0;
    std::int64_t cands = 0;
    const double proto_mlu = mlu(lm, state, ar.action);
    if (eff.cbf_enabled) {
      CbfConfig c = eff.cbf;
      c.seed = mix64(cbf_base, static_cast<std::uint64_t>(step));
      ProjectionResult pr = project(lm, state, ar.action, c);
      deployed = std::move(pr.action);
      feasible = pr.feasible_found;
      was_safe = pr.was_safe_input;
      l1 = pr.l1_distance;
      cands = pr.candidates_evaluated;
    }

    const std::vector<double> offered_tp = offered_tp_rates(lm, state, deployed);
    SdwanEnv::StepResult sr = env.step(deployed);
    const StepOutcome& o = sr.outcome;

    if (eff.cbf_enabled) {
      if (!feasible) {
        ++res.fallback_steps;
        ++ep_fallbacks;
      } else if (o.mlu > 1.0) {
        ++res.unsafe_deployed_steps;
      }
    }

    Experience e;
    e.state = state;
    e.deployed_action = deployed;
    e.raw_action = ar.action;
    e.raw_logits = ar.logits;
    e.log_prob = ar.log_prob;
    e.reward = o.reward;
    e.next_state = sr.next;
    e.done = sr.done;

    if (eff.algo == Algo::kPpo) {
      rollout.push_back(std::move(e));
      if (static_cast<int>(rollout.size()) == eff.update_every) {
        PpoDiag d = agent.ppo()->update(rollout);
        rollout.clear();
        updates_csv << res.updates << ',' << (step + 1) << ','
                    << csv::fmt(d.policy_loss) << ',' << csv::fmt(d.value_loss)
                    << ',' << csv::fmt(d.kl) << ',' << csv::fmt(d.clip_fraction)
                    << ',' << d.epochs_run << ',' << (d.rolled_back ? 1 : 0)
                    << '\n';
        updates_csv.flush();
        ++res.updates;
      }
    } else {
      replay.push(std::move(e));
      if ((step + 1) % eff.update_every == 0 && replay.size() >= eff.ddpg.batch) {
        for (int u = 0; u < eff.ddpg.updates_per_cycle; ++u) {
          DdpgDiag d = agent.ddpg()->update(replay);
          updates_csv << res.updates << ',' << (step + 1) << ','
                      << csv::fmt(d.critic_loss) << ',' << csv::fmt(d.actor_q)
                      << '\n';
        }
        updates_csv.flush();
        ++res.updates;
      }
    }

    steps_csv << step << ',' << state.t << ',' << csv::fmt(o.reward) << ','
              << csv::fmt(o.avg_delay) << ',' << csv::fmt(o.mlu) << ','
              << csv::fmt(o.acceptance) << ',' << csv::fmt(proto_mlu) << ','
              << (was_safe ? 1 : 0) << ',' << (feasible ? 1 : 0) << ','
              << csv::fmt(l1) << ',' << cands << '\n';

    ep_reward += o.reward;
    ep_delay += o.avg_delay;
    ep_mlu += o.mlu;
    ep_offered += std::accumulate(offered_tp.begin(), offered_tp.end(), 0.0);
    ep_admitted +=
        std::accumulate(o.admitted_rate.begin(), o.admitted_rate.end(), 0.0);
    ++ep_steps;
    ++res.steps;

    if (sr.done) flush_episode();

    if (eff.checkpoint_every > 0 && (step + 1) % eff.checkpoint_every == 0 &&
        step + 1 < eff.total_steps) {
      agent.save_file(
          join_path(eff.out_dir, "ckpt_" + std::to_string(step + 1) + ".bin"));
    }
  }
  flush_episode();  // partial tail episode, if any

  res.checkpoint_path = join_path(eff.out_dir, "final.bin");
  agent.save_file(res.checkpoint_path);

  json summary{{"algo", to_string(eff.algo)},
               {"seed", eff.seed},
               {"steps", res.steps},
               {"updates", res.updates},
               {"episodes", res.episodes},
               {"fallback_steps", res.fallback_steps},
               {"unsafe_deployed_steps", res.unsafe_deployed_steps},
               {"checkpoint", res.checkpoint_path},
               {"last_episode_mean_reward",
                res.episode_records.empty()
                    ? 0.0
                    : res.episode_records.back().mean_reward}};
  std::ofstream sum(join_path(eff.out_dir, "run_summary.json"));
  sum << summary.dump(2) << '\n';

  return res;
}

EvalResult evaluate(const OverlayNetwork& net, AgentHandle& agent,
                    const std::vector<DemandVector>& trace,
                    const RewardConfig& reward_cfg, bool cbf_enabled,
                    const CbfConfig& cbf, const std::string& out_csv) {
  if (trace.empty()) throw std::invalid_argument("evaluate: empty trace");
  const LoadModel lm(net);
  const std::uint64_t cbf_base = mix64(cbf.seed, 0xe7a1ULL);

  EvalResult res;
  res.rows.reserve(trace.size());
  std::vector<double> delays;
  delays.reserve(trace.size());
  double sum_delay = 0.0, sum_reward = 0.0;

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const DemandVector& d = trace[i];
    ActResult ar = agent.act(d, /*explore=*/false);
    SplitAction deployed = ar.action;
    bool feasible = true;
    if (cbf_enabled) {
      CbfConfig c = cbf;
      c.seed = mix64(cbf_base, static_cast<std::uint64_t>(i));
      ProjectionResult pr = project(lm, d, ar.action, c);
      deployed = std::move(pr.action);
      feasible = pr.feasible_found;
    }
    const StepOutcome o = evaluate_step(lm, d, deployed, reward_cfg);

    EvalRow row;
    row.sample = static_cast<int>(i);
    row.avg_delay = o.avg_delay;
    row.mlu = o.mlu;
    row.acceptance = o.acceptance;
    row.reward = o.reward;
    row.feasible_found = feasible;
    res.rows.push_back(row);

    delays.push_back(o.avg_delay);
    sum_delay += o.avg_delay;
    sum_reward += o.reward;
    res.summary.max_mlu = std::max(res.summary.max_mlu, o.mlu);
    res.summary.min_acceptance = std::min(res.summary.min_acceptance, o.acceptance);
    if (cbf_enabled) {
      if (!feasible) {
        ++res.summary.fallback_steps;
      } else if (o.mlu > 1.0) {
        ++res.summary.unsafe_steps;
      }
    }
  }

  const double n = static_cast<double>(trace.size());
  res.summary.mean_delay = sum_delay / n;
  res.summary.mean_reward = sum_reward / n;
  res.summary.p50_delay = percentile(delays, 0.50);
  res.summary.p95_delay = percentile(delays, 0.95);

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("evaluate: cannot write " + out_csv);
    out << "sample,avg_delay,mlu,acceptance,reward,feasible_found\n";
    for (const EvalRow& r : res.rows) {
      out << r.sample << ',' << csv::fmt(r.avg_delay) << ',' << csv::fmt(r.mlu)
          << ',' << csv::fmt(r.acceptance) << ',' << csv::fmt(r.reward) << ','
          << (r.feasible_found ? 1 : 0) << '\n';
    }
  }
  return res;
}

CompareResult compare_delays(const std::string& eval_csv,
                             const std::string& baseline_csv,
                             const std::string& out_csv) {
  const CsvTable a = read_csv(eval_csv);
  const CsvTable b = read_csv(baseline_csv);
  if (a.rows.size() != b.rows.size()) {
    throw std::runtime_error("compare: row count mismatch (" +
                             std::to_string(a.rows.size()) + " vs " +
                             std::to_string(b.rows.size()) + ")");
  }
  if (a.rows.empty()) throw std::runtime_error("compare: no samples");
  const int as = a.column("sample"), ad = a.column("avg_delay");
  const int bs = b.column("sample"), bd = b.column("avg_delay");

  CompareResult res;
  res.gap.reserve(a.rows.size());
  double sum_gap = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i][static_cast<std::size_t>(as)] !=
        b.rows[i][static_cast<std::size_t>(bs)]) {
      throw std::runtime_error("compare: misaligned sample indexes at row " +
                               std::to_string(i));
    }
    const double da = a.rows[i][static_cast<std::size_t>(ad)];
    const double db = b.rows[i][static_cast<std::size_t>(bd)];
    if (db <= 0.0) throw std::runtime_error("compare: baseline delay must be positive");
    const double g = (da - db) / db;
    res.gap.push_back(g);
    sum_gap += g;
    sum_a += da;
    sum_b += db;
  }
  const double n = static_cast<double>(a.rows.size());
  res.mean_gap = sum_gap / n;
  res.agent_mean_delay = sum_a / n;
  res.baseline_mean_delay = sum_b / n;

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("compare: cannot write " + out_csv);
    out << "sample,agent_delay,baseline_delay,gap\n";
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      out << a.rows[i][static_cast<std::size_t>(as)] << ','
          << csv::fmt(a.rows[i][static_cast<std::size_t>(ad)]) << ','
          << csv::fmt(b.rows[i][static_cast<std::size_t>(bd)]) << ','
          << csv::fmt(res.gap[i]) << '\n';
    }
  }
  return res;
}

}  // namespace sdwan
