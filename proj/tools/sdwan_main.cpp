// Command-line front end: train agents, evaluate checkpoints, run the static
// baseline, generate demand traces, and compare result files.
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdwan/baseline.hpp"
#include "sdwan/csv.hpp"
#include "sdwan/harness.hpp"
#include "sdwan/kernels.hpp"
#include "sdwan/rng.hpp"

namespace {

using nlohmann::json;

// Flags shared by train/eval/baseline; only values the user actually passed
// override the config file.
struct CommonFlags {
  CLI::Option* config = nullptr;
  CLI::Option* topology = nullptr;
  CLI::Option* algo = nullptr;
  CLI::Option* steps = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* sigma = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* episode_len = nullptr;
  CLI::Option* update_every = nullptr;
  CLI::Option* checkpoint_every = nullptr;
  CLI::Option* cbf_policy = nullptr;
  CLI::Option* cbf_radius = nullptr;
  CLI::Option* cbf_candidates = nullptr;
  CLI::Option* cbf_iters = nullptr;
  CLI::Option* cbf_workers = nullptr;

  std::string config_path, topology_path, algo_name, out_dir, cbf_policy_name;
  std::int64_t total_steps = 0, checkpoint_every_v = 0;
  std::uint64_t seed_v = 0;
  double sigma_v = 0.0, cbf_radius_v = 0.0;
  int episode_len_v = 0, update_every_v = 0;
  int cbf_candidates_v = 0, cbf_iters_v = 0, cbf_workers_v = 0;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
  f.config = sub->add_option("--config", f.config_path,
                             "JSON run config file (flags override it)");
  f.topology = sub->add_option("--topology", f.topology_path,
                               "Topology JSON file (default: built-in hub-spoke)");
  f.algo = sub->add_option("--algo", f.algo_name, "Algorithm: ppo | ddpg");
  f.steps = sub->add_option("--steps", f.total_steps, "Total training steps");
  f.seed = sub->add_option("--seed", f.seed_v, "Run seed");
  f.sigma = sub->add_option("--sigma", f.sigma_v,
                            "Reward weight on delay vs utilization, in [0,1]");
  f.out = sub->add_option("--out", f.out_dir, "Output directory (or file)");
  f.episode_len = sub->add_option("--episode-len", f.episode_len_v, "Steps per episode");
  f.update_every =
      sub->add_option("--update-every", f.update_every_v, "Steps between agent updates");
  f.checkpoint_every = sub->add_option("--checkpoint-every", f.checkpoint_every_v,
                                       "Steps between checkpoints (0 = final only)");
  f.cbf_policy = sub->add_option(
      "--cbf-policy", f.cbf_policy_name,
      "Safety filter candidate policy: naive | deltautil | maxutil | off");
  f.cbf_radius = sub->add_option("--cbf-radius", f.cbf_radius_v,
                                 "Max per-candidate split perturbation");
  f.cbf_candidates =
      sub->add_option("--cbf-candidates", f.cbf_candidates_v, "Candidates per iteration");
  f.cbf_iters = sub->add_option("--cbf-iters", f.cbf_iters_v, "Max search iterations");
  f.cbf_workers =
      sub->add_option("--cbf-workers", f.cbf_workers_v, "Candidate evaluation threads");
}

sdwan::RunConfig build_config(const CommonFlags& f) {
  sdwan::RunConfig cfg;
  if (*f.config) cfg = sdwan::load_run_config(f.config_path);
  if (*f.topology) cfg.topology_path = f.topology_path;
  if (*f.algo) {
    auto a = sdwan::algo_from_string(f.algo_name);
    if (!a) throw CLI::ValidationError("--algo", "unknown algorithm '" + f.algo_name + "'");
    cfg.algo = *a;
  }
  if (*f.steps) cfg.total_steps = f.total_steps;
  if (*f.seed) cfg.seed = f.seed_v;
  if (*f.sigma) cfg.reward.sigma = f.sigma_v;
  if (*f.out) cfg.out_dir = f.out_dir;
  if (*f.episode_len) cfg.episode_len = f.episode_len_v;
  if (*f.update_every) cfg.update_every = f.update_every_v;
  if (*f.checkpoint_every) cfg.checkpoint_every = f.checkpoint_every_v;
  if (*f.cbf_policy) {
    if (f.cbf_policy_name == "off") {
      cfg.cbf_enabled = false;
    } else {
      auto p = sdwan::policy_from_string(f.cbf_policy_name);
      if (!p) {
        throw CLI::ValidationError("--cbf-policy",
                                   "unknown policy '" + f.cbf_policy_name + "'");
      }
      cfg.cbf_enabled = true;
      cfg.cbf.policy = *p;
    }
  }
  if (*f.cbf_radius) cfg.cbf.radius = f.cbf_radius_v;
  if (*f.cbf_candidates) cfg.cbf.candidates_per_iter = f.cbf_candidates_v;
  if (*f.cbf_iters) cfg.cbf.max_iters = f.cbf_iters_v;
  if (*f.cbf_workers) cfg.cbf.workers = f.cbf_workers_v;
  return cfg;
}

int cmd_train(const CommonFlags& f) {
  sdwan::RunConfig cfg = build_config(f);
  sdwan::TrainResult res = sdwan::train(cfg);
  std::cout << "steps=" << res.steps << " episodes=" << res.episodes
            << " updates=" << res.updates
            << " cbf_fallback_steps=" << res.fallback_steps
            << " unsafe_deployed_steps=" << res.unsafe_deployed_steps << '\n'
            << "checkpoint=" << res.checkpoint_path << '\n';
  if (!res.episode_records.empty()) {
    const sdwan::EpisodeRecord& last = res.episode_records.back();
    std::cout << "last_episode_mean_reward=" << sdwan::csv::fmt(last.mean_reward)
              << " acceptance=" << sdwan::csv::fmt(last.acceptance) << '\n';
  }
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& load_path,
             const std::string& trace_path, const std::string& out_csv) {
  sdwan::RunConfig cfg = build_config(f);
  const sdwan::OverlayNetwork net = sdwan::network_from_config(cfg);
  const sdwan::LoadModel lm(net);
  sdwan::AgentHandle agent = sdwan::AgentHandle::load_file(load_path, lm);

  std::vector<sdwan::DemandVector> trace;
  if (!trace_path.empty()) {
    trace = sdwan::load_trace_csv(trace_path);
    for (const sdwan::DemandVector& d : trace) {
      if (static_cast<int>(d.demands.size()) != lm.n_tunnels()) {
        throw std::runtime_error("trace tunnel count does not match topology");
      }
    }
  } else {
    trace = sdwan::make_eval_trace(cfg);
  }

  sdwan::EvalResult res = sdwan::evaluate(net, agent, trace, cfg.reward,
                                          cfg.cbf_enabled, cfg.cbf, out_csv);
  json summary{{"samples", res.rows.size()},
               {"mean_delay", res.summary.mean_delay},
               {"p50_delay", res.summary.p50_delay},
               {"p95_delay", res.summary.p95_delay},
               {"max_mlu", res.summary.max_mlu},
               {"mean_reward", res.summary.mean_reward},
               {"min_acceptance", res.summary.min_acceptance},
               {"fallback_steps", res.summary.fallback_steps},
               {"unsafe_steps", res.summary.unsafe_steps}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_baseline(const CommonFlags& f, const std::string& trace_path,
                 const std::string& out_csv, const sdwan::BaselineConfig& bcfg_in) {
  sdwan::RunConfig cfg = build_config(f);
  const sdwan::OverlayNetwork net = sdwan::network_from_config(cfg);
  const sdwan::LoadModel lm(net);

  std::vector<sdwan::DemandVector> trace;
  if (!trace_path.empty()) {
    trace = sdwan::load_trace_csv(trace_path);
  } else {
    trace = sdwan::make_eval_trace(cfg);
  }

  std::ofstream out;
  if (!out_csv.empty()) {
    out.open(out_csv);
    if (!out) throw std::runtime_error("cannot write " + out_csv);
    out << "sample,avg_delay,mlu,feasible,best_start\n";
  }

  double sum_delay = 0.0;
  int infeasible = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    sdwan::BaselineConfig bc = bcfg_in;
    // Decorrelate restart draws between samples while staying reproducible.
    bc.seed = sdwan::mix64(bcfg_in.seed, static_cast<std::uint64_t>(i));
    const sdwan::BaselineResult r = sdwan::solve(lm, trace[i], bc);
    if (!r.feasible) ++infeasible;
    sum_delay += r.avg_delay;
    if (out) {
      out << i << ',' << sdwan::csv::fmt(r.avg_delay) << ','
          << sdwan::csv::fmt(r.mlu) << ',' << (r.feasible ? 1 : 0) << ','
          << r.best_start << '\n';
    }
  }
  std::cout << "samples=" << trace.size()
            << " mean_delay=" << sdwan::csv::fmt(sum_delay / trace.size())
            << " infeasible=" << infeasible << '\n';
  if (infeasible > 0) {
    std::cerr << "baseline: " << infeasible
              << " sample(s) had no action within the utilization cap\n";
    return 3;
  }
  return 0;
}

int cmd_gen_traffic(const CommonFlags& f, int steps, std::int64_t t0,
                    bool held_out, const std::string& out_path) {
  sdwan::RunConfig cfg = build_config(f);
  const sdwan::OverlayNetwork net = sdwan::network_from_config(cfg);
  sdwan::TrafficConfig tc = cfg.traffic;
  if (*f.seed) tc.seed = cfg.seed;  // --seed names the traffic seed here
  std::vector<sdwan::DemandVector> trace;
  if (held_out) {
    sdwan::RunConfig c2 = cfg;
    c2.traffic = tc;
    c2.eval_trace_len = steps;
    trace = sdwan::make_eval_trace(c2);
  } else {
    trace = sdwan::generate_trace(tc, static_cast<int>(net.tunnels.size()), t0, steps);
  }
  sdwan::save_trace_csv(trace, out_path);
  std::cout << "wrote " << trace.size() << " samples x " << net.tunnels.size()
            << " tunnels to " << out_path << '\n';
  return 0;
}

int cmd_compare(const std::string& eval_csv, const std::string& baseline_csv,
                const std::string& out_csv) {
  const sdwan::CompareResult res =
      sdwan::compare_delays(eval_csv, baseline_csv, out_csv);
  std::cout << "samples=" << res.gap.size()
            << " agent_mean_delay=" << sdwan::csv::fmt(res.agent_mean_delay)
            << " baseline_mean_delay=" << sdwan::csv::fmt(res.baseline_mean_delay)
            << " mean_gap=" << sdwan::csv::fmt(res.mean_gap) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe SD-WAN load balancing: RL agents with a control-barrier "
               "safety filter, static baseline, and traffic tooling"};
  app.require_subcommand(1);

  std::string backend = "auto";
  app.add_option("--backend", backend, "Compute kernels: auto | scalar | avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  CLI::App* train = app.add_subcommand("train", "Train an agent and write metrics");
  CommonFlags tf;
  add_common_flags(train, tf);

  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint on a demand trace");
  CommonFlags ef;
  add_common_flags(eval, ef);
  std::string eval_load, eval_trace, eval_out = "eval.csv";
  eval->add_option("--load", eval_load, "Checkpoint file")->required();
  eval->add_option("--trace", eval_trace,
                   "Demand trace CSV (default: generated held-out trace)");
  eval->add_option("--out-csv", eval_out, "Per-sample output CSV");

  CLI::App* base = app.add_subcommand("baseline", "Static per-sample optimum");
  CommonFlags bf;
  add_common_flags(base, bf);
  std::string base_trace, base_out = "baseline.csv";
  sdwan::BaselineConfig bcfg;
  base->add_option("--trace", base_trace,
                   "Demand trace CSV (default: generated held-out trace)");
  base->add_option("--out-csv", base_out, "Per-sample output CSV");
  base->add_option("--mlu-target", bcfg.mlu_target, "Utilization cap");
  base->add_option("--restarts", bcfg.restarts, "Random restarts per sample");
  base->add_option("--iters", bcfg.max_iters, "Descent iterations per start");
  base->add_option("--workers", bcfg.workers, "Parallel starts");
  CLI::Option* base_seed = base->add_option("--solver-seed", bcfg.seed, "Restart seed");
  (void)base_seed;

  CLI::App* gen = app.add_subcommand("gen-traffic", "Write a demand trace CSV");
  CommonFlags gf;
  add_common_flags(gen, gf);
  int gen_steps = 100;
  std::int64_t gen_t0 = 0;
  bool gen_held_out = false;
  std::string gen_out = "trace.csv";
  gen->add_option("--trace-steps", gen_steps, "Number of samples");
  gen->add_option("--t0", gen_t0, "Starting global step");
  gen->add_flag("--held-out", gen_held_out,
                "Use the held-out noise stream (matches eval's default trace)");
  gen->add_option("--out-csv", gen_out, "Output CSV path");

  CLI::App* cmp = app.add_subcommand("compare", "Relative delay gap of two result CSVs");
  std::string cmp_eval, cmp_base, cmp_out;
  cmp->add_option("--eval", cmp_eval, "Agent evaluation CSV")->required();
  cmp->add_option("--baseline", cmp_base, "Baseline CSV")->required();
  cmp->add_option("--out-csv", cmp_out, "Per-sample gap CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (backend == "scalar") {
      sdwan::kernels::set_backend(sdwan::kernels::Backend::kScalar);
    } else if (backend == "avx2") {
      sdwan::kernels::set_backend(sdwan::kernels::Backend::kAvx2);
    }
    if (train->parsed()) return cmd_train(tf);
    if (eval->parsed()) return cmd_eval(ef, eval_load, eval_trace, eval_out);
    if (base->parsed()) return cmd_baseline(bf, base_trace, base_out, bcfg);
    if (gen->parsed()) return cmd_gen_traffic(gf, gen_steps, gen_t0, gen_held_out, gen_out);
    if (cmp->parsed()) return cmd_compare(cmp_eval, cmp_base, cmp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
