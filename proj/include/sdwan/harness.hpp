#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sdwan/agents.hpp"
#include "sdwan/cbf.hpp"
#include "sdwan/env.hpp"
#include "sdwan/topo.hpp"
#include "sdwan/traffic.hpp"

namespace sdwan {

enum class Algo { kPpo, kDdpg };

const char* to_string(Algo a);
std::optional<Algo> algo_from_string(std::string_view s);

// Everything needed to reproduce a training run. Loadable from a JSON file;
// every field has a desk-scale default.
struct RunConfig {
  // Topology: loaded from `topology_path` when set, otherwise built as a
  // hub-spoke network from the three parameters below.
  std::string topology_path;
  int branches = 3;
  double internet_capacity = 15.0;  // Mbps
  double mpls_capacity = 6.0;       // Mbps
  double prop_delay = 0.001;        // seconds

  TrafficConfig traffic;
  RewardConfig reward;

  Algo algo = Algo::kPpo;
  PpoConfig ppo;
  DdpgConfig ddpg;

  bool cbf_enabled = true;
  CbfConfig cbf;

  std::int64_t total_steps = 50'000;
  int episode_len = 128;
  int update_every = 256;
  int eval_trace_len = 100;
  std::int64_t checkpoint_every = 0;  // steps between checkpoints; 0 = final only
  std::uint64_t seed = 1;
  std::string out_dir = "run_out";
};

void validate_config(const RunConfig& cfg);  // throws std::invalid_argument

// JSON round-trip for RunConfig. Unknown keys are rejected so typos fail
// loudly instead of silently using defaults.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

OverlayNetwork network_from_config(const RunConfig& cfg);

// Held-out demand trace for evaluation: same traffic shape as training but a
// decorrelated noise seed, so the agent is scored on data it never saw.
std::vector<DemandVector> make_eval_trace(const RunConfig& cfg);

struct EpisodeRecord {
  std::int64_t episode = 0;
  double mean_reward = 0.0;
  double mean_delay = 0.0;
  double mean_mlu = 0.0;
  // Admitted Mbps / offered Mbps summed over the episode; exactly 1.0 when no
  // step rejected any traffic.
  double acceptance = 1.0;
  std::int64_t cbf_fallbacks = 0;  // steps where projection found no feasible candidate
};

struct TrainResult {
  std::int64_t steps = 0;
  std::int64_t updates = 0;  // agent update cycles performed
  std::int64_t episodes = 0;
  std::int64_t fallback_steps = 0;
  // Steps deployed with offered-load utilization > 1 even though the
  // projection did NOT report a fallback. Must stay 0: a violation here means
  // the safety filter claimed feasibility it did not deliver.
  std::int64_t unsafe_deployed_steps = 0;
  std::string checkpoint_path;
  std::vector<EpisodeRecord> episode_records;
};

// Runs the training loop: observe demand, sample an action, project it
// through the safety filter (unless disabled), step the environment, store
// the transition, and update the agent every `update_every` steps. Writes
// steps.csv / episodes.csv / updates.csv / run_summary.json under
// cfg.out_dir, plus periodic and final checkpoints. Fully deterministic for
// a fixed RunConfig.
TrainResult train(const RunConfig& cfg);

// Wrapper so the harness can drive either algorithm through one interface.
class AgentHandle {
 public:
  explicit AgentHandle(PpoAgent agent) : agent_(std::move(agent)) {}
  explicit AgentHandle(DdpgAgent agent) : agent_(std::move(agent)) {}

  Algo algo() const {
    return std::holds_alternative<PpoAgent>(agent_) ? Algo::kPpo : Algo::kDdpg;
  }
  ActResult act(const DemandVector& state, bool explore);

  void save(Checkpoint& ck) const;
  void save_file(const std::string& path) const;
  static AgentHandle load(const Checkpoint& ck, const LoadModel& lm);
  static AgentHandle load_file(const std::string& path, const LoadModel& lm);

  PpoAgent* ppo() { return std::get_if<PpoAgent>(&agent_); }
  DdpgAgent* ddpg() { return std::get_if<DdpgAgent>(&agent_); }

 private:
  std::variant<PpoAgent, DdpgAgent> agent_;
};

struct EvalRow {
  int sample = 0;
  double avg_delay = 0.0;
  double mlu = 0.0;  // offered-load utilization of the deployed action
  double acceptance = 1.0;
  double reward = 0.0;
  bool feasible_found = true;
};

struct EvalSummary {
  double mean_delay = 0.0;
  double p50_delay = 0.0;
  double p95_delay = 0.0;
  double max_mlu = 0.0;
  double mean_reward = 0.0;
  double min_acceptance = 1.0;
  std::int64_t fallback_steps = 0;
  std::int64_t unsafe_steps = 0;  // mlu > 1 without a fallback report
};

struct EvalResult {
  std::vector<EvalRow> rows;
  EvalSummary summary;
};

// Scores a policy on a fixed demand trace: deterministic action (no
// exploration noise), safety projection active unless disabled. Each trace
// sample is evaluated independently (no episode state). When `out_csv` is
// non-empty, writes one row per sample.
EvalResult evaluate(const OverlayNetwork& net, AgentHandle& agent,
                    const std::vector<DemandVector>& trace,
                    const RewardConfig& reward, bool cbf_enabled,
                    const CbfConfig& cbf, const std::string& out_csv = {});

struct CompareResult {
  std::vector<double> gap;  // per-sample (agent - baseline) / baseline
  double mean_gap = 0.0;
  double agent_mean_delay = 0.0;
  double baseline_mean_delay = 0.0;
};

// Reads the `avg_delay` column from two per-sample CSVs (agent evaluation and
// baseline) and reports the relative delay gap. Throws if the files have
// mismatched row counts or sample indexes.
CompareResult compare_delays(const std::string& eval_csv,
                             const std::string& baseline_csv,
                             const std::string& out_csv = {});

}  // namespace sdwan
