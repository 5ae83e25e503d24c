#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "sdwan/env.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

// Candidate-generation policies for the safe-action search. All three start
// from the proto action and move split mass off highly utilized paths; they
// differ in which tunnels they touch per candidate.
enum class CbfPolicy { kNaive, kDeltaUtil, kMaxUtil };

const char* to_string(CbfPolicy p);
// Accepts "naive" / "deltautil" / "maxutil" (case-insensitive).
std::optional<CbfPolicy> policy_from_string(std::string_view s);

struct CbfConfig {
  double radius = 0.3;            // max per-draw split perturbation
  int candidates_per_iter = 1000; // candidates per search iteration
  int max_iters = 20;             // search iterations before giving up
  CbfPolicy policy = CbfPolicy::kMaxUtil;
  double delta_util_threshold = 0.5;  // min (max - min) path utilization gap
  // Safety level: an action is feasible when max edge utilization stays at or
  // below this. 1.0 everywhere except the static solver, which tightens it to
  // its own MLU target when repairing iterates.
  double mlu_threshold = 1.0;
  int workers = 1;  // candidate-evaluation threads
  std::uint64_t seed = 0;
};

void validate_config(const CbfConfig& cfg);  // throws std::invalid_argument

struct ProjectionResult {
  SplitAction action;           // the action to deploy
  bool was_safe_input = false;  // proto already feasible; returned unchanged
  bool feasible_found = false;  // some candidate met the safety level
  std::int64_t candidates_evaluated = 0;
  double l1_distance = 0.0;     // |action - proto|_1
};

// Deterministic draw stream for one candidate, keyed on (seed, candidate
// index): any candidate can be regenerated in isolation, in any order, from
// any thread.
struct CandidateRng {
  CounterRng base;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;
  double uniform() { return base.uniform(stream, counter++); }
};

// Map a proto action to a nearby feasible action. Feasible proto is returned
// unchanged (bitwise). Otherwise up to max_iters * candidates_per_iter
// candidates are generated from the ORIGINAL proto with the configured
// policy; the search stops after the first iteration that produced at least
// one feasible candidate and returns the feasible candidate with the smallest
// L1 distance to the proto (ties: lowest candidate index). If no candidate is
// feasible, the lowest-utilization candidate is returned, or the proto itself
// when even that candidate would raise utilization; either way the result
// never has higher max utilization than the proto. Deterministic given
// (inputs, cfg.seed), independent of cfg.workers.
//
// Throws std::invalid_argument on dimension mismatch, a proto off the
// simplex, or an invalid cfg.
ProjectionResult project(const LoadModel& lm, const DemandVector& demand,
                         const SplitAction& proto, const CbfConfig& cfg);

// Single-candidate generators, exposed for tests and tooling. Each returns a
// renormalized action; draw protocol is documented per policy.
//
// Naive: one random tunnel; draw amount in [0, radius); move that much split
// mass off the tunnel's highest-utilization path, spread equally over its
// other paths (draws: tunnel pick, amount).
SplitAction gen_naive(const LoadModel& lm, const DemandVector& demand,
                      const SplitAction& proto, const CbfConfig& cfg,
                      CandidateRng& rng);
// DeltaUtil: like Naive but the tunnel is picked among tunnels whose path
// utilization spread exceeds delta_util_threshold; with no qualifying tunnel
// it degrades to Naive on the same draw stream (bitwise identical candidate).
SplitAction gen_delta_util(const LoadModel& lm, const DemandVector& demand,
                           const SplitAction& proto, const CbfConfig& cfg,
                           CandidateRng& rng);
// MaxUtil: every tunnel with a path at or above the safety level gets an
// independent draw eps in [0, radius) and sheds eps * (its mass on that path)
// onto its other paths; one draw per congested tunnel, ascending tunnel id.
// With no congested path the proto is returned unchanged.
SplitAction gen_max_util(const LoadModel& lm, const DemandVector& demand,
                         const SplitAction& proto, const CbfConfig& cfg,
                         CandidateRng& rng);

}  // namespace sdwan
