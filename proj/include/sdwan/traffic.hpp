#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdwan {

// Noisy diurnal sinusoid per tunnel:
//   demand_k(t) = max(0, base + amplitude * sin(2*pi*t/period + phase_k) + noise)
// Noise is drawn from a counter-based stream keyed on (seed, k, t), so any
// (tunnel, step) sample can be generated independently and in any order.
struct TrafficConfig {
  double base = 2.5;       // Mbps
  double amplitude = 2.0;  // Mbps
  int period = 500;        // steps
  double noise_sd = 0.2;   // Mbps
  std::vector<double> phases;  // radians per tunnel; empty -> 2*pi*k/K
  std::uint64_t seed = 1;
};

struct DemandVector {
  std::vector<double> demands;  // Mbps, one per tunnel
  std::int64_t t = 0;
};

void validate_config(const TrafficConfig& cfg);  // throws std::invalid_argument

DemandVector generate(const TrafficConfig& cfg, int n_tunnels, std::int64_t t);
std::vector<DemandVector> generate_trace(const TrafficConfig& cfg, int n_tunnels,
                                         std::int64_t t0, int len);

// CSV with header "t,tunnel_0,...,tunnel_{K-1}", one row per step.
void save_trace_csv(const std::vector<DemandVector>& trace, const std::string& path);
std::vector<DemandVector> load_trace_csv(const std::string& path);

}  // namespace sdwan
