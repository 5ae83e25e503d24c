#include "sdwan/traffic.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sdwan/csv.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

void validate_config(const TrafficConfig& cfg) {
  if (cfg.base < 0.0) throw std::invalid_argument("traffic: base must be >= 0");
  if (cfg.amplitude < 0.0) throw std::invalid_argument("traffic: amplitude must be >= 0");
  if (cfg.period < 1) throw std::invalid_argument("traffic: period must be >= 1");
  if (cfg.noise_sd < 0.0) throw std::invalid_argument("traffic: noise_sd must be >= 0");
}

DemandVector generate(const TrafficConfig& cfg, int n_tunnels, std::int64_t t) {
  if (n_tunnels < 1) throw std::invalid_argument("traffic: n_tunnels must be >= 1");
  validate_config(cfg);
  if (!cfg.phases.empty() && static_cast<int>(cfg.phases.size()) != n_tunnels)
    throw std::invalid_argument("traffic: phase list does not match tunnel count");

  const CounterRng rng{cfg.seed};
  DemandVector out;
  out.t = t;
  out.demands.resize(n_tunnels);
  for (int k = 0; k < n_tunnels; ++k) {
    const double phase =
        cfg.phases.empty() ? kTwoPi * k / n_tunnels : cfg.phases[k];
    double d = cfg.base +
               cfg.amplitude * std::sin(kTwoPi * static_cast<double>(t) /
                                            cfg.period + phase);
    if (cfg.noise_sd > 0.0)
      d += cfg.noise_sd *
           rng.normal(static_cast<std::uint64_t>(k),
                      static_cast<std::uint64_t>(t));
    out.demands[k] = d > 0.0 ? d : 0.0;
  }
  return out;
}

std::vector<DemandVector> generate_trace(const TrafficConfig& cfg, int n_tunnels,
                                         std::int64_t t0, int len) {
  if (len < 1) throw std::invalid_argument("traffic: trace length must be >= 1");
  std::vector<DemandVector> out;
  out.reserve(len);
  for (int i = 0; i < len; ++i) out.push_back(generate(cfg, n_tunnels, t0 + i));
  return out;
}

void save_trace_csv(const std::vector<DemandVector>& trace, const std::string& path) {
  if (trace.empty()) throw std::invalid_argument("traffic: empty trace");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("traffic: cannot write " + path);
  const int k = static_cast<int>(trace.front().demands.size());
  out << "t";
  for (int i = 0; i < k; ++i) out << ",tunnel_" << i;
  out << "\n";
  for (const DemandVector& d : trace) {
    out << d.t;
    for (double v : d.demands) out << "," << csv::fmt(v);
    out << "\n";
  }
}

std::vector<DemandVector> load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("traffic: cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("traffic: empty file " + path);
  std::vector<DemandVector> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    DemandVector d;
    if (!std::getline(ss, cell, ',')) continue;
    d.t = std::stoll(cell);
    while (std::getline(ss, cell, ',')) d.demands.push_back(std::stod(cell));
    if (d.demands.empty()) throw std::runtime_error("traffic: malformed row in " + path);
    out.push_back(std::move(d));
  }
  if (out.empty()) throw std::runtime_error("traffic: no samples in " + path);
  return out;
}

}  // namespace sdwan
