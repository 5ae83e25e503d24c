#include "sdwan/topo.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sdwan {

namespace hub_spoke {
// 4 port edges per site: [internet egress, internet ingress, mpls egress,
// mpls ingress]; core edges follow after all ports.
int egress_port(int site, Transport t) { return site * 4 + (t == kMpls ? 2 : 0); }
int ingress_port(int site, Transport t) { return site * 4 + (t == kMpls ? 3 : 1); }
}  // namespace hub_spoke

OverlayNetwork build_hub_spoke(int n_branches, double internet_capacity,
                               double mpls_capacity, double prop_delay) {
  if (n_branches < 1) throw std::invalid_argument("build_hub_spoke: n_branches must be >= 1");
  if (internet_capacity <= 0.0 || mpls_capacity <= 0.0)
    throw std::invalid_argument("build_hub_spoke: capacities must be > 0");
  if (prop_delay < 0.0)
    throw std::invalid_argument("build_hub_spoke: prop_delay must be >= 0");

  using namespace hub_spoke;
  OverlayNetwork net;
  net.site_count = n_branches + 1;

  const double cap[2] = {internet_capacity, mpls_capacity};
  for (int site = 0; site <= n_branches; ++site) {
    for (int t = 0; t < 2; ++t) {
      for (int dir = 0; dir < 2; ++dir) {  // egress, ingress
        Edge e;
        e.id = static_cast<int>(net.edges.size());
        e.capacity = cap[t];
        e.prop_delay = prop_delay;
        net.edges.push_back(e);
      }
    }
  }

  const int n_ports = static_cast<int>(net.edges.size());
  for (int b = 1; b <= n_branches; ++b) {
    for (int dir = 0; dir < 2; ++dir) {  // 0: HQ -> branch, 1: branch -> HQ
      Tunnel tun;
      tun.id = static_cast<int>(net.tunnels.size());
      tun.src_site = dir == 0 ? 0 : b;
      tun.dst_site = dir == 0 ? b : 0;
      for (int t = 0; t < 2; ++t) {
        const auto transport = static_cast<Transport>(t);
        Edge core;
        core.id = static_cast<int>(net.edges.size());
        core.capacity = 10.0 * cap[t];
        core.prop_delay = prop_delay;
        net.edges.push_back(core);
        tun.paths.push_back({egress_port(tun.src_site, transport), core.id,
                             ingress_port(tun.dst_site, transport)});
      }
      net.tunnels.push_back(std::move(tun));
    }
  }
  (void)n_ports;
  return net;
}

std::vector<std::string> validate(const OverlayNetwork& net) {
  std::vector<std::string> out;
  const auto report = [&out](const std::string& s) { out.push_back(s); };

  const int n_edges = static_cast<int>(net.edges.size());
  for (int i = 0; i < n_edges; ++i) {
    const Edge& e = net.edges[i];
    std::ostringstream who;
    who << "edge " << i;
    if (e.id != i) report(who.str() + ": id " + std::to_string(e.id) + " is not dense");
    if (!(e.capacity > 0.0)) report(who.str() + ": capacity must be > 0");
    if (e.prop_delay < 0.0) report(who.str() + ": prop_delay must be >= 0");
  }

  const int n_tunnels = static_cast<int>(net.tunnels.size());
  for (int k = 0; k < n_tunnels; ++k) {
    const Tunnel& tun = net.tunnels[k];
    std::ostringstream who;
    who << "tunnel " << k;
    if (tun.id != k) report(who.str() + ": id " + std::to_string(tun.id) + " is not dense");
    if (tun.src_site < 0 || tun.src_site >= net.site_count)
      report(who.str() + ": src_site out of range");
    if (tun.dst_site < 0 || tun.dst_site >= net.site_count)
      report(who.str() + ": dst_site out of range");
    if (tun.paths.empty()) report(who.str() + ": has no candidate path");
    for (std::size_t p = 0; p < tun.paths.size(); ++p) {
      const auto& path = tun.paths[p];
      std::ostringstream pwho;
      pwho << "tunnel " << k << " path " << p;
      if (path.empty()) report(pwho.str() + ": empty path");
      for (int eid : path) {
        if (eid < 0 || eid >= n_edges)
          report(pwho.str() + ": references edge " + std::to_string(eid) +
                 " of " + std::to_string(n_edges));
      }
    }
    std::set<std::vector<int>> distinct(tun.paths.begin(), tun.paths.end());
    if (distinct.size() != tun.paths.size())
      report(who.str() + ": duplicate paths");
  }
  return out;
}

std::string to_json(const OverlayNetwork& net) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["site_count"] = net.site_count;
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : net.edges)
    j["edges"].push_back({{"id", e.id}, {"capacity", e.capacity}, {"prop_delay", e.prop_delay}});
  j["tunnels"] = nlohmann::json::array();
  for (const Tunnel& t : net.tunnels)
    j["tunnels"].push_back({{"id", t.id},
                            {"src_site", t.src_site},
                            {"dst_site", t.dst_site},
                            {"paths", t.paths}});
  return j.dump(2);
}

OverlayNetwork network_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("topology: unsupported schema_version");
  OverlayNetwork net;
  net.site_count = j.at("site_count").get<int>();
  for (const auto& je : j.at("edges")) {
    Edge e;
    e.id = je.at("id").get<int>();
    e.capacity = je.at("capacity").get<double>();
    e.prop_delay = je.at("prop_delay").get<double>();
    net.edges.push_back(e);
  }
  for (const auto& jt : j.at("tunnels")) {
    Tunnel t;
    t.id = jt.at("id").get<int>();
    t.src_site = jt.at("src_site").get<int>();
    t.dst_site = jt.at("dst_site").get<int>();
    t.paths = jt.at("paths").get<std::vector<std::vector<int>>>();
    net.tunnels.push_back(std::move(t));
  }
  auto violations = validate(net);
  if (!violations.empty())
    throw std::runtime_error("topology: invalid network: " + violations.front());
  return net;
}

void save_topology(const OverlayNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("topology: cannot write " + path);
  out << to_json(net) << "\n";
}

OverlayNetwork load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("topology: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return network_from_json(ss.str());
}

}  // namespace sdwan
