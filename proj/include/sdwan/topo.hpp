#pragma once

#include <string>
#include <vector>

namespace sdwan {

struct Edge {
  int id = 0;
  double capacity = 0.0;    // Mbps
  double prop_delay = 0.0;  // seconds
};

struct Tunnel {
  int id = 0;
  int src_site = 0;
  int dst_site = 0;
  std::vector<std::vector<int>> paths;  // ordered candidate paths, edge ids
};

// Directed capacitated overlay. Immutable after construction; safe to share
// read-only across threads.
struct OverlayNetwork {
  std::vector<Edge> edges;
  std::vector<Tunnel> tunnels;
  int site_count = 0;
};

// Hub-and-spoke overlay: site 0 is the headquarter, sites 1..n_branches are
// branches. One tunnel per (HQ, branch) pair per direction; each tunnel has
// two candidate paths, Internet first, then MPLS. A path runs over the source
// site's egress port edge for that transport, a dedicated core edge, and the
// destination site's ingress port edge, so port edges are shared across all
// tunnels of the same site and transport. Core edges get 10x the port
// capacity, which keeps the ports as the only credible bottlenecks.
//
// Throws std::invalid_argument on n_branches < 1 or non-positive capacities.
OverlayNetwork build_hub_spoke(int n_branches, double internet_capacity,
                               double mpls_capacity, double prop_delay);

// Structural invariant check. Returns one human-readable violation per
// problem, empty when the network is well formed. Never throws.
std::vector<std::string> validate(const OverlayNetwork& net);

// JSON on disk, schema_version 1 (see README for the layout).
std::string to_json(const OverlayNetwork& net);
OverlayNetwork network_from_json(const std::string& text);
void save_topology(const OverlayNetwork& net, const std::string& path);
OverlayNetwork load_topology(const std::string& path);

// Port-edge ids for hub_spoke-built networks (used by tests and tooling).
namespace hub_spoke {
enum Transport { kInternet = 0, kMpls = 1 };
int egress_port(int site, Transport t);
int ingress_port(int site, Transport t);
}  // namespace hub_spoke

}  // namespace sdwan
