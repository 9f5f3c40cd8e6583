#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/rng.hpp"

namespace corerl {

inline constexpr double kAllocFloorCores = 0.1;

struct MicroserviceSpec {
  int id = 0;
  std::string name;
  double core_cap = 1.0;        // cores
  double service_demand_s = 0.001;  // core-seconds per request
  std::vector<int> downstream;
  // if non-empty, one downstream child is sampled per request; must match
  // downstream in length. Empty means the request visits every child.
  std::vector<double> branch_weights;
  double bytes_per_request = 4096.0;
  double mem_per_queued_bytes = 131072.0;
  double io_bytes_per_request = 0.0;
};

struct WorkloadSpec {
  int user_min = 1;
  int user_max = 1;
  double requests_per_user_per_s = 1.0;
  int entry_id = 0;
  double request_timeout_s = 10.0;
};

class Topology {
 public:
  static Topology build(std::vector<MicroserviceSpec> services, WorkloadSpec workload) {
    Topology t;
    if (services.empty()) throw ConfigError("topology: no microservices");
    const int m = static_cast<int>(services.size());
    std::vector<int> seen(m, 0);
    for (const auto& s : services) {
      if (s.id < 0 || s.id >= m)
        throw ConfigError("topology: id " + std::to_string(s.id) + " out of range 0.." +
                          std::to_string(m - 1));
      if (seen[s.id]++) throw ConfigError("topology: duplicate id " + std::to_string(s.id));
    }
    std::sort(services.begin(), services.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& s : services) {
      if (!(s.core_cap > 0.0)) throw ConfigError("topology: core_cap must be positive");
      if (s.core_cap < kAllocFloorCores)
        throw ConfigError("topology: core_cap below allocation floor " +
                          std::to_string(kAllocFloorCores));
      if (!(s.service_demand_s > 0.0))
        throw ConfigError("topology: service_demand must be positive");
      if (s.bytes_per_request < 0.0 || s.mem_per_queued_bytes < 0.0 ||
          s.io_bytes_per_request < 0.0)
        throw ConfigError("topology: negative telemetry coefficient");
      for (int d : s.downstream)
        if (d < 0 || d >= m)
          throw ConfigError("topology: dangling downstream id " + std::to_string(d) +
                            " at microservice " + std::to_string(s.id));
      if (!s.branch_weights.empty()) {
        if (s.branch_weights.size() != s.downstream.size())
          throw ConfigError("topology: branch_weights length mismatch at microservice " +
                            std::to_string(s.id));
        double sum = 0.0;
        for (double w : s.branch_weights) {
          if (!(w >= 0.0)) throw ConfigError("topology: negative branch weight");
          sum += w;
        }
        if (!(sum > 0.0)) throw ConfigError("topology: branch weights sum to zero");
      }
    }
    if (workload.entry_id < 0 || workload.entry_id >= m)
      throw ConfigError("topology: workload entry id out of range");
    if (workload.user_min < 0 || workload.user_max < workload.user_min)
      throw ConfigError("topology: bad user range");
    if (!(workload.requests_per_user_per_s > 0.0))
      throw ConfigError("topology: requests_per_user_per_s must be positive");
    if (!(workload.request_timeout_s > 0.0))
      throw ConfigError("topology: request_timeout must be positive");

    t.services_ = std::move(services);
    t.workload_ = workload;
    t.topo_order_ = t.compute_topo_order();
    t.canonical_path_ = t.expand_path(nullptr);
    t.has_branching_ = false;
    for (const auto& s : t.services_)
      if (!s.branch_weights.empty()) t.has_branching_ = true;
    return t;
  }

  int size() const { return static_cast<int>(services_.size()); }
  const MicroserviceSpec& service(int id) const { return services_[id]; }
  const std::vector<MicroserviceSpec>& services() const { return services_; }
  const WorkloadSpec& workload() const { return workload_; }
  const std::vector<int>& topo_order() const { return topo_order_; }
  const std::vector<int>& canonical_path() const { return canonical_path_; }
  bool has_branching() const { return has_branching_; }

  std::vector<double> caps() const {
    std::vector<double> u(services_.size());
    for (std::size_t i = 0; i < services_.size(); ++i) u[i] = services_[i].core_cap;
    return u;
  }

  // Path of microservice ids a request visits, in service order. Deterministic
  // depth-first expansion from the entry; a node with branch_weights forwards to
  // exactly one sampled child, otherwise to all children in declared order. A
  // node already on the path is not visited twice.
  std::vector<int> sample_path(RngStream* rng) const {
    if (!has_branching_) return canonical_path_;
    if (rng == nullptr) throw SimError("branching topology requires an rng for path sampling");
    return expand_path(rng);
  }

 private:
  std::vector<int> compute_topo_order() const {
    const int m = size();
    std::vector<int> indeg(m, 0);
    for (const auto& s : services_)
      for (int d : s.downstream) indeg[d]++;
    // min-id selection keeps the order deterministic
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < m; ++i)
      if (indeg[i] == 0) ready.push(i);
    std::vector<int> order;
    order.reserve(m);
    while (!ready.empty()) {
      int v = ready.top();
      ready.pop();
      order.push_back(v);
      for (int d : services_[v].downstream)
        if (--indeg[d] == 0) ready.push(d);
    }
    if (static_cast<int>(order.size()) != m)
      throw ConfigError("topology: cycle detected in call graph");
    return order;
  }

  std::vector<int> expand_path(RngStream* rng) const {
    std::vector<int> path;
    std::vector<char> visited(services_.size(), 0);
    expand_from(workload_.entry_id, rng, path, visited);
    return path;
  }

  void expand_from(int v, RngStream* rng, std::vector<int>& path,
                   std::vector<char>& visited) const {
    if (visited[v]) return;
    visited[v] = 1;
    path.push_back(v);
    const auto& s = services_[v];
    if (s.downstream.empty()) return;
    if (!s.branch_weights.empty() && rng != nullptr) {
      double sum = 0.0;
      for (double w : s.branch_weights) sum += w;
      double x = rng->uniform() * sum;
      std::size_t pick = 0;
      for (; pick + 1 < s.branch_weights.size(); ++pick) {
        x -= s.branch_weights[pick];
        if (x < 0.0) break;
      }
      expand_from(s.downstream[pick], rng, path, visited);
    } else {
      for (int d : s.downstream) expand_from(d, rng, path, visited);
    }
  }

  std::vector<MicroserviceSpec> services_;
  WorkloadSpec workload_;
  std::vector<int> topo_order_;
  std::vector<int> canonical_path_;
  bool has_branching_ = false;
};

}  // namespace corerl
