#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/rng.hpp"
#include "corerl/topology.hpp"

namespace corerl {

// One request in flight. It carries its own sampled path; next_stage indexes it.
struct Request {
  double admitted_clock = 0.0;
  double stage_enqueue_clock = 0.0;
  double remaining_demand_s = 0.0;  // core-seconds left at the current stage
  int next_stage = 0;
  std::vector<int> path;
};

struct NodeCounters {
  std::int64_t pkts_rx = 0;
  std::int64_t pkts_tx = 0;
  double bytes_rx = 0.0;
  double bytes_tx = 0.0;
  double cpu_time_s = 0.0;
  double io_bytes = 0.0;
  std::int64_t io_ops = 0;
  std::int64_t page_faults = 0;
};

struct StepOutcome {
  std::int64_t arrivals = 0;
  std::int64_t failures = 0;
  std::vector<double> completed_latency_s;
  std::vector<double> consumed_core_s;   // per node
  std::vector<std::int64_t> stage_arrivals;
  std::vector<std::int64_t> stage_completions;
  std::vector<std::int64_t> queue_depth_end;
  std::vector<double> alloc_cores;
};

struct SimState {
  double clock = 0.0;
  std::vector<std::deque<Request>> queues;     // sorted by stage_enqueue_clock
  std::vector<std::vector<Request>> incoming;  // staged until the node is merged
  std::vector<NodeCounters> counters;
  std::vector<std::int64_t> last_processed;  // stage completions in the last step
  std::int64_t admitted_total = 0;
  std::int64_t completed_total = 0;
  std::int64_t failed_total = 0;

  std::int64_t in_flight() const {
    std::int64_t n = 0;
    for (const auto& q : queues) n += static_cast<std::int64_t>(q.size());
    for (const auto& v : incoming) n += static_cast<std::int64_t>(v.size());
    return n;
  }

  double rss_bytes(const Topology& topo, int v) const {
    constexpr double base = 4.0 * 1024 * 1024;
    double depth = static_cast<double>(queues[v].size() + incoming[v].size());
    return base + topo.service(v).mem_per_queued_bytes * depth;
  }

  double cache_bytes(int v) const {
    constexpr double base = 64.0 * 1024;
    return base + 2048.0 * static_cast<double>(last_processed[v]);
  }
};

inline SimState sim_init(const Topology& topo) {
  SimState s;
  const int m = topo.size();
  s.queues.resize(m);
  s.incoming.resize(m);
  s.counters.resize(m);
  s.last_processed.assign(m, 0);
  return s;
}

namespace detail {

inline std::int64_t packets_for(double bytes) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(bytes / 1460.0)));
}

// stage arrival bookkeeping: rx counters of the receiving node
inline void count_rx(SimState& s, const Topology& topo, int v) {
  const auto& spec = topo.service(v);
  s.counters[v].pkts_rx += packets_for(spec.bytes_per_request);
  s.counters[v].bytes_rx += spec.bytes_per_request;
}

inline void count_tx(SimState& s, const Topology& topo, int v) {
  const auto& spec = topo.service(v);
  s.counters[v].pkts_tx += packets_for(spec.bytes_per_request);
  s.counters[v].bytes_tx += spec.bytes_per_request;
}

// stable merge of incoming into the enqueue-clock-sorted queue
inline void merge_incoming(std::deque<Request>& queue, std::vector<Request>& inc) {
  if (inc.empty()) return;
  std::stable_sort(inc.begin(), inc.end(), [](const Request& a, const Request& b) {
    return a.stage_enqueue_clock < b.stage_enqueue_clock;
  });
  for (auto& r : inc) {
    auto pos = std::upper_bound(queue.begin(), queue.end(), r.stage_enqueue_clock,
                                [](double t, const Request& q) { return t < q.stage_enqueue_clock; });
    queue.insert(pos, std::move(r));
  }
  inc.clear();
}

}  // namespace detail

// Advance the network by one control interval of length dt under the given
// per-node core allocations. Arrivals are spread across the step at offsets
// (i-1) * dt / A. Within the step each node runs a FIFO busy clock: a stage
// starts at max(node busy time, its enqueue offset), runs for
// remaining_demand / alloc seconds, and demand left at the step boundary
// carries to the next step. Nodes are processed in topological order; a stage
// forwarded to a node already processed this step is merged and the node is
// reprocessed with its busy clock preserved, so within-step hops never pay an
// artificial full-step delay.
inline StepOutcome sim_step(SimState& state, const Topology& topo,
                            const std::vector<double>& alloc, std::int64_t arrivals,
                            double dt, RngStream* rng = nullptr) {
  const int m = topo.size();
  if (static_cast<int>(alloc.size()) != m) throw SimError("allocation size mismatch");
  if (!(dt > 0.0)) throw SimError("dt must be positive");
  if (arrivals < 0) throw SimError("negative arrival count");
  for (int v = 0; v < m; ++v) {
    if (!(alloc[v] > 0.0)) throw SimError("non-positive allocation");
    if (alloc[v] > topo.service(v).core_cap + 1e-9) throw SimError("allocation exceeds core cap");
  }

  const double step_start = state.clock;
  const double timeout = topo.workload().request_timeout_s;

  StepOutcome out;
  out.arrivals = arrivals;
  out.consumed_core_s.assign(m, 0.0);
  out.stage_arrivals.assign(m, 0);
  out.stage_completions.assign(m, 0);
  out.queue_depth_end.assign(m, 0);
  out.alloc_cores = alloc;

  // merge leftovers staged after their node was last processed
  for (int v = 0; v < m; ++v) detail::merge_incoming(state.queues[v], state.incoming[v]);

  // timeout scan at the step boundary
  for (int v = 0; v < m; ++v) {
    auto& q = state.queues[v];
    std::deque<Request> kept;
    for (auto& r : q) {
      if (step_start - r.admitted_clock > timeout) {
        out.failures++;
        state.failed_total++;
      } else {
        kept.push_back(std::move(r));
      }
    }
    q = std::move(kept);
  }

  // external arrivals, spread uniformly across the interval
  const int entry = topo.workload().entry_id;
  for (std::int64_t i = 0; i < arrivals; ++i) {
    Request r;
    r.admitted_clock = step_start + dt * static_cast<double>(i) / static_cast<double>(arrivals);
    r.stage_enqueue_clock = r.admitted_clock;
    r.path = topo.sample_path(rng);
    r.next_stage = 0;
    r.remaining_demand_s = topo.service(r.path[0]).service_demand_s;
    state.incoming[r.path[0]].push_back(std::move(r));
    state.admitted_total++;
  }

  std::vector<double> busy(m, 0.0);
  std::vector<char> pending(m, 0);

  auto process_node = [&](int v) {
    pending[v] = 0;
    for (const auto& r : state.incoming[v]) {
      (void)r;
      out.stage_arrivals[v]++;
      detail::count_rx(state, topo, v);
    }
    detail::merge_incoming(state.queues[v], state.incoming[v]);
    auto& q = state.queues[v];
    const double a = alloc[v];
    while (!q.empty()) {
      Request& r = q.front();
      const double enq_rel = std::max(0.0, r.stage_enqueue_clock - step_start);
      const double start = std::max(busy[v], enq_rel);
      if (start >= dt) break;
      const double need = r.remaining_demand_s / a;
      if (start + need <= dt + 1e-12) {
        const double t_rel = start + need;
        busy[v] = t_rel;
        out.consumed_core_s[v] += r.remaining_demand_s;
        state.counters[v].cpu_time_s += r.remaining_demand_s;
        out.stage_completions[v]++;
        state.counters[v].io_bytes += topo.service(v).io_bytes_per_request;
        state.counters[v].io_ops += topo.service(v).io_bytes_per_request > 0.0 ? 1 : 0;
        state.counters[v].page_faults += 3;
        detail::count_tx(state, topo, v);
        Request done = std::move(r);
        q.pop_front();
        const double t_abs = step_start + t_rel;
        if (done.next_stage + 1 < static_cast<int>(done.path.size())) {
          done.next_stage++;
          const int nxt = done.path[done.next_stage];
          done.stage_enqueue_clock = t_abs;
          done.remaining_demand_s = topo.service(nxt).service_demand_s;
          state.incoming[nxt].push_back(std::move(done));
          pending[nxt] = 1;
        } else {
          out.completed_latency_s.push_back(t_abs - done.admitted_clock);
          state.completed_total++;
        }
      } else {
        const double avail = dt - start;
        if (avail > 0.0) {
          r.remaining_demand_s -= avail * a;
          out.consumed_core_s[v] += avail * a;
          state.counters[v].cpu_time_s += avail * a;
        }
        busy[v] = dt;
        break;
      }
    }
  };

  for (int v : topo.topo_order()) process_node(v);
  // reprocess nodes that received stages after their sweep slot; each stage is
  // enqueued exactly once so this terminates
  bool again = true;
  while (again) {
    again = false;
    for (int v : topo.topo_order()) {
      if (pending[v] && !state.incoming[v].empty()) {
        process_node(v);
        again = true;
      }
    }
  }

  for (int v = 0; v < m; ++v) {
    out.queue_depth_end[v] =
        static_cast<std::int64_t>(state.queues[v].size() + state.incoming[v].size());
    state.last_processed[v] = out.stage_completions[v];
  }

  state.clock = step_start + dt;

  // request conservation, exact in integers
  if (state.admitted_total != state.completed_total + state.failed_total + state.in_flight())
    throw SimError("request conservation violated");

  return out;
}

inline std::int64_t generate_arrivals(int users, double rate_per_user, double dt,
                                      RngStream& rng) {
  return rng.poisson(static_cast<double>(users) * rate_per_user * dt);
}

// ---- service-level latency statistics ----

inline constexpr std::array<double, 12> kLatencyPercentiles = {
    50.0, 66.0, 75.0, 80.0, 90.0, 95.0, 98.0, 99.0, 99.9, 99.99, 99.999, 100.0};

// nearest-rank: value at index ceil(p/100 * N) of the sorted sample (1-based)
inline double nearest_rank_percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw SimError("percentile of empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw SimError("percentile out of (0, 100]");
  auto n = static_cast<std::int64_t>(sorted.size());
  auto rank = static_cast<std::int64_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::int64_t>(rank, 1, n);
  return sorted[static_cast<std::size_t>(rank - 1)];
}

// Per-interval end-to-end latency percentiles in ms. An interval with no
// completions carries the previous interval's values forward.
class LatencyWindow {
 public:
  LatencyWindow() { values_ms_.fill(0.0); }

  void update(const std::vector<double>& completed_latency_s) {
    if (completed_latency_s.empty()) return;
    std::vector<double> sorted = completed_latency_s;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < kLatencyPercentiles.size(); ++i)
      values_ms_[i] = nearest_rank_percentile(sorted, kLatencyPercentiles[i]) * 1000.0;
  }

  const std::array<double, 12>& values_ms() const { return values_ms_; }
  double p99_ms() const { return values_ms_[7]; }

 private:
  std::array<double, 12> values_ms_;
};

// Fresh state advanced through warmup_steps intervals at full caps. Range
// enforcement is relaxed for evaluation at extrapolated user counts.
inline SimState reset_and_warmup(
    const Topology& topo, int users, int warmup_steps, double dt, RngStream& rng,
    const std::function<void(const SimState&, const StepOutcome&)>& on_step = nullptr,
    bool enforce_user_range = true) {
  if (users < 1) throw SimError("user count must be positive");
  if (enforce_user_range &&
      (users < topo.workload().user_min || users > topo.workload().user_max))
    throw SimError("user count outside configured range");
  SimState state = sim_init(topo);
  const std::vector<double> caps = topo.caps();
  for (int i = 0; i < warmup_steps; ++i) {
    std::int64_t arrivals =
        generate_arrivals(users, topo.workload().requests_per_user_per_s, dt, rng);
    StepOutcome out = sim_step(state, topo, caps, arrivals, dt, &rng);
    if (on_step) on_step(state, out);
  }
  return state;
}

}  // namespace corerl
