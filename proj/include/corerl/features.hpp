#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/simulate.hpp"
#include "corerl/topology.hpp"

namespace corerl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Per-row feature layout. Communication, memory, cpu, io and latency blocks
// come first, then per-node request/service rates, then the one-hot identifier
// and the previous action. Counter channels enter as per-interval deltas,
// gauges as levels.
inline constexpr int kNumBaseFeatures = 26;

inline int feature_count(int m_max) { return kNumBaseFeatures + m_max + 1; }

struct FeatureDesc {
  int index;
  std::string category;
  std::string name;
};

inline std::vector<FeatureDesc> feature_schema(int m_max) {
  std::vector<FeatureDesc> out;
  int i = 0;
  auto add = [&](const std::string& cat, const std::string& name) {
    out.push_back({i++, cat, name});
  };
  add("communication", "packets_received");
  add("communication", "packets_sent");
  add("communication", "bytes_received");
  add("communication", "bytes_sent");
  add("memory", "rss_bytes");
  add("memory", "cache_bytes");
  add("memory", "page_faults");
  add("cpu", "cpu_time_s");
  add("cpu", "alloc_cores");
  add("io", "io_bytes");
  add("io", "io_ops");
  for (double p : kLatencyPercentiles) {
    std::string name = "latency_p" + std::to_string(p);
    // trim trailing zeros from the percentile label
    name.erase(name.find_last_not_of('0') + 1);
    if (name.back() == '.') name.pop_back();
    add("latency", name + "_ms");
  }
  add("latency", "qos_target_ms");
  add("request_service", "stage_arrivals_per_s");
  add("request_service", "stage_completions_per_s");
  for (int k = 0; k < m_max; ++k) {
    std::string id = std::to_string(k);
    if (id.size() < 2) id = "0" + id;
    add("identifier", "id_" + id);
  }
  add("action", "previous_action");
  return out;
}

// Builds one M x n observation per control interval. Holds the previous
// counter snapshot so counter channels can be differenced.
class ObservationAssembler {
 public:
  ObservationAssembler(const Topology& topo, int m_max, double qos_ms)
      : topo_(&topo), m_max_(m_max), qos_ms_(qos_ms) {
    if (topo.size() > m_max)
      throw ConfigError("observation: topology has " + std::to_string(topo.size()) +
                        " microservices but M_max is " + std::to_string(m_max));
    reset();
  }

  void reset() { prev_.assign(static_cast<std::size_t>(topo_->size()), NodeCounters{}); }

  Matrix assemble(const SimState& state, const StepOutcome& out, const LatencyWindow& window,
                  const Vector& prev_action, double dt) {
    const int m = topo_->size();
    if (static_cast<int>(state.counters.size()) != m ||
        static_cast<int>(out.alloc_cores.size()) != m)
      throw ConfigError("observation: telemetry row count mismatch");
    if (prev_action.size() != m) throw ConfigError("observation: previous action size mismatch");

    const int n = feature_count(m_max_);
    Matrix obs = Matrix::Zero(m, n);
    for (int v = 0; v < m; ++v) {
      const NodeCounters& c = state.counters[v];
      const NodeCounters& p = prev_[v];
      int j = 0;
      obs(v, j++) = static_cast<double>(c.pkts_rx - p.pkts_rx);
      obs(v, j++) = static_cast<double>(c.pkts_tx - p.pkts_tx);
      obs(v, j++) = c.bytes_rx - p.bytes_rx;
      obs(v, j++) = c.bytes_tx - p.bytes_tx;
      obs(v, j++) = state.rss_bytes(*topo_, v);
      obs(v, j++) = state.cache_bytes(v);
      obs(v, j++) = static_cast<double>(c.page_faults - p.page_faults);
      obs(v, j++) = c.cpu_time_s - p.cpu_time_s;
      obs(v, j++) = out.alloc_cores[v];
      obs(v, j++) = c.io_bytes - p.io_bytes;
      obs(v, j++) = static_cast<double>(c.io_ops - p.io_ops);
      for (double ms : window.values_ms()) obs(v, j++) = ms;
      obs(v, j++) = qos_ms_;
      obs(v, j++) = static_cast<double>(out.stage_arrivals[v]) / dt;
      obs(v, j++) = static_cast<double>(out.stage_completions[v]) / dt;
      obs(v, kNumBaseFeatures + topo_->service(v).id) = 1.0;
      obs(v, n - 1) = prev_action(v);
    }
    prev_ = state.counters;
    return obs;
  }

  int m_max() const { return m_max_; }
  double qos_ms() const { return qos_ms_; }

 private:
  const Topology* topo_;
  int m_max_;
  double qos_ms_;
  std::vector<NodeCounters> prev_;
};

// Stack the last k observations row-wise: row = [oldest | ... | newest]. With
// fewer than k frames the oldest one is repeated on the left.
inline Matrix stack_observations(const std::deque<Matrix>& history, int k) {
  if (history.empty()) throw ConfigError("stack: empty observation history");
  if (k < 1) throw ConfigError("stack: k must be >= 1");
  const int h = static_cast<int>(history.size());
  const auto m = history.front().rows();
  const auto n = history.front().cols();
  Matrix state(m, k * n);
  for (int j = 0; j < k; ++j) {
    int src = j - (k - h);
    if (src < 0) src = 0;
    if (history[static_cast<std::size_t>(src)].rows() != m ||
        history[static_cast<std::size_t>(src)].cols() != n)
      throw ConfigError("stack: inconsistent observation shapes");
    state.block(0, static_cast<Eigen::Index>(j) * n, m, n) = history[static_cast<std::size_t>(src)];
  }
  return state;
}

// Global per-feature mean and population variance over every length-n frame of
// every accumulated state (states are un-stacked into their k frames).
struct StandardizationStats {
  Vector mean;
  Vector var;
  std::int64_t count = 0;

  static StandardizationStats zeros(int n) {
    StandardizationStats s;
    s.mean = Vector::Zero(n);
    s.var = Vector::Ones(n);
    s.count = 0;
    return s;
  }
};

class StatsAccumulator {
 public:
  explicit StatsAccumulator(int n) : n_(n), sum_(Vector::Zero(n)), sumsq_(Vector::Zero(n)) {}

  void add_state(const Matrix& state) {
    if (state.cols() % n_ != 0) throw ConfigError("stats: state width not a multiple of n");
    const auto k = state.cols() / n_;
    for (Eigen::Index f = 0; f < k; ++f) {
      const auto block = state.block(0, f * n_, state.rows(), n_);
      sum_ += block.colwise().sum().transpose();
      sumsq_ += block.array().square().matrix().colwise().sum().transpose();
      count_ += state.rows();
    }
  }

  StandardizationStats finalize() const {
    if (count_ == 0) throw ConfigError("stats: no rows accumulated");
    StandardizationStats s;
    const double c = static_cast<double>(count_);
    s.mean = sum_ / c;
    s.var = (sumsq_ / c - s.mean.array().square().matrix()).cwiseMax(0.0);
    s.count = count_;
    return s;
  }

 private:
  int n_;
  Vector sum_;
  Vector sumsq_;
  std::int64_t count_ = 0;
};

// z = (x - mean) / (sigma + eps) per feature column, applied frame-wise.
// Identifier and previous-action columns pass through unchanged.
inline Matrix standardize(const Matrix& state, const StandardizationStats& stats, int m_max) {
  const int n = feature_count(m_max);
  if (state.cols() % n != 0) throw ConfigError("standardize: state width not a multiple of n");
  if (stats.mean.size() != n || stats.var.size() != n)
    throw ConfigError("standardize: stats length mismatch");
  constexpr double eps = 1e-8;
  Matrix z = state;
  const auto k = state.cols() / n;
  for (Eigen::Index f = 0; f < k; ++f) {
    for (int j = 0; j < kNumBaseFeatures; ++j) {
      const double sd = std::sqrt(stats.var(j)) + eps;
      z.col(f * n + j) = (state.col(f * n + j).array() - stats.mean(j)) / sd;
    }
  }
  return z;
}

}  // namespace corerl
