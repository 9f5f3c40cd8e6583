#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corerl/autoscale.hpp"
#include "corerl/errors.hpp"
#include "corerl/topology.hpp"

namespace corerl {

struct ClassifierConfig {
  double lr = 3e-4;
  int batch = 100;
  int max_updates = 10000;
};

// Full experiment description. Every field has a default matching the method's
// published hyperparameter table; desk-scale runs override the schedule.
struct ExperimentConfig {
  Topology topology;
  std::uint64_t seed = 1;

  // environment
  double qos_ms = 500.0;
  double alpha = 1.0;
  double t_length_s = 1.0;
  int stack_k = 5;
  int m_max = 12;
  std::int64_t w_steps = 60;  // pre-episode warmup length W
  double alloc_floor_cores = kAllocFloorCores;

  // agent
  int hidden = 256;
  double gamma = 0.9;
  double lr = 3e-5;
  double max_grad_norm = 40.0;
  double rho = 0.995;
  int batch_size = 100;
  double eta_init = 1.0;
  std::optional<double> target_entropy;  // default -1/M from the topology

  // schedule
  std::size_t replay_capacity = 200000;
  std::int64_t total_steps = 260000;
  std::int64_t asa_steps = 130000;
  std::int64_t ca_steps = 50000;
  std::int64_t rsc_steps = 100000;
  std::int64_t e_time = 300;
  std::int64_t checkpoint_every = 5000;

  ClassifierConfig classifier;
  AutoScaleConfig autoscale;

  // evaluation and transfer budgets
  std::vector<int> eval_user_counts;
  std::int64_t eval_duration = 300;
  std::int64_t transfer_total_steps = 120000;
  std::int64_t transfer_asa_steps = 70000;

  double resolved_target_entropy() const {
    if (target_entropy) return *target_entropy;
    return -1.0 / static_cast<double>(topology.services().size());
  }

  std::int64_t rl_steps() const { return total_steps - asa_steps; }
  // the final episode truncates to the step budget
  std::int64_t episodes() const { return (rl_steps() + e_time - 1) / e_time; }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ConfigError("config: unknown key \"" + item.key() + "\" in " + where);
}

template <typename T>
inline void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
    }
  }
}

}  // namespace detail

inline Topology parse_topology(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("topology: expected an object");
  detail::reject_unknown_keys(j, {"microservices", "workload"}, "topology");
  if (!j.contains("microservices") || !j.contains("workload"))
    throw ConfigError("topology: needs \"microservices\" and \"workload\"");

  std::vector<MicroserviceSpec> services;
  for (const auto& sj : j.at("microservices")) {
    detail::reject_unknown_keys(sj,
                                {"id", "name", "core_cap", "service_demand_s", "downstream",
                                 "branch_weights", "bytes_per_request", "mem_per_queued_bytes",
                                 "io_bytes_per_request"},
                                "microservice");
    MicroserviceSpec s;
    detail::take(sj, "id", s.id);
    detail::take(sj, "name", s.name);
    detail::take(sj, "core_cap", s.core_cap);
    detail::take(sj, "service_demand_s", s.service_demand_s);
    detail::take(sj, "downstream", s.downstream);
    detail::take(sj, "branch_weights", s.branch_weights);
    detail::take(sj, "bytes_per_request", s.bytes_per_request);
    detail::take(sj, "mem_per_queued_bytes", s.mem_per_queued_bytes);
    detail::take(sj, "io_bytes_per_request", s.io_bytes_per_request);
    services.push_back(std::move(s));
  }

  const auto& wj = j.at("workload");
  detail::reject_unknown_keys(
      wj, {"user_min", "user_max", "requests_per_user_per_s", "entry_id", "request_timeout_s"},
      "workload");
  WorkloadSpec w;
  detail::take(wj, "user_min", w.user_min);
  detail::take(wj, "user_max", w.user_max);
  detail::take(wj, "requests_per_user_per_s", w.requests_per_user_per_s);
  detail::take(wj, "entry_id", w.entry_id);
  detail::take(wj, "request_timeout_s", w.request_timeout_s);

  return Topology::build(std::move(services), w);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return j;
}

inline void validate_config(const ExperimentConfig& c) {
  const auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  const auto m = static_cast<int>(c.topology.services().size());
  if (c.m_max < m) fail("m_max smaller than the topology");
  if (c.qos_ms <= 0) fail("qos_ms must be positive");
  if (c.alpha < 0) fail("alpha must be non-negative");
  if (c.t_length_s <= 0) fail("t_length_s must be positive");
  if (c.stack_k < 1) fail("stack_k must be at least 1");
  if (c.w_steps < 0) fail("w_steps must be non-negative");
  if (c.alloc_floor_cores <= 0) fail("alloc_floor_cores must be positive");
  if (c.hidden < 1) fail("hidden must be positive");
  if (c.gamma <= 0 || c.gamma > 1) fail("gamma must be in (0, 1]");
  if (c.lr <= 0 || c.classifier.lr <= 0) fail("learning rates must be positive");
  if (c.max_grad_norm <= 0) fail("max_grad_norm must be positive");
  if (c.rho < 0 || c.rho >= 1) fail("rho must be in [0, 1)");
  if (c.batch_size < 1 || c.classifier.batch < 1) fail("batch sizes must be positive");
  if (c.eta_init <= 0) fail("eta_init must be positive");
  if (c.replay_capacity == 0) fail("replay_capacity must be positive");
  if (c.e_time < 1) fail("e_time must be positive");
  if (c.asa_steps < 0 || c.total_steps < c.asa_steps)
    fail("need 0 <= asa_steps <= total_steps");
  if (c.ca_steps < 0 || c.ca_steps > c.total_steps - c.asa_steps)
    fail("need 0 <= ca_steps <= total_steps - asa_steps");
  if (c.rsc_steps < 1) fail("rsc_steps must be positive");
  if (c.checkpoint_every < 1) fail("checkpoint_every must be positive");
  if (c.classifier.max_updates < 1) fail("classifier max_updates must be positive");
  if (c.eval_duration < 1) fail("eval_duration must be positive");
  if (c.transfer_asa_steps < 0 || c.transfer_total_steps < c.transfer_asa_steps)
    fail("need 0 <= transfer_asa_steps <= transfer_total_steps");
  for (int u : c.eval_user_counts)
    if (u < 1) fail("eval_user_counts must be positive");
}

// Parses an experiment config. The "topology" key holds either an inline
// topology object or a path to a topology JSON file (resolved as given).
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  detail::reject_unknown_keys(
      j,
      {"topology",       "seed",           "qos_ms",
       "alpha",          "t_length_s",     "stack_k",
       "m_max",          "w_steps",        "alloc_floor_cores",
       "hidden",         "gamma",          "lr",
       "max_grad_norm",  "rho",            "batch_size",
       "eta_init",       "target_entropy", "replay_capacity",
       "total_steps",    "asa_steps",      "ca_steps",
       "rsc_steps",      "e_time",         "checkpoint_every",
       "classifier",     "autoscale",      "eval_user_counts",
       "eval_duration",  "transfer_total_steps", "transfer_asa_steps"},
      "experiment");
  if (!j.contains("topology")) throw ConfigError("config: missing \"topology\"");

  ExperimentConfig c;
  const auto& tj = j.at("topology");
  if (tj.is_string())
    c.topology = parse_topology(read_json_file(tj.get<std::string>()));
  else
    c.topology = parse_topology(tj);

  detail::take(j, "seed", c.seed);
  detail::take(j, "qos_ms", c.qos_ms);
  detail::take(j, "alpha", c.alpha);
  detail::take(j, "t_length_s", c.t_length_s);
  detail::take(j, "stack_k", c.stack_k);
  detail::take(j, "m_max", c.m_max);
  detail::take(j, "w_steps", c.w_steps);
  detail::take(j, "alloc_floor_cores", c.alloc_floor_cores);
  detail::take(j, "hidden", c.hidden);
  detail::take(j, "gamma", c.gamma);
  detail::take(j, "lr", c.lr);
  detail::take(j, "max_grad_norm", c.max_grad_norm);
  detail::take(j, "rho", c.rho);
  detail::take(j, "batch_size", c.batch_size);
  detail::take(j, "eta_init", c.eta_init);
  if (j.contains("target_entropy")) c.target_entropy = j.at("target_entropy").get<double>();
  detail::take(j, "replay_capacity", c.replay_capacity);
  detail::take(j, "total_steps", c.total_steps);
  detail::take(j, "asa_steps", c.asa_steps);
  detail::take(j, "ca_steps", c.ca_steps);
  detail::take(j, "rsc_steps", c.rsc_steps);
  detail::take(j, "e_time", c.e_time);
  detail::take(j, "checkpoint_every", c.checkpoint_every);
  detail::take(j, "eval_user_counts", c.eval_user_counts);
  detail::take(j, "eval_duration", c.eval_duration);
  detail::take(j, "transfer_total_steps", c.transfer_total_steps);
  detail::take(j, "transfer_asa_steps", c.transfer_asa_steps);

  if (j.contains("classifier")) {
    const auto& cj = j.at("classifier");
    detail::reject_unknown_keys(cj, {"lr", "batch", "max_updates"}, "classifier");
    detail::take(cj, "lr", c.classifier.lr);
    detail::take(cj, "batch", c.classifier.batch);
    detail::take(cj, "max_updates", c.classifier.max_updates);
  }
  if (j.contains("autoscale")) {
    const auto& aj = j.at("autoscale");
    detail::reject_unknown_keys(
        aj, {"low_max", "dead_max", "mid_max", "down_factor", "mid_factor", "high_factor"},
        "autoscale");
    detail::take(aj, "low_max", c.autoscale.low_max);
    detail::take(aj, "dead_max", c.autoscale.dead_max);
    detail::take(aj, "mid_max", c.autoscale.mid_max);
    detail::take(aj, "down_factor", c.autoscale.down_factor);
    detail::take(aj, "mid_factor", c.autoscale.mid_factor);
    detail::take(aj, "high_factor", c.autoscale.high_factor);
  }
  c.autoscale.floor_cores = c.alloc_floor_cores;

  // default evaluation sweep: five counts inside the training range plus one
  // extrapolated 10% past the top
  if (c.eval_user_counts.empty()) {
    const auto& w = c.topology.workload();
    for (int i = 0; i < 5; ++i) {
      const double f = static_cast<double>(i) / 4.0;
      c.eval_user_counts.push_back(
          static_cast<int>(std::lround(w.user_min + f * (w.user_max - w.user_min))));
    }
    c.eval_user_counts.push_back(static_cast<int>(std::lround(w.user_max * 1.1)));
  }

  validate_config(c);
  return c;
}

// A relative topology path inside the file resolves against the file's own
// directory, so configs load the same from any working directory.
inline ExperimentConfig load_config(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (j.is_object() && j.contains("topology") && j.at("topology").is_string()) {
    const std::filesystem::path tp(j.at("topology").get<std::string>());
    if (tp.is_relative())
      j["topology"] = (std::filesystem::path(path).parent_path() / tp).string();
  }
  return parse_config(j);
}

}  // namespace corerl
