#pragma once

#include <deque>
#include <vector>

#include "corerl/config.hpp"
#include "corerl/features.hpp"
#include "corerl/mdp.hpp"
#include "corerl/simulate.hpp"

namespace corerl {

struct EnvStep {
  Matrix state;        // stacked M x (k*n) raw observation after the action
  double reward = 0.0;
  bool qos_met = true;
  double p99_ms = 0.0;
  double total_alloc_cores = 0.0;
  Vector executed_fraction;  // floor-clamped allocation as a fraction of caps
};

// Control-loop wrapper around the simulator: applies fractional allocations,
// advances one interval, maintains the latency snapshot and the k-frame
// observation history, and scores the reward on the executed action.
class Environment {
 public:
  explicit Environment(const ExperimentConfig& cfg)
      : cfg_(&cfg),
        caps_(CoreCaps::from(cfg.topology.caps())),
        assembler_(cfg.topology, cfg.m_max, cfg.qos_ms) {}

  // Warmup at full caps primes queues, counter baselines, the latency
  // snapshot, and the observation history. Returns the initial stacked state.
  Matrix reset(int users, RngStream& rng, bool enforce_user_range = true) {
    users_ = users;
    window_ = LatencyWindow();
    assembler_.reset();
    history_.clear();
    prev_action_ = Vector::Ones(caps_.u.size());
    const auto on_step = [&](const SimState& s, const StepOutcome& out) {
      window_.update(out.completed_latency_s);
      Matrix obs = assembler_.assemble(s, out, window_, prev_action_, cfg_->t_length_s);
      push_history(std::move(obs));
    };
    state_ = reset_and_warmup(cfg_->topology, users, static_cast<int>(cfg_->w_steps),
                              cfg_->t_length_s, rng, on_step, enforce_user_range);
    if (history_.empty()) {
      // W=0: synthesize the initial observation from an idle step at full caps
      StepOutcome out = sim_step(state_, cfg_->topology, cfg_->topology.caps(), 0,
                                 cfg_->t_length_s, &rng);
      window_.update(out.completed_latency_s);
      push_history(assembler_.assemble(state_, out, window_, prev_action_, cfg_->t_length_s));
    }
    return stack_observations(history_, cfg_->stack_k);
  }

  // a_fraction in [0,1]^M scales the per-node caps; the executed allocation is
  // floor-clamped and the reward is computed on the executed fraction.
  EnvStep step(const Vector& a_fraction, RngStream& rng) {
    const Vector cores = scale_action(a_fraction, caps_, cfg_->alloc_floor_cores);
    std::vector<double> alloc(cores.data(), cores.data() + cores.size());
    const std::int64_t arrivals = generate_arrivals(
        users_, cfg_->topology.workload().requests_per_user_per_s, cfg_->t_length_s, rng);
    const StepOutcome out = sim_step(state_, cfg_->topology, alloc, arrivals, cfg_->t_length_s, &rng);
    window_.update(out.completed_latency_s);

    EnvStep r;
    r.executed_fraction = cores.cwiseQuotient(caps_.u);
    r.p99_ms = window_.p99_ms();
    r.qos_met = r.p99_ms <= cfg_->qos_ms;
    r.reward = reward(r.p99_ms, cfg_->qos_ms, r.executed_fraction, caps_, cfg_->alpha);
    r.total_alloc_cores = cores.sum();

    Matrix obs = assembler_.assemble(state_, out, window_, r.executed_fraction, cfg_->t_length_s);
    push_history(std::move(obs));
    prev_action_ = r.executed_fraction;
    r.state = stack_observations(history_, cfg_->stack_k);
    last_outcome_ = out;
    return r;
  }

  const CoreCaps& caps() const { return caps_; }
  int users() const { return users_; }
  const StepOutcome& last_outcome() const { return last_outcome_; }
  const SimState& sim_state() const { return state_; }

 private:
  void push_history(Matrix obs) {
    history_.push_back(std::move(obs));
    while (static_cast<int>(history_.size()) > cfg_->stack_k) history_.pop_front();
  }

  const ExperimentConfig* cfg_;
  CoreCaps caps_;
  ObservationAssembler assembler_;
  LatencyWindow window_;
  std::deque<Matrix> history_;
  SimState state_;
  Vector prev_action_;
  int users_ = 0;
  StepOutcome last_outcome_;
};

}  // namespace corerl
