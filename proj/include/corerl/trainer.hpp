#pragma once

#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "corerl/autoscale.hpp"
#include "corerl/checkpoint.hpp"
#include "corerl/config.hpp"
#include "corerl/env.hpp"
#include "corerl/explore.hpp"
#include "corerl/metrics.hpp"
#include "corerl/sac.hpp"

namespace corerl {

inline constexpr int kPolicyDepth = 7;
inline constexpr int kClassifierDepth = 5;

inline int input_width(const ExperimentConfig& c) {
  return c.stack_k * feature_count(c.m_max);
}

inline SacConfig sac_config_from(const ExperimentConfig& c) {
  SacConfig s;
  s.gamma = c.gamma;
  s.lr = c.lr;
  s.max_grad_norm = c.max_grad_norm;
  s.rho = c.rho;
  s.batch_size = c.batch_size;
  s.target_entropy = c.resolved_target_entropy();
  s.eta_init = c.eta_init;
  return s;
}

inline SacAgent make_agent(const ExperimentConfig& c, RngStream& init_rng) {
  return SacAgent(input_width(c), c.hidden, kPolicyDepth, sac_config_from(c), init_rng);
}

inline QosClassifier make_classifier(const ExperimentConfig& c, RngStream& init_rng) {
  return QosClassifier::make(input_width(c), c.hidden, kClassifierDepth, c.classifier.lr,
                             init_rng);
}

// ---- evaluation ----

// policy: (raw stacked state, env, fresh) -> action fraction; fresh marks the
// first step after a reset.
template <typename PolicyFn>
inline RunMetrics evaluate_policy(const ExperimentConfig& cfg, const std::vector<int>& users,
                                  std::int64_t duration, RngStream& rng, PolicyFn&& policy,
                                  bool enforce_user_range = false) {
  RunMetrics m;
  Environment env(cfg);
  std::int64_t step = 0;
  for (int u : users) {
    Matrix s = env.reset(u, rng, enforce_user_range);
    bool fresh = true;
    for (std::int64_t i = 0; i < duration; ++i) {
      const Vector a = policy(s, env, fresh);
      fresh = false;
      EnvStep es = env.step(a, rng);
      m.steps.push_back({step++, u, es.p99_ms, es.qos_met, es.total_alloc_cores, es.reward});
      s = std::move(es.state);
    }
  }
  return m;
}

// Mean-mode evaluation of a frozen agent. Asserts no parameter moved.
inline RunMetrics evaluate_agent(SacAgent& agent, const ExperimentConfig& cfg,
                                 const StandardizationStats& stats,
                                 const std::vector<int>& users, std::int64_t duration,
                                 std::uint64_t eval_seed = 0) {
  std::vector<ParamSpan> spans;
  collect_spans(agent.policy(), spans);
  collect_spans(agent.q1(), spans);
  collect_spans(agent.q2(), spans);
  const std::uint64_t before = param_checksum(spans);

  RngStream rng(cfg.seed ^ eval_seed, "eval");
  RngStream act_rng(cfg.seed ^ eval_seed, "eval-act");
  RunMetrics m = evaluate_policy(
      cfg, users, duration, rng,
      [&](const Matrix& s, const Environment&, bool) {
        return agent.act(standardize(s, stats, cfg.m_max), false, act_rng);
      });
  if (param_checksum(spans) != before)
    throw NetError("evaluation must not change network parameters");
  return m;
}

// Threshold controller for evaluation sweeps and seed-phase collection. Scales
// from the executed allocation so the feedback loop sees the quota that
// produced the measured utilization.
class AutoScalePolicy {
 public:
  AutoScalePolicy(const ExperimentConfig& cfg, const CoreCaps& caps)
      : cfg_(&cfg), caps_(&caps) {}

  Vector recommend(const Environment& env, bool fresh) {
    if (fresh)
      rec_ = caps_->u;
    else
      rec_ = autoscale_step(executed_, utilization(env.last_outcome(), cfg_->t_length_s),
                            *caps_, cfg_->autoscale);
    executed_ = rec_;
    return rec_;
  }

  // executed cores may differ from the recommendation (seed-phase noise)
  void note_executed(const Vector& cores) { executed_ = cores; }

  Vector operator()(const Matrix&, const Environment& env, bool fresh) {
    return recommend(env, fresh).cwiseQuotient(caps_->u);
  }

 private:
  const ExperimentConfig* cfg_;
  const CoreCaps* caps_;
  Vector rec_;
  Vector executed_;
};

inline RunMetrics evaluate_autoscale(const ExperimentConfig& cfg, const std::vector<int>& users,
                                     std::int64_t duration, std::uint64_t eval_seed = 0) {
  RngStream rng(cfg.seed ^ eval_seed, "eval-autoscale");
  CoreCaps caps = CoreCaps::from(cfg.topology.caps());
  return evaluate_policy(cfg, users, duration, rng, AutoScalePolicy(cfg, caps));
}

// ---- training ----

struct TrainerOptions {
  std::string out_dir;
  bool resume = false;
  bool write_replay = true;
  bool realtime = false;  // restore one control interval of wall-clock pacing per step
  bool trace = false;     // per-step per-node allocation CSV
  // called at each episode boundary with the RL step count; return true to
  // stop training early (used by the transfer parity probe)
  std::function<bool(std::int64_t)> on_episode_end;
};

struct TrainResult {
  std::int64_t steps_done = 0;
  std::int64_t rl_steps_done = 0;
  bool stopped_early = false;
  std::string checkpoint_path;
  std::string metrics_path;
  RunMetrics metrics;
};

class Trainer {
 public:
  Trainer(ExperimentConfig cfg, TrainerOptions opt)
      : cfg_(std::move(cfg)),
        opt_(std::move(opt)),
        caps_(CoreCaps::from(cfg_.topology.caps())),
        env_(cfg_),
        workload_rng_(cfg_.seed, "workload"),
        env_rng_(cfg_.seed, "env"),
        act_rng_(cfg_.seed, "act"),
        augment_rng_(cfg_.seed, "augment"),
        update_rng_(cfg_.seed, "update"),
        clf_rng_(cfg_.seed, "clf-train"),
        seed_rng_(cfg_.seed, "seed-noise"),
        init_rng_(cfg_.seed, "init"),
        agent_(make_agent(cfg_, init_rng_)),
        clf_(make_classifier(cfg_, init_rng_)),
        replay_(cfg_.replay_capacity),
        stats_(StandardizationStats::zeros(feature_count(cfg_.m_max))) {
    namespace fs = std::filesystem;
    if (opt_.out_dir.empty()) throw ConfigError("trainer: output directory required");
    fs::create_directories(opt_.out_dir);
  }

  SacAgent& agent() { return agent_; }
  QosClassifier& classifier() { return clf_; }
  void set_episode_callback(std::function<bool(std::int64_t)> cb) {
    opt_.on_episode_end = std::move(cb);
  }
  const StandardizationStats& stats() const { return stats_; }
  const ExperimentConfig& config() const { return cfg_; }
  ReplayBuffer& replay() { return replay_; }
  std::int64_t step() const { return t_; }

  std::string checkpoint_path() const { return join("checkpoint.bin"); }
  std::string metrics_path() const { return join("metrics.csv"); }
  std::string summary_path() const { return join("summary.csv"); }
  std::string updates_path() const { return join("updates.csv"); }
  std::string replay_path() const { return join("replay.bin"); }
  std::string trace_path() const { return join("trace.csv"); }

  TrainResult run() {
    if (opt_.resume && std::filesystem::exists(checkpoint_path()))
      restore();
    else if (opt_.write_replay)
      writer_.open(replay_path(), static_cast<std::uint32_t>(cfg_.topology.size()),
                   static_cast<std::uint32_t>(input_width(cfg_)), 0);

    bool stopped = false;
    run_seed_phase();
    stopped = run_rl_phase();

    if (opt_.write_replay) writer_.close();
    TrainResult r;
    r.steps_done = t_;
    r.rl_steps_done = t_ - cfg_.asa_steps;
    r.stopped_early = stopped;
    r.checkpoint_path = checkpoint_path();
    r.metrics_path = metrics_path();
    r.metrics = metrics_;
    return r;
  }

 private:
  std::string join(const char* name) const {
    return (std::filesystem::path(opt_.out_dir) / name).string();
  }

  int draw_users() {
    const auto& w = cfg_.topology.workload();
    return static_cast<int>(workload_rng_.uniform_int(w.user_min, w.user_max));
  }

  void record_step(int users, const EnvStep& es) {
    metrics_.steps.push_back(
        {t_, users, es.p99_ms, es.qos_met, es.total_alloc_cores, es.reward});
    if (opt_.trace) trace_.emplace_back(t_, es.executed_fraction.cwiseProduct(caps_.u));
  }

  void push_transition(const Matrix& s, const EnvStep& es, bool done) {
    Transition tr{s, es.executed_fraction, es.reward, es.state, done};
    if (opt_.write_replay) writer_.append(tr);
    replay_.push(std::move(tr));
  }

  void recompute_stats() {
    StatsAccumulator acc(feature_count(cfg_.m_max));
    replay_.for_each([&](const Transition& tr) { acc.add_state(tr.s); });
    stats_ = acc.finalize();
  }

  void retrain_classifier() {
    classifier_train(clf_, replay_, stats_, cfg_.m_max, cfg_.classifier.batch,
                     cfg_.classifier.max_updates, clf_rng_);
  }

  void pace() {
    if (opt_.realtime)
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.t_length_s));
  }

  void run_seed_phase() {
    while (t_ < cfg_.asa_steps) {
      const int users = draw_users();
      Matrix s = env_.reset(users, env_rng_);
      AutoScalePolicy ctl(cfg_, caps_);
      const std::int64_t len = std::min<std::int64_t>(cfg_.e_time, cfg_.asa_steps - t_);
      for (std::int64_t i = 0; i < len; ++i) {
        const Vector rec = ctl.recommend(env_, i == 0);
        const Vector cores = seed_noise(rec, caps_, cfg_.alloc_floor_cores, seed_rng_);
        EnvStep es = env_.step(cores.cwiseQuotient(caps_.u), env_rng_);
        ctl.note_executed(es.executed_fraction.cwiseProduct(caps_.u));
        record_step(users, es);
        push_transition(s, es, i == len - 1);
        s = std::move(es.state);
        t_++;
        pace();
      }
    }
    if (t_ == cfg_.asa_steps && !seeded_state_ready_) {
      recompute_stats();
      retrain_classifier();
      seeded_state_ready_ = true;
      save_state();
    }
  }

  bool run_rl_phase() {
    while (t_ < cfg_.total_steps) {
      const int users = draw_users();
      Matrix s = env_.reset(users, env_rng_);
      const std::int64_t episode_start_rl = t_ - cfg_.asa_steps;
      const std::int64_t len = std::min<std::int64_t>(cfg_.e_time, cfg_.total_steps - t_);
      for (std::int64_t i = 0; i < len; ++i) {
        const std::int64_t t_rl = t_ - cfg_.asa_steps;
        const Matrix s_std = standardize(s, stats_, cfg_.m_max);
        const Vector a_pi = agent_.act(s_std, true, act_rng_);
        const Vector a_req =
            t_rl < cfg_.ca_steps
                ? augment_action(clf_.net, s_std, a_pi,
                                 keep_probability(static_cast<std::size_t>(t_rl),
                                                  static_cast<std::size_t>(cfg_.ca_steps)),
                                 augment_rng_)
                : a_pi;
        EnvStep es = env_.step(a_req, env_rng_);
        record_step(users, es);
        push_transition(s, es, i == len - 1);
        s = std::move(es.state);
        t_++;
        if ((t_ - cfg_.asa_steps) % cfg_.rsc_steps == 0 && t_ < cfg_.total_steps)
          recompute_stats();
        auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size), update_rng_);
        UpdateMetrics um = agent_.update(batch, stats_, cfg_.m_max, update_rng_);
        updates_.emplace_back(t_, um);
        pace();
      }
      if (episode_start_rl < cfg_.ca_steps) retrain_classifier();
      save_state();
      if (opt_.on_episode_end && opt_.on_episode_end(t_ - cfg_.asa_steps)) return true;
    }
    return false;
  }

  // Flush-then-checkpoint keeps the replay sidecar header paired with the
  // checkpoint; checkpoint writes go through a rename for atomicity.
  void save_state() {
    if (opt_.write_replay) writer_.flush();
    TrainerCheckpoint tc;
    tc.step = static_cast<std::uint64_t>(t_);
    tc.replay_count = opt_.write_replay ? writer_.count() : 0;
    tc.stats = stats_;
    tc.rng_states = {workload_rng_.serialize(), env_rng_.serialize(),  act_rng_.serialize(),
                     augment_rng_.serialize(),  update_rng_.serialize(), clf_rng_.serialize(),
                     seed_rng_.serialize()};
    const std::string tmp = checkpoint_path() + ".tmp";
    save_checkpoint(tmp, agent_, &clf_, tc);
    std::filesystem::rename(tmp, checkpoint_path());
    export_metrics(metrics_, metrics_path());
    export_summary(metrics_, summary_path());
    export_updates();
    if (opt_.trace) export_trace();
  }

  void restore() {
    TrainerCheckpoint tc;
    load_checkpoint(checkpoint_path(), agent_, &clf_, &tc);
    if (tc.rng_states.size() != 7)
      throw IoError("checkpoint: unexpected RNG stream count");
    workload_rng_.deserialize(tc.rng_states[0]);
    env_rng_.deserialize(tc.rng_states[1]);
    act_rng_.deserialize(tc.rng_states[2]);
    augment_rng_.deserialize(tc.rng_states[3]);
    update_rng_.deserialize(tc.rng_states[4]);
    clf_rng_.deserialize(tc.rng_states[5]);
    seed_rng_.deserialize(tc.rng_states[6]);
    stats_ = tc.stats;
    t_ = static_cast<std::int64_t>(tc.step);
    seeded_state_ready_ = t_ >= cfg_.asa_steps;

    if (opt_.write_replay) {
      std::uint64_t on_disk = 0;
      replay_ = load_replay(replay_path(), cfg_.replay_capacity, &on_disk);
      if (on_disk != tc.replay_count)
        throw IoError("checkpoint: replay sidecar does not pair with this checkpoint");
      writer_.open(replay_path(), static_cast<std::uint32_t>(cfg_.topology.size()),
                   static_cast<std::uint32_t>(input_width(cfg_)), tc.replay_count);
    }
    if (std::filesystem::exists(metrics_path())) metrics_ = import_metrics(metrics_path());
    if (std::filesystem::exists(updates_path())) import_updates();
    if (opt_.trace && std::filesystem::exists(trace_path())) import_trace();
  }

  void import_updates() {
    std::FILE* f = std::fopen(updates_path().c_str(), "rb");
    if (!f) throw IoError("trainer: cannot open " + updates_path());
    updates_.clear();
    char line[512];
    if (!std::fgets(line, sizeof line, f)) {
      std::fclose(f);
      return;
    }
    while (std::fgets(line, sizeof line, f)) {
      std::int64_t step = 0;
      UpdateMetrics u{};
      if (std::sscanf(line,
                      "%" SCNd64 ",%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &step, &u.q1_loss,
                      &u.q2_loss, &u.actor_loss, &u.eta, &u.entropy, &u.q1_grad_norm,
                      &u.q2_grad_norm, &u.actor_grad_norm) != 9) {
        std::fclose(f);
        throw IoError("trainer: malformed row in " + updates_path());
      }
      updates_.emplace_back(step, u);
    }
    std::fclose(f);
  }

  void import_trace() {
    std::FILE* f = std::fopen(trace_path().c_str(), "rb");
    if (!f) throw IoError("trainer: cannot open " + trace_path());
    trace_.clear();
    const int m = cfg_.topology.size();
    std::string line(64 + 32 * static_cast<std::size_t>(m), '\0');
    if (!std::fgets(line.data(), static_cast<int>(line.size()), f)) {
      std::fclose(f);
      return;
    }
    while (std::fgets(line.data(), static_cast<int>(line.size()), f)) {
      const char* p = line.c_str();
      char* end = nullptr;
      const std::int64_t step = std::strtoll(p, &end, 10);
      Vector alloc(m);
      for (int v = 0; v < m; ++v) {
        if (*end != ',') {
          std::fclose(f);
          throw IoError("trainer: malformed row in " + trace_path());
        }
        alloc(v) = std::strtod(end + 1, &end);
      }
      trace_.emplace_back(step, std::move(alloc));
    }
    std::fclose(f);
  }

  void export_updates() const {
    std::FILE* f = std::fopen(updates_path().c_str(), "wb");
    if (!f) throw IoError("trainer: cannot open " + updates_path());
    std::fprintf(f,
                 "step,q1_loss,q2_loss,actor_loss,eta,entropy,q1_grad_norm,q2_grad_norm,"
                 "actor_grad_norm\n");
    for (const auto& [step, u] : updates_)
      std::fprintf(f, "%" PRId64 ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step,
                   u.q1_loss, u.q2_loss, u.actor_loss, u.eta, u.entropy, u.q1_grad_norm,
                   u.q2_grad_norm, u.actor_grad_norm);
    std::fclose(f);
  }

  void export_trace() const {
    std::FILE* f = std::fopen(trace_path().c_str(), "wb");
    if (!f) throw IoError("trainer: cannot open " + trace_path());
    std::fprintf(f, "step");
    for (int v = 0; v < cfg_.topology.size(); ++v)
      std::fprintf(f, ",alloc_cores_%d", v);
    std::fprintf(f, "\n");
    for (const auto& [step, alloc] : trace_) {
      std::fprintf(f, "%" PRId64, step);
      for (Eigen::Index v = 0; v < alloc.size(); ++v) std::fprintf(f, ",%.17g", alloc(v));
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }

  ExperimentConfig cfg_;
  TrainerOptions opt_;
  CoreCaps caps_;
  Environment env_;
  RngStream workload_rng_, env_rng_, act_rng_, augment_rng_, update_rng_, clf_rng_, seed_rng_,
      init_rng_;
  SacAgent agent_;
  QosClassifier clf_;
  ReplayBuffer replay_;
  StandardizationStats stats_;
  ReplayWriter writer_;
  RunMetrics metrics_;
  std::vector<std::pair<std::int64_t, UpdateMetrics>> updates_;
  std::vector<std::pair<std::int64_t, Vector>> trace_;
  std::int64_t t_ = 0;
  bool seeded_state_ready_ = false;
};

// ---- transfer ----

namespace detail {

// First-layer input surgery: shared feature columns come from the source, the
// microservice-identifier columns keep their fresh initialization, resizing
// between identifier block widths. extra_cols covers inputs appended after the
// stacked state (the classifier's action column).
inline void transplant_layer0(DenseLayer& tgt, const DenseLayer& src, int k, int n_src,
                              int n_tgt, int extra_cols) {
  if (tgt.w.rows() != src.w.rows())
    throw ConfigError("transfer: hidden width mismatch");
  if (tgt.w.cols() != static_cast<Eigen::Index>(k) * n_tgt + extra_cols ||
      src.w.cols() != static_cast<Eigen::Index>(k) * n_src + extra_cols)
    throw ConfigError("transfer: unexpected first-layer input width");
  for (int f = 0; f < k; ++f) {
    for (int j = 0; j < kNumBaseFeatures; ++j)
      tgt.w.col(static_cast<Eigen::Index>(f) * n_tgt + j) =
          src.w.col(static_cast<Eigen::Index>(f) * n_src + j);
    tgt.w.col(static_cast<Eigen::Index>(f) * n_tgt + n_tgt - 1) =
        src.w.col(static_cast<Eigen::Index>(f) * n_src + n_src - 1);
  }
  for (int e = 0; e < extra_cols; ++e)
    tgt.w.col(static_cast<Eigen::Index>(k) * n_tgt + e) =
        src.w.col(static_cast<Eigen::Index>(k) * n_src + e);
  tgt.b = src.b;
}

inline void transplant_mlp_tail(Mlp& tgt, const Mlp& src) {
  if (tgt.layers.size() != src.layers.size())
    throw ConfigError("transfer: trunk depth mismatch");
  for (std::size_t i = 1; i < tgt.layers.size(); ++i) tgt.layers[i] = src.layers[i];
}

}  // namespace detail

// Copies every shared parameter of the source agent into a freshly constructed
// target agent; only first-layer identifier columns stay newly initialized.
// Targets restart as copies of the online critics; optimizer moments and the
// entropy coefficient stay fresh.
inline void transfer_parameters(SacAgent& tgt, SacAgent& src, int stack_k, int m_max_tgt,
                                int m_max_src) {
  const int n_tgt = feature_count(m_max_tgt);
  const int n_src = feature_count(m_max_src);
  if (tgt.input_dim() != stack_k * n_tgt || src.input_dim() != stack_k * n_src)
    throw ConfigError("transfer: agent widths do not match the stated schema");

  detail::transplant_layer0(tgt.policy().trunk.layers[0], src.policy().trunk.layers[0],
                            stack_k, n_src, n_tgt, 0);
  detail::transplant_mlp_tail(tgt.policy().trunk, src.policy().trunk);
  tgt.policy().mean_head = src.policy().mean_head;
  tgt.policy().logstd_head = src.policy().logstd_head;

  const auto move_critic = [&](CriticNet& t, CriticNet& s) {
    detail::transplant_layer0(t.pre.layers[0], s.pre.layers[0], stack_k, n_src, n_tgt, 0);
    detail::transplant_mlp_tail(t.pre, s.pre);
    t.post = s.post;
    t.head = s.head;
  };
  move_critic(tgt.q1(), src.q1());
  move_critic(tgt.q2(), src.q2());
  tgt.q1_target() = tgt.q1();
  tgt.q2_target() = tgt.q2();

  std::vector<ParamSpan> s;
  collect_spans(tgt.policy(), s);
  tgt.opt_policy().init(s);
  s.clear();
  collect_spans(tgt.q1(), s);
  tgt.opt_q1().init(s);
  s.clear();
  collect_spans(tgt.q2(), s);
  tgt.opt_q2().init(s);
  tgt.opt_eta().init(tgt.eta_span());
}

// milestone definition shared by both transfer arms
struct ParityProbe {
  std::vector<int> users;
  std::int64_t duration = 100;
  double autoscale_mean_alloc = 0.0;
};

inline ParityProbe make_parity_probe(const ExperimentConfig& cfg) {
  ParityProbe p;
  const auto& w = cfg.topology.workload();
  p.users = {w.user_min, (w.user_min + w.user_max) / 2, w.user_max};
  p.duration = std::min<std::int64_t>(100, cfg.eval_duration);
  RunMetrics as = evaluate_autoscale(cfg, p.users, p.duration);
  p.autoscale_mean_alloc = as.aggregate().back().mean_alloc_cores;
  return p;
}

inline bool probe_parity(SacAgent& agent, const ExperimentConfig& cfg,
                         const StandardizationStats& stats, const ParityProbe& probe) {
  RunMetrics m = evaluate_agent(agent, cfg, stats, probe.users, probe.duration);
  const UserAggregate overall = m.aggregate().back();
  return overall.violation_rate == 0.0 &&
         overall.mean_alloc_cores <= probe.autoscale_mean_alloc;
}

struct TransferArmResult {
  std::int64_t milestone_rl_steps = 0;  // budget cap when parity was never reached
  bool reached = false;
};

// One budget-matched arm: the transfer schedule replaces the training
// schedule, classifier assistance covers every RL step, and training stops at
// the first episode boundary whose mean-mode evaluation reaches AutoScale
// parity (zero violations at no more cores).
inline TransferArmResult run_transfer_arm(ExperimentConfig cfg, const std::string& out_dir,
                                          const ParityProbe& probe, SacAgent* source,
                                          int m_max_src) {
  cfg.total_steps = cfg.transfer_total_steps;
  cfg.asa_steps = cfg.transfer_asa_steps;
  cfg.ca_steps = cfg.total_steps - cfg.asa_steps;
  validate_config(cfg);

  TrainerOptions opt;
  opt.out_dir = out_dir;
  opt.write_replay = false;
  TransferArmResult result;
  result.milestone_rl_steps = cfg.total_steps - cfg.asa_steps;

  Trainer tr(cfg, std::move(opt));
  if (source)
    transfer_parameters(tr.agent(), *source, cfg.stack_k, cfg.m_max, m_max_src);
  tr.set_episode_callback([&](std::int64_t rl_steps) {
    if (!probe_parity(tr.agent(), tr.config(), tr.stats(), probe)) return false;
    result.milestone_rl_steps = rl_steps;
    result.reached = true;
    return true;
  });
  tr.run();
  return result;
}

struct TransferExperiment {
  ParityProbe probe;
  std::vector<TransferArmResult> transfer_arms;
  std::vector<TransferArmResult> scratch_arms;
  double mean_ratio = 1.0;
};

// Budget-matched comparison across seeds: each seed trains one arm warm-started
// from the source agent and one from scratch, sharing the parity milestone.
// The ratio averages transfer milestone over scratch milestone.
inline TransferExperiment run_transfer_experiment(const ExperimentConfig& target_cfg,
                                                  SacAgent& source, int m_max_src,
                                                  const std::string& out_dir, int seeds) {
  if (seeds < 1) throw ConfigError("transfer: need at least one seed");
  TransferExperiment ex;
  ex.probe = make_parity_probe(target_cfg);
  double ratio_sum = 0.0;
  for (int i = 0; i < seeds; ++i) {
    ExperimentConfig cfg = target_cfg;
    cfg.seed = target_cfg.seed + static_cast<std::uint64_t>(i);
    const std::string base =
        (std::filesystem::path(out_dir) / ("seed" + std::to_string(cfg.seed))).string();
    TransferArmResult warm =
        run_transfer_arm(cfg, base + "_transfer", ex.probe, &source, m_max_src);
    TransferArmResult cold = run_transfer_arm(cfg, base + "_scratch", ex.probe, nullptr, 0);
    ex.transfer_arms.push_back(warm);
    ex.scratch_arms.push_back(cold);
    ratio_sum += static_cast<double>(warm.milestone_rl_steps) /
                 static_cast<double>(cold.milestone_rl_steps);
  }
  ex.mean_ratio = ratio_sum / seeds;
  return ex;
}

}  // namespace corerl
