#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "corerl/features.hpp"
#include "corerl/mdp.hpp"
#include "corerl/nets.hpp"
#include "corerl/optim.hpp"

namespace corerl {

struct SacConfig {
  double gamma = 0.9;
  double lr = 3e-5;
  double max_grad_norm = 40.0;
  double rho = 0.995;
  int batch_size = 100;
  double target_entropy = -1.0;
  double eta_init = 1.0;
};

struct UpdateMetrics {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double actor_loss = 0.0;
  double eta = 0.0;
  double entropy = 0.0;  // mean joint entropy estimate -log pi over the batch
  double q1_grad_norm = 0.0;
  double q2_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
};

inline Vector segment_sum(const Vector& rows, int b, int m) {
  Vector out(b);
  for (int i = 0; i < b; ++i)
    out(i) = rows.segment(static_cast<Eigen::Index>(i) * m, m).sum();
  return out;
}

inline Vector segment_mean(const Vector& rows, int b, int m) {
  return segment_sum(rows, b, m) / static_cast<double>(m);
}

// Q(s, a) with the row-mean convention that makes the critic invariant to row
// permutation and duplication.
inline double critic_value(const CriticNet& c, const Matrix& rows, const Vector& a) {
  return c.forward_rows(rows, a).mean();
}

// Fraction of policy parameters shared across microservices. A microservice's
// one-hot identifier bit is constant across its k stacked frames, so the k
// first-layer weights it touches per hidden unit act only through their sum:
// one effective microservice-specific parameter per hidden unit.
inline double policy_sharing_fraction(const PolicyNet& p) {
  const double unique = static_cast<double>(p.trunk.layers[0].w.rows());
  return 1.0 - unique / static_cast<double>(p.param_count());
}

class SacAgent {
 public:
  SacAgent(int input_dim, int hidden, int depth, const SacConfig& cfg, RngStream& init_rng)
      : cfg_(cfg),
        input_dim_(input_dim),
        policy_(PolicyNet::make(input_dim, hidden, depth, init_rng)),
        q1_(CriticNet::make(input_dim, hidden, init_rng)),
        q2_(CriticNet::make(input_dim, hidden, init_rng)),
        q1_target_(q1_),
        q2_target_(q2_),
        log_eta_(std::log(cfg.eta_init)),
        opt_policy_(cfg.lr),
        opt_q1_(cfg.lr),
        opt_q2_(cfg.lr),
        opt_eta_(cfg.lr) {
    if (!(cfg.eta_init > 0.0)) throw ConfigError("sac: eta_init must be positive");
    std::vector<ParamSpan> s;
    collect_spans(policy_, s);
    opt_policy_.init(s);
    s.clear();
    collect_spans(q1_, s);
    opt_q1_.init(s);
    s.clear();
    collect_spans(q2_, s);
    opt_q2_.init(s);
    opt_eta_.init(eta_span());
  }

  Vector act(const Matrix& std_state_rows, bool stochastic, RngStream& rng) const {
    if (std_state_rows.cols() != input_dim_) throw ConfigError("sac: state width mismatch");
    return stochastic ? policy_.sample(std_state_rows, rng).a
                      : policy_.mean_action(std_state_rows).a;
  }

  // Bellman targets y = r + gamma * (1 - d) * (min_i Qhat_i(s', a') + eta * H')
  // with a' freshly sampled from the current policy and H' = -log pi(a'|s').
  Vector compute_targets(const Matrix& s_next, const Vector& r, const std::vector<char>& done,
                         int b, int m, RngStream& rng) const {
    auto pi = policy_.sample(s_next, rng);
    Vector logp = segment_sum(pi.logp_row, b, m);
    Vector qh1 = segment_mean(q1_target_.forward_rows(s_next, pi.a), b, m);
    Vector qh2 = segment_mean(q2_target_.forward_rows(s_next, pi.a), b, m);
    const double eta = std::exp(log_eta_);
    Vector y(b);
    for (int i = 0; i < b; ++i) {
      const double soft = std::min(qh1(i), qh2(i)) - eta * logp(i);
      y(i) = r(i) + (done[static_cast<std::size_t>(i)] ? 0.0 : cfg_.gamma * soft);
    }
    return y;
  }

  // One full SAC step in the fixed order: critics, actor, entropy, targets.
  UpdateMetrics update(const std::vector<const Transition*>& batch,
                       const StandardizationStats& stats, int m_max, RngStream& rng) {
    const int b = static_cast<int>(batch.size());
    if (b == 0) throw ConfigError("sac: empty batch");
    const int m = static_cast<int>(batch[0]->s.rows());
    for (const Transition* t : batch)
      if (t->s.rows() != m || t->s.cols() != input_dim_)
        throw ConfigError("sac: inconsistent transition shapes in batch");

    Matrix s(b * m, input_dim_), s_next(b * m, input_dim_);
    Vector a(b * m), r(b);
    std::vector<char> done(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
      const Transition& t = *batch[static_cast<std::size_t>(i)];
      s.middleRows(static_cast<Eigen::Index>(i) * m, m) = standardize(t.s, stats, m_max);
      s_next.middleRows(static_cast<Eigen::Index>(i) * m, m) =
          standardize(t.s_next, stats, m_max);
      a.segment(static_cast<Eigen::Index>(i) * m, m) = t.a;
      r(i) = t.r;
      done[static_cast<std::size_t>(i)] = t.done ? 1 : 0;
    }

    UpdateMetrics mtr;
    const double eta = std::exp(log_eta_);
    mtr.eta = eta;

    Vector y = compute_targets(s_next, r, done, b, m, rng);

    // critic descent on the squared Bellman error, each critic independently
    auto critic_step = [&](CriticNet& qnet, Adam& opt, double& loss_out, double& norm_out) {
      CriticNet::Cache cache;
      Vector q_rows = qnet.forward_rows(s, a, &cache);
      Vector q = segment_mean(q_rows, b, m);
      Vector err = q - y;
      loss_out = err.squaredNorm() / b;
      Vector dq_rows(b * m);
      for (int i = 0; i < b; ++i)
        dq_rows.segment(static_cast<Eigen::Index>(i) * m, m)
            .setConstant(2.0 * err(i) / (static_cast<double>(b) * m));
      CriticNet::Grads grads;
      qnet.backward(cache, dq_rows, &grads, true);
      std::vector<ParamSpan> gs, ps;
      collect_spans(grads, gs);
      norm_out = clip_grad_norm(gs, cfg_.max_grad_norm);
      collect_spans(qnet, ps);
      opt.step(ps, gs);
    };
    critic_step(q1_, opt_q1_, mtr.q1_loss, mtr.q1_grad_norm);
    critic_step(q2_, opt_q2_, mtr.q2_loss, mtr.q2_grad_norm);

    // actor ascent on min_i Q_i(s, a~) + eta * H(a~); critics stay fixed and
    // only supply gradients through the action input
    PolicyNet::Cache pi_cache;
    auto pi = policy_.forward_with_eps(
        s, Vector::NullaryExpr(static_cast<Eigen::Index>(b) * m, [&]() { return rng.normal(); }),
        &pi_cache);
    Vector logp = segment_sum(pi.logp_row, b, m);
    CriticNet::Cache c1, c2;
    Vector q1_rows = q1_.forward_rows(s, pi.a, &c1);
    Vector q2_rows = q2_.forward_rows(s, pi.a, &c2);
    Vector q1v = segment_mean(q1_rows, b, m);
    Vector q2v = segment_mean(q2_rows, b, m);
    Vector dq1_rows = Vector::Zero(b * m), dq2_rows = Vector::Zero(b * m);
    double actor_loss = 0.0;
    for (int i = 0; i < b; ++i) {
      const double qmin = std::min(q1v(i), q2v(i));
      actor_loss += eta * logp(i) - qmin;
      // dL/dQmin = -1/B, split per row through the argmin critic
      auto& dq = (q1v(i) <= q2v(i)) ? dq1_rows : dq2_rows;
      dq.segment(static_cast<Eigen::Index>(i) * m, m)
          .setConstant(-1.0 / (static_cast<double>(b) * m));
    }
    mtr.actor_loss = actor_loss / b;
    mtr.entropy = -logp.mean();
    CriticNet::Grads none1, none2;
    Vector da = q1_.backward(c1, dq1_rows, &none1, false) +
                q2_.backward(c2, dq2_rows, &none2, false);
    Vector dlogp_rows = Vector::Constant(static_cast<Eigen::Index>(b) * m,
                                         eta / static_cast<double>(b));
    PolicyNet::Grads pgrads;
    policy_.backward(pi_cache, da, dlogp_rows, &pgrads);
    std::vector<ParamSpan> pg, pp;
    collect_spans(pgrads, pg);
    mtr.actor_grad_norm = clip_grad_norm(pg, cfg_.max_grad_norm);
    collect_spans(policy_, pp);
    opt_policy_.step(pp, pg);

    // entropy coefficient: minimize -log_eta * mean(log pi + t_H), so eta
    // grows when entropy sits below the target and shrinks above it
    const double c = (logp.array() + cfg_.target_entropy).mean();
    double eta_grad = -c;
    std::vector<ParamSpan> eg{{&eta_grad, 1}};
    opt_eta_.step(eta_span(), eg);

    // polyak averaging of the target critics
    std::vector<ParamSpan> t1, o1, t2, o2;
    collect_spans(q1_target_, t1);
    collect_spans(q1_, o1);
    polyak_update(t1, o1, cfg_.rho);
    collect_spans(q2_target_, t2);
    collect_spans(q2_, o2);
    polyak_update(t2, o2, cfg_.rho);

    return mtr;
  }

  double eta() const { return std::exp(log_eta_); }
  double log_eta() const { return log_eta_; }
  void set_log_eta(double v) { log_eta_ = v; }
  const SacConfig& config() const { return cfg_; }
  int input_dim() const { return input_dim_; }

  PolicyNet& policy() { return policy_; }
  const PolicyNet& policy() const { return policy_; }
  CriticNet& q1() { return q1_; }
  CriticNet& q2() { return q2_; }
  CriticNet& q1_target() { return q1_target_; }
  CriticNet& q2_target() { return q2_target_; }
  Adam& opt_policy() { return opt_policy_; }
  Adam& opt_q1() { return opt_q1_; }
  Adam& opt_q2() { return opt_q2_; }
  Adam& opt_eta() { return opt_eta_; }

  std::vector<ParamSpan> eta_span() { return {{&log_eta_, 1}}; }

  std::uint64_t policy_checksum() {
    std::vector<ParamSpan> s;
    collect_spans(policy_, s);
    return param_checksum(s);
  }

 private:
  SacConfig cfg_;
  int input_dim_;
  PolicyNet policy_;
  CriticNet q1_, q2_;
  CriticNet q1_target_, q2_target_;
  double log_eta_;
  Adam opt_policy_, opt_q1_, opt_q2_, opt_eta_;
};

}  // namespace corerl
