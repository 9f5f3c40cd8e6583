#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/net.hpp"

namespace corerl {

// Adam over an ordered list of parameter spans. Moment buffers are indexed by
// span position, so the span list must be collected in the same order on every
// call (collect_spans guarantees that).
class Adam {
 public:
  Adam() = default;
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void init(const std::vector<ParamSpan>& params) {
    m_.clear();
    v_.clear();
    for (const auto& s : params) {
      m_.push_back(Vector::Zero(s.n));
      v_.push_back(Vector::Zero(s.n));
    }
    t_ = 0;
  }

  void step(const std::vector<ParamSpan>& params, const std::vector<ParamSpan>& grads) {
    if (params.size() != grads.size() || params.size() != m_.size())
      throw ConfigError("adam: span list mismatch");
    t_++;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].n != grads[i].n) throw ConfigError("adam: span size mismatch");
      auto p = Eigen::Map<Vector>(params[i].p, params[i].n);
      auto g = Eigen::Map<const Vector>(grads[i].p, grads[i].n);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      p.array() -= lr_ * (m_[i].array() / bc1) /
                   ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }
  std::vector<Vector>& m() { return m_; }
  std::vector<Vector>& v() { return v_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

inline double global_grad_norm(const std::vector<ParamSpan>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += Eigen::Map<const Vector>(g.p, g.n).squaredNorm();
  return std::sqrt(sq);
}

// scales gradients in place when the global L2 norm exceeds max_norm;
// returns the pre-clip norm
inline double clip_grad_norm(const std::vector<ParamSpan>& grads, double max_norm) {
  const double norm = global_grad_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) Eigen::Map<Vector>(g.p, g.n) *= scale;
  }
  return norm;
}

// target <- rho * target + (1 - rho) * online
inline void polyak_update(const std::vector<ParamSpan>& target,
                          const std::vector<ParamSpan>& online, double rho) {
  if (target.size() != online.size()) throw ConfigError("polyak: span list mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].n != online[i].n) throw ConfigError("polyak: span size mismatch");
    auto t = Eigen::Map<Vector>(target[i].p, target[i].n);
    auto o = Eigen::Map<const Vector>(online[i].p, online[i].n);
    t = rho * t + (1.0 - rho) * o;
  }
}

}  // namespace corerl
