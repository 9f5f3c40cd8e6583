#pragma once

#include <cmath>
#include <vector>

#include "corerl/net.hpp"
#include "corerl/rng.hpp"

namespace corerl {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

// Row-wise shared-parameter policy. Every microservice row runs through the
// same trunk and scalar heads, so the parameter count is independent of M.
// Actions are sigmoid-squashed Gaussians; log-probs carry the change-of-
// variable term log|da/dx| = -softplus(x) - softplus(-x), summed over rows by
// the caller for the joint log-prob.
struct PolicyNet {
  Mlp trunk;
  DenseLayer mean_head;
  DenseLayer logstd_head;

  static PolicyNet make(int input_dim, int hidden, int depth, RngStream& rng) {
    PolicyNet p;
    p.trunk = make_trunk(input_dim, hidden, depth, rng);
    p.mean_head = make_layer(1, hidden, Activation::linear, rng, 1e-2);
    p.logstd_head = make_layer(1, hidden, Activation::linear, rng, 1e-2);
    return p;
  }

  struct Cache {
    Mlp::Cache trunk;
    Vector mu, logstd, eps, x, a;
    Vector clip_mask;
  };

  struct Output {
    Vector a;
    Vector logp_row;
    Vector mu;
    Vector logstd;
  };

  Output forward_with_eps(const Matrix& rows, const Vector& eps, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    trunk.forward(rows, &c.trunk);
    const Matrix& h = c.trunk.acts.back();
    c.mu = (h * mean_head.w.transpose()).col(0).array() + mean_head.b(0);
    Vector raw = (h * logstd_head.w.transpose()).col(0).array() + logstd_head.b(0);
    c.clip_mask = ((raw.array() > kLogStdMin) && (raw.array() < kLogStdMax)).cast<double>();
    c.logstd = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    c.eps = eps;
    c.x = c.mu.array() + c.logstd.array().exp() * eps.array();
    c.a = c.x.unaryExpr([](double v) { return sigmoid(v); });
    if (!c.a.allFinite() || !c.mu.allFinite())
      throw NetError("policy: non-finite output (NaN in parameters?)");
    Output o;
    o.a = c.a;
    o.mu = c.mu;
    o.logstd = c.logstd;
    o.logp_row = Vector(c.x.size());
    for (Eigen::Index i = 0; i < c.x.size(); ++i)
      o.logp_row(i) = -0.5 * c.eps(i) * c.eps(i) - c.logstd(i) - kHalfLog2Pi +
                      softplus(c.x(i)) + softplus(-c.x(i));
    return o;
  }

  Output sample(const Matrix& rows, RngStream& rng, Cache* cache = nullptr) const {
    Vector eps(rows.rows());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    return forward_with_eps(rows, eps, cache);
  }

  Output mean_action(const Matrix& rows, Cache* cache = nullptr) const {
    return forward_with_eps(rows, Vector::Zero(rows.rows()), cache);
  }

  // log-prob of arbitrary in-range actions, for tests and density checks
  Vector log_prob_rows(const Matrix& rows, const Vector& a) const {
    Matrix h = trunk.forward(rows);
    Vector mu = (h * mean_head.w.transpose()).col(0).array() + mean_head.b(0);
    Vector logstd = ((h * logstd_head.w.transpose()).col(0).array() + logstd_head.b(0))
                        .cwiseMax(kLogStdMin)
                        .cwiseMin(kLogStdMax);
    Vector out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = std::log(a(i)) - std::log1p(-a(i));
      const double eps = (x - mu(i)) / std::exp(logstd(i));
      out(i) = -0.5 * eps * eps - logstd(i) - kHalfLog2Pi + softplus(x) + softplus(-x);
    }
    return out;
  }

  struct Grads {
    std::vector<LayerGrad> trunk;
    LayerGrad mean_head, logstd_head;
  };

  // Upstream gradients arrive on the squashed action and on the per-row
  // log-prob; eps is held fixed (reparameterization). With s = a(1-a):
  //   da/dmu = s,            da/dlogstd = s * (x - mu)
  //   dlogp/dmu = 2a - 1,    dlogp/dlogstd = -1 + (2a - 1)(x - mu)
  // and the logstd path is masked where the clip was active.
  void backward(const Cache& c, const Vector& dl_da, const Vector& dl_dlogp, Grads* g) const {
    const Matrix& h = c.trunk.acts.back();
    Vector s = c.a.array() * (1.0 - c.a.array());
    Vector two_a_1 = 2.0 * c.a.array() - 1.0;
    Vector xm = c.x - c.mu;
    Vector dmu = dl_da.cwiseProduct(s) + dl_dlogp.cwiseProduct(two_a_1);
    Vector dls = dl_da.cwiseProduct(s).cwiseProduct(xm) +
                 dl_dlogp.cwiseProduct((two_a_1.cwiseProduct(xm).array() - 1.0).matrix());
    dls = dls.cwiseProduct(c.clip_mask);
    g->mean_head.w = dmu.transpose() * h;
    g->mean_head.b = Vector::Constant(1, dmu.sum());
    g->logstd_head.w = dls.transpose() * h;
    g->logstd_head.b = Vector::Constant(1, dls.sum());
    Matrix dh = dmu * mean_head.w + dls * logstd_head.w;
    trunk.backward(c.trunk, dh, &g->trunk);
  }

  std::int64_t param_count() const {
    return trunk.param_count() + mean_head.w.size() + mean_head.b.size() +
           logstd_head.w.size() + logstd_head.b.size();
  }
};

inline void collect_spans(PolicyNet& p, std::vector<ParamSpan>& out) {
  collect_spans(p.trunk, out);
  collect_spans(p.mean_head, out);
  collect_spans(p.logstd_head, out);
}

inline void collect_spans(PolicyNet::Grads& g, std::vector<ParamSpan>& out) {
  collect_spans(g.trunk, out);
  collect_spans(g.mean_head, out);
  collect_spans(g.logstd_head, out);
}

// Row-wise critic: two layers on the state row, the action appended to the
// hidden features, five more layers, then a scalar head. The caller averages
// row outputs per state, which makes Q permutation and duplication invariant.
struct CriticNet {
  Mlp pre;
  Mlp post;
  DenseLayer head;

  static CriticNet make(int input_dim, int hidden, RngStream& rng) {
    CriticNet c;
    c.pre = make_trunk(input_dim, hidden, 2, rng);
    c.post = make_trunk(hidden + 1, hidden, 5, rng);
    c.head = make_layer(1, hidden, Activation::linear, rng);
    return c;
  }

  struct Cache {
    Mlp::Cache pre, post;
    Matrix z;
  };

  Vector forward_rows(const Matrix& rows, const Vector& a, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    Matrix h1 = pre.forward(rows, &c.pre);
    c.z = Matrix(rows.rows(), h1.cols() + 1);
    c.z.leftCols(h1.cols()) = h1;
    c.z.col(h1.cols()) = a;
    Matrix h2 = post.forward(c.z, &c.post);
    Vector q = (h2 * head.w.transpose()).col(0).array() + head.b(0);
    if (!q.allFinite()) throw NetError("critic: non-finite output (NaN in parameters?)");
    return q;
  }

  struct Grads {
    std::vector<LayerGrad> pre, post;
    LayerGrad head;
  };

  // dq is the per-row output gradient. Returns dL/da (the appended column).
  // want_params = false skips every parameter-gradient GEMM and the pre-trunk
  // entirely; the actor path only needs the action gradient.
  Vector backward(const Cache& c, const Vector& dq, Grads* g, bool want_params) const {
    const Matrix& h2 = c.post.acts.back();
    if (want_params) {
      g->head.w = dq.transpose() * h2;
      g->head.b = Vector::Constant(1, dq.sum());
    }
    Matrix dh2 = dq * head.w;
    Matrix dz = post.backward(c.post, dh2, want_params ? &g->post : nullptr);
    const auto h = c.z.cols() - 1;
    Vector da = dz.col(h);
    if (want_params) {
      Matrix dh1 = dz.leftCols(h);
      pre.backward(c.pre, dh1, &g->pre);
    }
    return da;
  }

  std::int64_t param_count() const {
    return pre.param_count() + post.param_count() + head.w.size() + head.b.size();
  }
};

inline void collect_spans(CriticNet& c, std::vector<ParamSpan>& out) {
  collect_spans(c.pre, out);
  collect_spans(c.post, out);
  collect_spans(c.head, out);
}

inline void collect_spans(CriticNet::Grads& g, std::vector<ParamSpan>& out) {
  collect_spans(g.pre, out);
  collect_spans(g.post, out);
  collect_spans(g.head, out);
}

// Per-row QoS classifier: state row with the candidate action appended feeds a
// relu trunk and a 5-logit head, one sigmoid probability per lookahead step.
struct ClassifierNet {
  Mlp trunk;
  DenseLayer head;

  static ClassifierNet make(int input_dim, int hidden, int depth, RngStream& rng) {
    ClassifierNet c;
    c.trunk = make_trunk(input_dim + 1, hidden, depth, rng);
    c.head = make_layer(5, hidden, Activation::linear, rng);
    return c;
  }

  struct Cache {
    Mlp::Cache trunk;
    Matrix z;
  };

  Matrix forward_logits(const Matrix& rows, const Vector& a, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.z = Matrix(rows.rows(), rows.cols() + 1);
    c.z.leftCols(rows.cols()) = rows;
    c.z.col(rows.cols()) = a;
    Matrix h = trunk.forward(c.z, &c.trunk);
    Matrix logits = h * head.w.transpose();
    logits.rowwise() += head.b.transpose();
    if (!logits.allFinite()) throw NetError("classifier: non-finite output");
    return logits;
  }

  Matrix probabilities(const Matrix& rows, const Vector& a) const {
    return forward_logits(rows, a).unaryExpr([](double v) { return sigmoid(v); });
  }

  struct Grads {
    std::vector<LayerGrad> trunk;
    LayerGrad head;
  };

  void backward(const Cache& c, const Matrix& dlogits, Grads* g) const {
    const Matrix& h = c.trunk.acts.back();
    g->head.w = dlogits.transpose() * h;
    g->head.b = dlogits.colwise().sum().transpose();
    Matrix dh = dlogits * head.w;
    trunk.backward(c.trunk, dh, &g->trunk);
  }

  std::int64_t param_count() const {
    return trunk.param_count() + head.w.size() + head.b.size();
  }
};

inline void collect_spans(ClassifierNet& c, std::vector<ParamSpan>& out) {
  collect_spans(c.trunk, out);
  collect_spans(c.head, out);
}

inline void collect_spans(ClassifierNet::Grads& g, std::vector<ParamSpan>& out) {
  collect_spans(g.trunk, out);
  collect_spans(g.head, out);
}

}  // namespace corerl
