#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/features.hpp"
#include "corerl/rng.hpp"

namespace corerl {

enum class Activation { relu, linear };

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;
  Activation act = Activation::linear;
};

struct LayerGrad {
  Matrix w;
  Vector b;
};

// fan-in scaled uniform init; scale < 1 shrinks output heads
inline DenseLayer make_layer(int out, int in, Activation act, RngStream& rng,
                             double scale = 1.0) {
  DenseLayer l;
  const double s = scale / std::sqrt(static_cast<double>(in));
  l.w = Matrix::NullaryExpr(out, in, [&]() { return rng.uniform(-s, s); });
  l.b = Vector::Zero(out);
  l.act = act;
  return l;
}

inline Matrix layer_forward(const DenseLayer& l, const Matrix& x) {
  Matrix y = x * l.w.transpose();
  y.rowwise() += l.b.transpose();
  if (l.act == Activation::relu) y = y.cwiseMax(0.0);
  return y;
}

struct Mlp {
  std::vector<DenseLayer> layers;

  struct Cache {
    std::vector<Matrix> acts;  // acts[0] = input, acts[i+1] = layer i output
  };

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    Matrix h = x;
    if (cache) {
      cache->acts.clear();
      cache->acts.push_back(h);
    }
    for (const auto& l : layers) {
      h = layer_forward(l, h);
      if (cache) cache->acts.push_back(h);
    }
    return h;
  }

  // dy is the gradient at the output; returns the gradient at the input.
  // grads, when given, receives one LayerGrad per layer (assigned, not
  // accumulated). Skipping param grads saves the weight GEMMs on paths that
  // only need input gradients.
  Matrix backward(const Cache& cache, const Matrix& dy,
                  std::vector<LayerGrad>* grads = nullptr) const {
    if (grads) grads->resize(layers.size());
    Matrix d = dy;
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
      const DenseLayer& l = layers[static_cast<std::size_t>(i)];
      const Matrix& out = cache.acts[static_cast<std::size_t>(i) + 1];
      if (l.act == Activation::relu)
        d = d.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
      if (grads) {
        auto& g = (*grads)[static_cast<std::size_t>(i)];
        g.w = d.transpose() * cache.acts[static_cast<std::size_t>(i)];
        g.b = d.colwise().sum().transpose();
      }
      d = d * l.w;
    }
    return d;
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

// trunk of `depth` relu layers: in -> h, then h -> h
inline Mlp make_trunk(int in, int hidden, int depth, RngStream& rng) {
  if (depth < 1) throw ConfigError("net: trunk depth must be >= 1");
  Mlp m;
  m.layers.push_back(make_layer(hidden, in, Activation::relu, rng));
  for (int i = 1; i < depth; ++i)
    m.layers.push_back(make_layer(hidden, hidden, Activation::relu, rng));
  return m;
}

// flat views over parameters, used by the optimizer and checkpointing;
// ordering is stable: per layer w then b
struct ParamSpan {
  double* p;
  Eigen::Index n;
};

inline void collect_spans(Mlp& m, std::vector<ParamSpan>& out) {
  for (auto& l : m.layers) {
    out.push_back({l.w.data(), l.w.size()});
    out.push_back({l.b.data(), l.b.size()});
  }
}

inline void collect_spans(DenseLayer& l, std::vector<ParamSpan>& out) {
  out.push_back({l.w.data(), l.w.size()});
  out.push_back({l.b.data(), l.b.size()});
}

inline void collect_spans(std::vector<LayerGrad>& gs, std::vector<ParamSpan>& out) {
  for (auto& g : gs) {
    out.push_back({g.w.data(), g.w.size()});
    out.push_back({g.b.data(), g.b.size()});
  }
}

inline void collect_spans(LayerGrad& g, std::vector<ParamSpan>& out) {
  out.push_back({g.w.data(), g.w.size()});
  out.push_back({g.b.data(), g.b.size()});
}

inline std::int64_t span_total(const std::vector<ParamSpan>& spans) {
  std::int64_t n = 0;
  for (const auto& s : spans) n += s.n;
  return n;
}

// order-insensitive content hash for frozen-weights assertions
inline std::uint64_t param_checksum(const std::vector<ParamSpan>& spans) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& s : spans)
    for (Eigen::Index i = 0; i < s.n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &s.p[i], sizeof bits);
      h ^= bits;
      h *= 1099511628211ull;
    }
  return h;
}

inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace corerl
