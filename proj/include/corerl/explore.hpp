#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "corerl/features.hpp"
#include "corerl/mdp.hpp"
#include "corerl/nets.hpp"
#include "corerl/optim.hpp"
#include "corerl/rng.hpp"

namespace corerl {

inline constexpr int kQosHorizon = 5;          // classifier predicts this many steps ahead
inline constexpr double kQosProbThreshold = 0.8;
inline constexpr double kQosMetRewardCut = -0.5;  // reward above this counts as QoS met

// candidate multipliers applied to the policy action during assisted exploration
inline constexpr std::array<double, 7> kAugmentFactors = {0.90, 0.95, 0.99, 1.0,
                                                          1.01, 1.05, 1.10};

// +-5% multiplicative noise on the seed-phase autoscaler recommendation
inline Vector seed_noise(const Vector& rec_cores, const CoreCaps& caps, double floor_cores,
                         RngStream& rng) {
  Vector out(rec_cores.size());
  for (Eigen::Index i = 0; i < rec_cores.size(); ++i) {
    const double f = rng.uniform(0.95, 1.05);
    out(i) = std::clamp(rec_cores(i) * f, floor_cores, caps.u(i));
  }
  return out;
}

// probability of executing the raw policy action, annealed linearly over the
// classifier-assistance window
inline double keep_probability(std::size_t step, std::size_t assist_steps) {
  if (assist_steps == 0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(assist_steps));
}

struct QosClassifier {
  ClassifierNet net;
  Adam opt;

  static QosClassifier make(int input_dim, int hidden, int depth, double lr, RngStream& rng) {
    QosClassifier c{ClassifierNet::make(input_dim, hidden, depth, rng), Adam(lr)};
    std::vector<ParamSpan> spans;
    collect_spans(c.net, spans);
    c.opt.init(spans);
    return c;
  }
};

// Transitions usable as classifier samples: the next kQosHorizon rewards must
// come from one uninterrupted episode segment.
inline std::vector<std::size_t> classifier_sample_indices(const ReplayBuffer& buffer) {
  std::vector<std::size_t> idx;
  const std::size_t n = buffer.size();
  if (n < kQosHorizon) return idx;
  for (std::size_t i = 0; i + kQosHorizon <= n; ++i) {
    bool contiguous = true;
    for (int j = 0; j + 1 < kQosHorizon; ++j) {
      if (buffer.at(i + static_cast<std::size_t>(j)).done) {
        contiguous = false;
        break;
      }
    }
    if (contiguous) idx.push_back(i);
  }
  return idx;
}

// label bit j: QoS met at step i+j
inline Eigen::Matrix<double, 1, kQosHorizon> classifier_labels(const ReplayBuffer& buffer,
                                                              std::size_t i) {
  Eigen::Matrix<double, 1, kQosHorizon> y;
  for (int j = 0; j < kQosHorizon; ++j)
    y(j) = buffer.at(i + static_cast<std::size_t>(j)).r > kQosMetRewardCut ? 1.0 : 0.0;
  return y;
}

// Minibatch BCE training on replay windows. States are standardized with the
// frozen stats; every microservice row of a sample carries the sample's
// service-level label vector. Returns the mean loss over the final ten
// updates (0 when no update ran).
inline double classifier_train(QosClassifier& clf, const ReplayBuffer& buffer,
                               const StandardizationStats& stats, int m_max, int batch_samples,
                               int max_updates, RngStream& rng) {
  const auto idx = classifier_sample_indices(buffer);
  if (idx.empty() || max_updates <= 0 || batch_samples <= 0) return 0.0;
  const auto m = buffer.at(0).s.rows();
  const auto d = buffer.at(0).s.cols();
  const auto rows = static_cast<Eigen::Index>(batch_samples) * m;

  Matrix s(rows, d);
  Vector a(rows);
  Matrix y(rows, kQosHorizon);
  ClassifierNet::Cache cache;
  ClassifierNet::Grads grads;
  std::vector<ParamSpan> pspans;
  collect_spans(clf.net, pspans);

  double tail_loss = 0.0;
  int tail_n = 0;
  for (int u = 0; u < max_updates; ++u) {
    for (int b = 0; b < batch_samples; ++b) {
      const std::size_t i = idx[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(idx.size()) - 1))];
      const auto& t = buffer.at(i);
      s.middleRows(b * m, m) = standardize(t.s, stats, m_max);
      a.segment(b * m, m) = t.a;
      y.middleRows(b * m, m) = classifier_labels(buffer, i).replicate(m, 1);
    }
    const Matrix logits = clf.net.forward_logits(s, a, &cache);
    const Matrix p = logits.unaryExpr([](double v) { return sigmoid(v); });
    // BCE via softplus for stability: -y*log p - (1-y)*log(1-p)
    double loss = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r)
      for (Eigen::Index c = 0; c < logits.cols(); ++c)
        loss += softplus(logits(r, c)) - y(r, c) * logits(r, c);
    loss /= static_cast<double>(logits.rows() * logits.cols());
    const Matrix dlogits = (p - y) / static_cast<double>(logits.rows() * logits.cols());
    clf.net.backward(cache, dlogits, &grads);
    std::vector<ParamSpan> gspans;  // grad matrices reallocate on assignment
    collect_spans(grads, gspans);
    clf.opt.step(pspans, gspans);
    if (u >= max_updates - 10) {
      tail_loss += loss;
      ++tail_n;
    }
  }
  return tail_n > 0 ? tail_loss / tail_n : 0.0;
}

// Classifier-guided reshaping of one policy action. With probability
// keep_prob the policy action passes through untouched; otherwise each
// microservice row independently takes the smallest scaled candidate whose
// predicted per-step QoS probabilities all clear the threshold, falling back
// to the candidate with the best worst-step probability (ties resolved toward
// more cores). Both branches then get +-1% multiplicative noise.
inline Vector augment_action(const ClassifierNet& clf, const Matrix& std_state_rows,
                             const Vector& a_policy, double keep_prob, RngStream& rng) {
  const auto m = a_policy.size();
  if (std_state_rows.rows() != m)
    throw ConfigError("augment_action: state/action row mismatch");
  Vector chosen = a_policy;
  if (rng.uniform() >= keep_prob) {
    const auto f = static_cast<Eigen::Index>(kAugmentFactors.size());
    Matrix s(f * m, std_state_rows.cols());
    Vector a(f * m);
    for (Eigen::Index c = 0; c < f; ++c) {
      s.middleRows(c * m, m) = std_state_rows;
      a.segment(c * m, m) =
          (a_policy * kAugmentFactors[static_cast<std::size_t>(c)]).cwiseMin(1.0).cwiseMax(0.0);
    }
    const Matrix probs = clf.probabilities(s, a);
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::Index pick = -1;
      for (Eigen::Index c = 0; c < f; ++c) {
        if (probs.row(c * m + i).minCoeff() >= kQosProbThreshold) {
          pick = c;
          break;
        }
      }
      if (pick < 0) {
        double best = -1.0;
        for (Eigen::Index c = 0; c < f; ++c) {
          const double worst = probs.row(c * m + i).minCoeff();
          if (worst >= best) {  // >= so ties land on the larger factor
            best = worst;
            pick = c;
          }
        }
      }
      chosen(i) = a(pick * m + i);
    }
  }
  for (Eigen::Index i = 0; i < m; ++i)
    chosen(i) = std::clamp(chosen(i) * rng.uniform(0.99, 1.01), 0.0, 1.0);
  return chosen;
}

}  // namespace corerl
