#pragma once

#include <algorithm>

#include "corerl/mdp.hpp"
#include "corerl/simulate.hpp"

namespace corerl {

// Reactive threshold autoscaler. Utilization bands: [0, 10%] scales down by
// 10%, (10%, 30%) holds, [30%, 50%) scales up by 10%, [50%, 100%] by 30%.
struct AutoScaleConfig {
  double low_max = 0.10;
  double dead_max = 0.30;
  double mid_max = 0.50;
  double down_factor = 0.9;
  double mid_factor = 1.1;
  double high_factor = 1.3;
  double floor_cores = kAllocFloorCores;
};

// per-node busy fraction of the granted allocation over the interval
inline Vector utilization(const StepOutcome& out, double dt) {
  const auto m = static_cast<Eigen::Index>(out.consumed_core_s.size());
  Vector u(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double denom = out.alloc_cores[static_cast<std::size_t>(i)] * dt;
    u(i) = std::clamp(out.consumed_core_s[static_cast<std::size_t>(i)] / denom, 0.0, 1.0);
  }
  return u;
}

inline Vector autoscale_step(const Vector& alloc, const Vector& util, const CoreCaps& caps,
                             const AutoScaleConfig& cfg = {}) {
  if (alloc.size() != util.size() || alloc.size() != caps.u.size())
    throw ConfigError("autoscale: size mismatch");
  Vector next(alloc.size());
  for (Eigen::Index i = 0; i < alloc.size(); ++i) {
    double factor = 1.0;
    if (util(i) <= cfg.low_max)
      factor = cfg.down_factor;
    else if (util(i) < cfg.dead_max)
      factor = 1.0;
    else if (util(i) < cfg.mid_max)
      factor = cfg.mid_factor;
    else
      factor = cfg.high_factor;
    next(i) = std::clamp(alloc(i) * factor, cfg.floor_cores, caps.u(i));
  }
  return next;
}

}  // namespace corerl
