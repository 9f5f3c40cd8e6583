#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "corerl/errors.hpp"

namespace corerl {

struct StepRecord {
  std::int64_t step = 0;
  int users = 0;
  double p99_ms = 0.0;
  bool qos_met = true;
  double total_alloc_cores = 0.0;
  double reward = 0.0;
};

struct UserAggregate {
  int users = 0;  // -1 marks the all-counts row
  std::int64_t steps = 0;
  double mean_alloc_cores = 0.0;
  double max_alloc_cores = 0.0;
  double mean_p99_ms = 0.0;
  double violation_rate = 0.0;
};

struct RunMetrics {
  std::vector<StepRecord> steps;

  // Per user count in first-seen order, then the step-weighted overall row
  // with users = -1.
  std::vector<UserAggregate> aggregate() const {
    std::vector<UserAggregate> out;
    const auto row_for = [&](int users) -> UserAggregate& {
      for (auto& a : out)
        if (a.users == users) return a;
      out.push_back({users, 0, 0.0, 0.0, 0.0, 0.0});
      return out.back();
    };
    for (const auto& s : steps) {
      for (int users : {s.users, -1}) {
        UserAggregate& a = row_for(users);
        a.steps++;
        a.mean_alloc_cores += s.total_alloc_cores;
        a.max_alloc_cores = std::max(a.max_alloc_cores, s.total_alloc_cores);
        a.mean_p99_ms += s.p99_ms;
        if (!s.qos_met) a.violation_rate += 1.0;
      }
    }
    // keep the overall row last
    std::stable_partition(out.begin(), out.end(),
                          [](const UserAggregate& a) { return a.users != -1; });
    for (auto& a : out) {
      const double n = static_cast<double>(a.steps);
      a.mean_alloc_cores /= n;
      a.mean_p99_ms /= n;
      a.violation_rate /= n;
    }
    return out;
  }
};

inline constexpr const char* kStepCsvHeader = "step,users,p99_ms,qos_met,total_alloc_cores,reward";
inline constexpr const char* kSummaryCsvHeader =
    "users,steps,mean_alloc_cores,max_alloc_cores,mean_p99_ms,violation_rate";

// %.17g round-trips doubles exactly, so equal metrics give identical bytes
inline void export_metrics(const RunMetrics& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("metrics: cannot open " + path + " for writing");
  std::fprintf(f, "%s\n", kStepCsvHeader);
  for (const auto& s : m.steps)
    std::fprintf(f, "%" PRId64 ",%d,%.17g,%d,%.17g,%.17g\n", s.step, s.users, s.p99_ms,
                 s.qos_met ? 1 : 0, s.total_alloc_cores, s.reward);
  if (std::fclose(f) != 0) throw IoError("metrics: write failed for " + path);
}

inline void export_summary(const RunMetrics& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("metrics: cannot open " + path + " for writing");
  std::fprintf(f, "%s\n", kSummaryCsvHeader);
  for (const auto& a : m.aggregate())
    std::fprintf(f, "%d,%" PRId64 ",%.17g,%.17g,%.17g,%.17g\n", a.users, a.steps,
                 a.mean_alloc_cores, a.max_alloc_cores, a.mean_p99_ms, a.violation_rate);
  if (std::fclose(f) != 0) throw IoError("metrics: write failed for " + path);
}

inline RunMetrics import_metrics(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("metrics: cannot open " + path);
  RunMetrics m;
  char line[512];
  if (!std::fgets(line, sizeof line, f)) {
    std::fclose(f);
    throw IoError("metrics: empty file " + path);
  }
  if (std::string(line).rfind(kStepCsvHeader, 0) != 0) {
    std::fclose(f);
    throw IoError("metrics: unexpected header in " + path);
  }
  while (std::fgets(line, sizeof line, f)) {
    StepRecord s;
    int met = 0;
    if (std::sscanf(line, "%" SCNd64 ",%d,%lg,%d,%lg,%lg", &s.step, &s.users, &s.p99_ms, &met,
                    &s.total_alloc_cores, &s.reward) != 6) {
      std::fclose(f);
      throw IoError("metrics: malformed row in " + path);
    }
    s.qos_met = met != 0;
    m.steps.push_back(s);
  }
  std::fclose(f);
  return m;
}

}  // namespace corerl
