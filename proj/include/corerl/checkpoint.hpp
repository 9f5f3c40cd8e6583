#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "corerl/explore.hpp"
#include "corerl/features.hpp"
#include "corerl/mdp.hpp"
#include "corerl/sac.hpp"

namespace corerl {

inline constexpr std::uint32_t kCheckpointMagic = 0x4b43'4c43u;  // "CLCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

// training state beyond the agent itself
struct TrainerCheckpoint {
  std::uint64_t step = 0;
  std::uint64_t replay_count = 0;  // records in the replay sidecar at save time
  StandardizationStats stats;
  std::vector<std::string> rng_states;  // caller-defined order
};

namespace detail {

inline void put_i64(std::FILE* f, std::int64_t v) { std::fwrite(&v, sizeof v, 1, f); }
inline std::int64_t get_i64(std::FILE* f) {
  std::int64_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) throw IoError("checkpoint: truncated file");
  return v;
}
inline double get_f64(std::FILE* f) {
  double v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) throw IoError("checkpoint: truncated file");
  return v;
}

inline void put_spans(std::FILE* f, const std::vector<ParamSpan>& spans) {
  put_u64(f, static_cast<std::uint64_t>(span_total(spans)));
  for (const auto& s : spans)
    std::fwrite(s.p, sizeof(double), static_cast<std::size_t>(s.n), f);
}

inline void get_spans(std::FILE* f, const std::vector<ParamSpan>& spans) {
  const auto total = get_u64(f);
  if (total != static_cast<std::uint64_t>(span_total(spans)))
    throw IoError("checkpoint: parameter count mismatch");
  for (const auto& s : spans) get_f64s(f, s.p, static_cast<std::size_t>(s.n));
}

inline void put_adam(std::FILE* f, Adam& opt) {
  put_i64(f, opt.t());
  put_f64(f, opt.lr());
  put_u64(f, static_cast<std::uint64_t>(opt.m().size()));
  for (const auto& v : opt.m())
    std::fwrite(v.data(), sizeof(double), static_cast<std::size_t>(v.size()), f);
  for (const auto& v : opt.v())
    std::fwrite(v.data(), sizeof(double), static_cast<std::size_t>(v.size()), f);
}

inline void get_adam(std::FILE* f, Adam& opt) {
  opt.set_t(get_i64(f));
  opt.set_lr(get_f64(f));
  const auto nvec = get_u64(f);
  if (nvec != opt.m().size()) throw IoError("checkpoint: optimizer moment layout mismatch");
  for (auto& v : opt.m()) get_f64s(f, v.data(), static_cast<std::size_t>(v.size()));
  for (auto& v : opt.v()) get_f64s(f, v.data(), static_cast<std::size_t>(v.size()));
}

inline void put_string(std::FILE* f, const std::string& s) {
  put_u64(f, s.size());
  std::fwrite(s.data(), 1, s.size(), f);
}

inline std::string get_string(std::FILE* f) {
  const auto n = get_u64(f);
  std::string s(n, '\0');
  if (n > 0 && std::fread(s.data(), 1, n, f) != n)
    throw IoError("checkpoint: truncated file");
  return s;
}

template <typename Net>
inline std::vector<ParamSpan> spans_of(Net& net) {
  std::vector<ParamSpan> s;
  collect_spans(net, s);
  return s;
}

}  // namespace detail

// Full training snapshot: every learnable parameter, both target critics, all
// optimizer moments, the entropy coefficient, standardization stats, and the
// serialized RNG streams, so a resumed run replays bit for bit.
inline void save_checkpoint(const std::string& path, SacAgent& agent, QosClassifier* clf,
                            const TrainerCheckpoint& tc) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
  using namespace detail;
  put_u32(f, kCheckpointMagic);
  put_u32(f, kCheckpointVersion);
  put_u64(f, tc.step);
  put_u64(f, tc.replay_count);
  put_i64(f, agent.input_dim());
  put_f64(f, agent.log_eta());

  put_spans(f, spans_of(agent.policy()));
  put_spans(f, spans_of(agent.q1()));
  put_spans(f, spans_of(agent.q2()));
  put_spans(f, spans_of(agent.q1_target()));
  put_spans(f, spans_of(agent.q2_target()));
  put_adam(f, agent.opt_policy());
  put_adam(f, agent.opt_q1());
  put_adam(f, agent.opt_q2());
  put_adam(f, agent.opt_eta());

  put_u32(f, clf ? 1u : 0u);
  if (clf) {
    put_spans(f, spans_of(clf->net));
    put_adam(f, clf->opt);
  }

  put_i64(f, tc.stats.mean.size());
  put_i64(f, tc.stats.count);
  std::fwrite(tc.stats.mean.data(), sizeof(double),
              static_cast<std::size_t>(tc.stats.mean.size()), f);
  std::fwrite(tc.stats.var.data(), sizeof(double),
              static_cast<std::size_t>(tc.stats.var.size()), f);

  put_u64(f, tc.rng_states.size());
  for (const auto& s : tc.rng_states) put_string(f, s);

  if (std::fclose(f) != 0) throw IoError("checkpoint: write failed for " + path);
}

// Loads into an agent (and optional classifier) already constructed with the
// matching architecture. Throws on any shape mismatch.
inline void load_checkpoint(const std::string& path, SacAgent& agent, QosClassifier* clf,
                            TrainerCheckpoint* tc) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("checkpoint: cannot open " + path);
  using namespace detail;
  try {
    if (get_u32(f) != kCheckpointMagic) throw IoError("checkpoint: bad magic in " + path);
    if (get_u32(f) != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
    const auto step = get_u64(f);
    const auto replay_count = get_u64(f);
    if (get_i64(f) != agent.input_dim())
      throw IoError("checkpoint: input width mismatch");
    agent.set_log_eta(get_f64(f));

    get_spans(f, spans_of(agent.policy()));
    get_spans(f, spans_of(agent.q1()));
    get_spans(f, spans_of(agent.q2()));
    get_spans(f, spans_of(agent.q1_target()));
    get_spans(f, spans_of(agent.q2_target()));
    get_adam(f, agent.opt_policy());
    get_adam(f, agent.opt_q1());
    get_adam(f, agent.opt_q2());
    get_adam(f, agent.opt_eta());

    const auto has_clf = get_u32(f);
    if (has_clf && !clf) throw IoError("checkpoint: classifier present but not expected");
    if (!has_clf && clf) throw IoError("checkpoint: classifier missing");
    if (clf) {
      get_spans(f, spans_of(clf->net));
      get_adam(f, clf->opt);
    }

    const auto n = get_i64(f);
    StandardizationStats stats;
    stats.mean = Vector(n);
    stats.var = Vector(n);
    stats.count = get_i64(f);
    get_f64s(f, stats.mean.data(), static_cast<std::size_t>(n));
    get_f64s(f, stats.var.data(), static_cast<std::size_t>(n));

    const auto nrng = get_u64(f);
    std::vector<std::string> rngs;
    rngs.reserve(nrng);
    for (std::uint64_t i = 0; i < nrng; ++i) rngs.push_back(get_string(f));

    if (tc) {
      tc->step = step;
      tc->replay_count = replay_count;
      tc->stats = std::move(stats);
      tc->rng_states = std::move(rngs);
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
}

// header-only inspection; enough to rebuild a matching agent before a full load
struct CheckpointInfo {
  std::uint64_t step = 0;
  std::uint64_t replay_count = 0;
  int input_dim = 0;
};

inline CheckpointInfo peek_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("checkpoint: cannot open " + path);
  CheckpointInfo info;
  try {
    using namespace detail;
    if (get_u32(f) != kCheckpointMagic) throw IoError("checkpoint: bad magic in " + path);
    if (get_u32(f) != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
    info.step = get_u64(f);
    info.replay_count = get_u64(f);
    info.input_dim = static_cast<int>(get_i64(f));
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return info;
}

}  // namespace corerl
