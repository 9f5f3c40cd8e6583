#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <deque>
#include <string>
#include <vector>

#include "corerl/errors.hpp"
#include "corerl/features.hpp"
#include "corerl/rng.hpp"

namespace corerl {

struct CoreCaps {
  Vector u;   // per-microservice core caps
  double z;   // sum of caps

  static CoreCaps from(const std::vector<double>& caps) {
    CoreCaps c;
    c.u = Eigen::Map<const Vector>(caps.data(), static_cast<Eigen::Index>(caps.size()));
    if ((c.u.array() <= 0.0).any()) throw ConfigError("caps must be positive");
    c.z = c.u.sum();
    return c;
  }
};

// Fractional action a in [0,1]^M to absolute cores, with the per-node floor.
inline Vector scale_action(const Vector& a, const CoreCaps& caps, double floor_cores) {
  if (a.size() != caps.u.size()) throw ConfigError("action size mismatch");
  return a.cwiseProduct(caps.u).cwiseMax(floor_cores);
}

// r = -1 on a QoS violation, else alpha * (1 - u.a / Z): the saved-capacity
// bonus for the action that was actually in force during the interval.
inline double reward(double latency_ms, double qos_ms, const Vector& a, const CoreCaps& caps,
                     double alpha) {
  if (latency_ms > qos_ms) return -1.0;
  return alpha * (1.0 - caps.u.dot(a) / caps.z);
}

struct Transition {
  Matrix s;       // M x (k*n), raw (unstandardized)
  Vector a;       // executed fraction per microservice
  double r = 0.0;
  Matrix s_next;
  bool done = false;
};

namespace detail {

inline void put_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, sizeof v, 1, f); }
inline void put_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, sizeof v, 1, f); }
inline void put_f64(std::FILE* f, double v) { std::fwrite(&v, sizeof v, 1, f); }

inline std::uint32_t get_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) throw IoError("replay: truncated file");
  return v;
}
inline std::uint64_t get_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) throw IoError("replay: truncated file");
  return v;
}
inline void get_f64s(std::FILE* f, double* dst, std::size_t n) {
  if (std::fread(dst, sizeof(double), n, f) != n) throw IoError("replay: truncated file");
}

}  // namespace detail

inline constexpr std::uint32_t kReplayMagic = 0x4252'4c43u;  // "CLRB"
inline constexpr std::uint32_t kReplayVersion = 1;

// FIFO ring of the most recent transitions; uniform sampling with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
  }

  void push(Transition t) {
    if (data_.size() == capacity_) data_.pop_front();
    data_.push_back(std::move(t));
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  std::vector<const Transition*> sample(std::size_t batch, RngStream& rng) const {
    if (data_.empty()) throw ConfigError("replay: sampling from empty buffer");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1));
      out.push_back(&data_[idx]);
    }
    return out;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& t : data_) fn(t);
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
};

// Append-only on-disk log of transitions in fixed-width records. The header
// count is rewritten on flush so a checkpoint always pairs with a consistent
// prefix of the file; records past the flushed count are orphans a resume
// overwrites.
class ReplayWriter {
 public:
  ReplayWriter() = default;
  ReplayWriter(const ReplayWriter&) = delete;
  ReplayWriter& operator=(const ReplayWriter&) = delete;
  ~ReplayWriter() { close(); }

  // start_count > 0 resumes appending after that many existing records
  void open(const std::string& path, std::uint32_t m, std::uint32_t kn,
            std::uint64_t start_count = 0) {
    close();
    m_ = m;
    kn_ = kn;
    count_ = start_count;
    if (start_count == 0) {
      f_ = std::fopen(path.c_str(), "wb");
      if (!f_) throw IoError("replay: cannot open " + path);
      detail::put_u32(f_, kReplayMagic);
      detail::put_u32(f_, kReplayVersion);
      detail::put_u32(f_, m);
      detail::put_u32(f_, kn);
      detail::put_u64(f_, 0);
    } else {
      f_ = std::fopen(path.c_str(), "rb+");
      if (!f_) throw IoError("replay: cannot open " + path);
      std::FILE* check = f_;
      if (detail::get_u32(check) != kReplayMagic) throw IoError("replay: bad magic");
      if (detail::get_u32(check) != kReplayVersion) throw IoError("replay: bad version");
      if (detail::get_u32(check) != m || detail::get_u32(check) != kn)
        throw IoError("replay: shape mismatch on resume");
      (void)detail::get_u64(check);
      const long offset = static_cast<long>(header_bytes() + start_count * record_bytes());
      if (std::fseek(f_, offset, SEEK_SET) != 0) throw IoError("replay: seek failed");
    }
  }

  void append(const Transition& t) {
    if (!f_) throw IoError("replay: writer not open");
    detail::put_f64(f_, t.r);
    detail::put_u32(f_, t.done ? 1u : 0u);
    std::fwrite(t.a.data(), sizeof(double), static_cast<std::size_t>(t.a.size()), f_);
    std::fwrite(t.s.data(), sizeof(double), static_cast<std::size_t>(t.s.size()), f_);
    std::fwrite(t.s_next.data(), sizeof(double), static_cast<std::size_t>(t.s_next.size()), f_);
    count_++;
  }

  void flush() {
    if (!f_) return;
    const long pos = std::ftell(f_);
    std::fseek(f_, 16, SEEK_SET);
    detail::put_u64(f_, count_);
    std::fseek(f_, pos, SEEK_SET);
    std::fflush(f_);
  }

  void close() {
    if (f_) {
      flush();
      std::fclose(f_);
      f_ = nullptr;
    }
  }

  std::uint64_t count() const { return count_; }
  std::size_t record_bytes() const {
    return sizeof(double) + sizeof(std::uint32_t) +
           sizeof(double) * (m_ + 2ull * m_ * kn_);
  }
  static constexpr std::size_t header_bytes() { return 24; }

 private:
  std::FILE* f_ = nullptr;
  std::uint32_t m_ = 0;
  std::uint32_t kn_ = 0;
  std::uint64_t count_ = 0;
};

// Loads the flushed prefix into a fresh buffer (FIFO semantics preserved:
// only the newest `capacity` records are kept).
inline ReplayBuffer load_replay(const std::string& path, std::size_t capacity,
                                std::uint64_t* total_on_disk = nullptr) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("replay: cannot open " + path);
  struct Closer {
    std::FILE* f;
    ~Closer() { std::fclose(f); }
  } closer{f};
  if (detail::get_u32(f) != kReplayMagic) throw IoError("replay: bad magic");
  if (detail::get_u32(f) != kReplayVersion) throw IoError("replay: bad version");
  const std::uint32_t m = detail::get_u32(f);
  const std::uint32_t kn = detail::get_u32(f);
  const std::uint64_t count = detail::get_u64(f);
  if (total_on_disk) *total_on_disk = count;

  ReplayBuffer buf(capacity);
  const std::size_t rec =
      sizeof(double) + sizeof(std::uint32_t) + sizeof(double) * (m + 2ull * m * kn);
  std::uint64_t start = count > capacity ? count - capacity : 0;
  if (start > 0)
    if (std::fseek(f, static_cast<long>(24 + start * rec), SEEK_SET) != 0)
      throw IoError("replay: seek failed");
  for (std::uint64_t i = start; i < count; ++i) {
    Transition t;
    double r = 0;
    if (std::fread(&r, sizeof r, 1, f) != 1) throw IoError("replay: truncated file");
    t.r = r;
    t.done = detail::get_u32(f) != 0;
    t.a = Vector(m);
    t.s = Matrix(m, kn);
    t.s_next = Matrix(m, kn);
    detail::get_f64s(f, t.a.data(), m);
    detail::get_f64s(f, t.s.data(), static_cast<std::size_t>(m) * kn);
    detail::get_f64s(f, t.s_next.data(), static_cast<std::size_t>(m) * kn);
    buf.push(std::move(t));
  }
  return buf;
}

}  // namespace corerl
