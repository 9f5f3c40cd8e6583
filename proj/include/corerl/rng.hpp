#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace corerl {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic random stream. Distribution objects are constructed fresh for
// every draw so the serialized engine state alone fixes the remaining sequence.
class RngStream {
 public:
  RngStream() : eng_(0) {}
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}
  RngStream(std::uint64_t seed, std::string_view tag)
      : eng_(splitmix64(seed ^ fnv1a64(tag))) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }

  // inclusive bounds
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(eng_);
  }

  std::mt19937_64& engine() { return eng_; }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) throw std::runtime_error("rng: bad serialized engine state");
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace corerl
