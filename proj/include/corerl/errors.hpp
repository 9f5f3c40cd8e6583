#pragma once

#include <stdexcept>
#include <string>

namespace corerl {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

struct SimError : std::runtime_error {
  explicit SimError(const std::string& msg) : std::runtime_error("sim: " + msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error("io: " + msg) {}
};

struct NetError : std::runtime_error {
  explicit NetError(const std::string& msg) : std::runtime_error("net: " + msg) {}
};

}  // namespace corerl
