#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mfnet {

inline constexpr const char* kVersion = "0.1.0";

/// Bad or inconsistent user-supplied configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension mismatch between objects that must agree.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates a documented range contract,
/// e.g. snapshot grids that cannot be aligned.
class RangeError : public std::runtime_error {
 public:
  explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

/// A state became non-finite during integration / training.  Carries the
/// step index and model time at which the blow-up was detected.
class OverflowError : public std::runtime_error {
 public:
  OverflowError(long step, double time, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ", t=" +
                           std::to_string(time) + ")"),
        step(step),
        time(time) {}
  long step;
  double time;
};

/// Execution knobs shared by the heavier operations.  `threads` only fans
/// work out over fixed subtrees of the reduction, so results are identical
/// for every thread count; `deterministic` gates nothing numeric today but
/// is recorded in run manifests.
struct ExecContext {
  int threads = 1;
  bool deterministic = true;
};

}  // namespace mfnet
