#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace roa {

/// Derives an independent stream seed from the run seed and a fixed label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Seeded generator with a platform-independent mapping to [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view label) : engine_(derive_seed(seed, label)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform point in the box [lower, upper].
  Eigen::VectorXd uniform_point(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace roa
