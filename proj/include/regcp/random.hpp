#pragma once

#include <cstdint>
#include <random>

namespace regcp {

/// Seedable generator with a fixed, documented output stream.
///
/// Raw bits come from std::mt19937_64 (whose sequence is fixed by the C++
/// standard). Uniform variates use the top 53 bits; normal variates use the
/// Box-Muller transform, consuming two uniforms per pair.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/uniform53/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace regcp
