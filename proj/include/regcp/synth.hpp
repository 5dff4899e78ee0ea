#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "regcp/core.hpp"

namespace regcp {

struct SynthConfig {
  std::size_t I = 15, J = 200, K = 10, R = 3;
  /// Nominal SNR in dB; +infinity disables the noise.
  double snr_db = 40.0;
  std::pair<double, double> beta_intercept_range{-0.5, 0.5};
  std::pair<double, double> beta_slope_range{-3.0, 3.0};
  /// Bump standard deviations, as fractions of [0, 1].
  std::pair<double, double> bump_width_range{0.03, 0.08};
  /// Range for the bump modes.
  std::pair<double, double> mode_range{0.1, 0.9};
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  FactorModel model;   // raw A, C and warped bumps B_k
  Matrix Bstar;        // J x R, unwarped bumps
  Matrix beta;         // R x K
  Vector modes;        // R
  Vector widths;       // R
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  DenseTensor3 tensor;
  GroundTruth truth;
};

/// sqrt(R) 10^(-snr/20); zero for infinite SNR.
double synth_noise_sigma(std::size_t R, double snr_db);

/// Draws A, C, bumps, warps and noise in that order from Rng(cfg.seed).
SyntheticData generate(const SynthConfig& cfg);

/// 10 log10(||signal||^2 / ||data - signal||^2); +infinity when noise-free.
double measured_snr(const DenseTensor3& data, const GroundTruth& truth);

}  // namespace regcp
