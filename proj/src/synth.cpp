#include "regcp/synth.hpp"

#include <cmath>

#include "regcp/random.hpp"
#include "regcp/warp.hpp"

namespace regcp {

namespace {

void check_range(const std::pair<double, double>& r, const char* name) {
  if (!(r.first <= r.second) || !std::isfinite(r.first) || !std::isfinite(r.second))
    throw ValidationError(std::string(name) + " must be an ordered finite range");
}

}  // namespace

void SynthConfig::validate() const {
  if (I == 0 || J == 0 || K == 0 || R == 0) throw ValidationError("synthetic dimensions must be positive");
  if (J < 2) throw ValidationError("J must be at least 2");
  if (std::isnan(snr_db)) throw ValidationError("snr_db must be a number");
  check_range(beta_intercept_range, "beta_intercept_range");
  check_range(beta_slope_range, "beta_slope_range");
  check_range(bump_width_range, "bump_width_range");
  check_range(mode_range, "mode_range");
  if (!(bump_width_range.first > 0.0)) throw ValidationError("bump widths must be positive");
  if (mode_range.first < 0.0 || mode_range.second > 1.0) throw ValidationError("mode_range must lie in [0, 1]");
}

double synth_noise_sigma(std::size_t R, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  return std::sqrt(static_cast<double>(R)) * std::pow(10.0, -snr_db / 20.0);
}

SyntheticData generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto I = static_cast<Eigen::Index>(cfg.I);
  const auto J = static_cast<Eigen::Index>(cfg.J);
  const auto K = static_cast<Eigen::Index>(cfg.K);
  const auto R = static_cast<Eigen::Index>(cfg.R);
  Rng rng(cfg.seed);

  GroundTruth truth;
  truth.seed = cfg.seed;
  Matrix A(I, R), C(K, R);
  for (Eigen::Index i = 0; i < I; ++i)
    for (Eigen::Index r = 0; r < R; ++r) A(i, r) = rng.uniform();
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index r = 0; r < R; ++r) C(k, r) = rng.uniform();

  // Non-overlapping bumps: |mu_r - mu_s| > 2 (s_r + s_s).
  constexpr int kMaxDraws = 1000;
  Vector modes(R), widths(R);
  bool accepted = false;
  for (int draw = 0; draw < kMaxDraws && !accepted; ++draw) {
    for (Eigen::Index r = 0; r < R; ++r) {
      widths[r] = rng.uniform(cfg.bump_width_range.first, cfg.bump_width_range.second);
      modes[r] = rng.uniform(cfg.mode_range.first, cfg.mode_range.second);
    }
    accepted = true;
    for (Eigen::Index r = 0; r < R && accepted; ++r)
      for (Eigen::Index s = r + 1; s < R && accepted; ++s)
        if (!(std::abs(modes[r] - modes[s]) > 2.0 * (widths[r] + widths[s]))) accepted = false;
  }
  if (!accepted)
    throw ValidationError("could not place non-overlapping bumps after 1000 draws; use smaller widths");

  Matrix beta(R, K);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double intercept = rng.uniform(cfg.beta_intercept_range.first, cfg.beta_intercept_range.second);
    const double slope = rng.uniform(cfg.beta_slope_range.first, cfg.beta_slope_range.second);
    for (Eigen::Index k = 0; k < K; ++k) {
      const double frac = K > 1 ? static_cast<double>(k) / static_cast<double>(K - 1) : 0.0;
      beta(r, k) = intercept + slope * frac;
    }
  }

  const SampleGrid grid = SampleGrid::uniform(cfg.J);
  auto bump = [&](Eigen::Index r, double t) {
    const double z = (t - modes[r]) / widths[r];
    return std::exp(-0.5 * z * z);
  };
  Matrix Bstar(J, R);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index r = 0; r < R; ++r) Bstar(j, r) = bump(r, grid[static_cast<std::size_t>(j)]);

  std::vector<Matrix> Bk(cfg.K, Matrix(J, R));
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index r = 0; r < R; ++r)
      for (Eigen::Index j = 0; j < J; ++j)
        Bk[static_cast<std::size_t>(k)](j, r) = bump(r, warp_eval_linear(beta(r, k), grid[static_cast<std::size_t>(j)]));

  truth.model = FactorModel(std::move(A), std::move(C), std::move(Bk));
  truth.Bstar = std::move(Bstar);
  truth.beta = std::move(beta);
  truth.modes = std::move(modes);
  truth.widths = std::move(widths);
  truth.noise_sigma = synth_noise_sigma(cfg.R, cfg.snr_db);

  DenseTensor3 tensor(cfg.I, cfg.J, cfg.K);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    Matrix slice = reconstruct_slice(truth.model, k);
    if (truth.noise_sigma > 0.0)
      for (Eigen::Index i = 0; i < I; ++i)
        for (Eigen::Index j = 0; j < J; ++j) slice(i, j) += truth.noise_sigma * rng.normal();
    tensor.set_slice(k, slice);
  }
  return {std::move(tensor), std::move(truth)};
}

double measured_snr(const DenseTensor3& data, const GroundTruth& truth) {
  const auto& model = truth.model;
  if (data.I() != model.I() || data.J() != model.J() || data.K() != model.K())
    throw DimensionError("data and ground truth dimensions disagree");
  double signal = 0.0, noise = 0.0;
  for (std::size_t k = 0; k < data.K(); ++k) {
    const Matrix s = reconstruct_slice(model, k);
    signal += s.squaredNorm();
    noise += (data.slice(k) - s).squaredNorm();
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace regcp
