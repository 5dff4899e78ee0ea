#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "regcp/core.hpp"
#include "regcp/warp.hpp"

namespace regcp {

/// Structural averages b*_r and the per-slice coupling weights lambda_k.
struct CouplingState {
  Matrix Bstar;   // J x R, columns l-infinity normalized
  Vector lambda;  // K
};

struct AlignConfig {
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  int grid_size = 41;
  double golden_tol = 1e-4;
  int golden_max_iter = 100;
  /// Relative residual above which a warp is re-estimated by the coarse grid.
  double coarse_threshold = 1e-2;
  int max_outer = 30;
  double residual_tol = 1e-8;
  /// l-infinity normalize b* after every mean update.
  bool normalize_template = true;
  /// Relative second-difference penalty in the mean update (0 = plain least squares).
  double mean_smoothing = 0.0;

  void validate() const;
  double grid_step() const { return (grid_hi - grid_lo) / (grid_size - 1); }
};

enum class AlignMode { FreeMean, FixedMean };

struct BetaFit {
  double beta = 0.0;
  double residual = 0.0;
  /// Interval used by the golden-section refinement.
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  /// True when the coarse grid was evaluated.
  bool coarse = false;
};

/// Minimizes a one-dimensional warp objective: coarse uniform grid over
/// [cfg.grid_lo, cfg.grid_hi] followed by golden-section refinement on the
/// neighbours of the best grid point. With `bracket`, only the golden-section
/// phase runs, on that interval. Grid ties go to the smallest |beta|.
BetaFit minimize_warp_objective(const std::function<double(double)>& objective, const AlignConfig& cfg,
                                std::optional<std::pair<double, double>> bracket = std::nullopt);

/// Squared residual ||curve - target[gamma_beta]||^2 for a linear-basis warp.
double warp_residual(const Vector& curve, const Vector& target, double beta, const SampleGrid& grid);

/// Best linear-basis beta aligning `target` onto `curve`.
BetaFit fit_beta(const Vector& curve, const Vector& target, const SampleGrid& grid, const AlignConfig& cfg,
                 std::optional<std::pair<double, double>> bracket = std::nullopt);

/// Single beta shared by several (curve, target) pairs, minimizing the summed residual.
BetaFit fit_beta_shared(std::span<const Vector> curves, std::span<const Vector> targets, const SampleGrid& grid,
                        const AlignConfig& cfg,
                        std::optional<std::pair<double, double>> bracket = std::nullopt);

struct StructuredMean {
  Vector mean;
  /// True when the normal matrix was singular and 1e-10 I was added.
  bool regularized = false;
};

/// argmin_b sum_k w_k ||curves_k - P_k b||^2 where P_k interpolates at warped_grids_k.
///
/// Weights default to one; they are rescaled to a maximum of one, and all-zero
/// weights fall back to uniform.
///
/// A positive `smoothing` adds smoothing * max(diag) * ||D2 b||^2 (second
/// differences), which fills nodes the warped grids barely touch.
StructuredMean structured_mean(std::span<const Vector> curves, std::span<const Vector> warped_grids,
                               const SampleGrid& grid, std::optional<Vector> weights = std::nullopt,
                               double smoothing = 0.0);

/// Incremental state of the alternating alignment of K x R curves.
///
/// Curves are supplied as K matrices of size J x R (column r of slice k is
/// the curve b_{r,k}). One call to pass() performs one mean update followed by
/// one warp update for every (r, k).
class Aligner {
 public:
  Aligner(SampleGrid grid, AlignConfig cfg, WarpBasis basis, std::size_t R, std::size_t K, bool shared);

  /// Fixes the structural averages (fixed-mean mode, or a warm start).
  void set_template(const Matrix& Bstar);
  void set_warps(const WarpParams& warps);

  /// Runs one mean update and one warp update. Returns the weighted squared
  /// objective sum_k w_k sum_r ||b_{r,k} - b*_r[gamma_{r,k}]||^2 afterwards.
  double pass(const std::vector<Matrix>& curves, const Vector& weights, AlignMode mode);

  /// Mean update only (least-squares solve, or template choice on the first call).
  void update_mean(const std::vector<Matrix>& curves, const Vector& weights);
  /// Warp update only.
  void update_warps(const std::vector<Matrix>& curves);

  double objective(const std::vector<Matrix>& curves, const Vector& weights) const;
  /// sum_k w_k sum_r ||b_{r,k} - b*_r[gamma_{r,k}]|| (unsquared norms).
  double residual_norm_sum(const std::vector<Matrix>& curves, const Vector& weights) const;

  /// b*_r[gamma_{r,k}] for all r, as a J x R matrix.
  Matrix warped_template(std::size_t k) const;

  const Matrix& Bstar() const { return Bstar_; }
  const WarpParams& warps() const { return warps_; }
  const SampleGrid& grid() const { return grid_; }
  bool template_initialized() const { return have_template_; }
  /// Number of mean updates that needed regularization.
  int regularized_means() const { return regularized_means_; }

 private:
  double pair_objective(const Vector& curve, std::size_t r, std::size_t k, const Vector& coeffs) const;
  Vector warped_points(const Vector& coeffs) const;
  Vector inverse_warped_points(std::size_t r, std::size_t k) const;
  void choose_template(const std::vector<Matrix>& curves, const Vector& weights);
  void solve_means(const std::vector<Matrix>& curves, const Vector& weights);
  BetaFit search(const std::function<double(double)>& obj, double current, double current_res,
                 double energy, std::size_t slot);

  SampleGrid grid_;
  AlignConfig cfg_;
  std::size_t R_, K_;
  bool shared_;
  WarpParams warps_;
  Matrix Bstar_;
  bool have_template_ = false;
  int regularized_means_ = 0;
  std::vector<bool> has_bracket_;
};

struct AlignResult {
  CouplingState coupling;
  WarpParams warps;
  /// Weighted squared objective after every outer iteration.
  std::vector<double> objective_trace;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Alternating estimation of structural averages and warps for K x R curves.
///
/// In FixedMean mode `fixed_template` (J x R) is kept as b*. Weights default to
/// one (they play the role of lambda_k).
AlignResult align_curves(const std::vector<Matrix>& curves, const SampleGrid& grid, const AlignConfig& cfg,
                         AlignMode mode, bool shared, const std::optional<Matrix>& fixed_template = std::nullopt,
                         const WarpBasis& basis = WarpBasis::linear(),
                         std::optional<Vector> weights = std::nullopt);

/// Divides every column by its largest absolute entry (zero columns untouched).
void normalize_columns_linf(Matrix& m);

}  // namespace regcp
