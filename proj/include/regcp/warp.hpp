#pragma once

#include <cstddef>
#include <vector>

#include "regcp/core.hpp"

namespace regcp {

/// Basis for the log-derivative phi(t) = sum_i c_i psi_i(t) of a warp.
struct WarpBasis {
  enum class Kind { Linear, Constant, BSpline };

  Kind kind = Kind::Linear;
  int n_pieces = 1;                  // Constant
  int degree = 3;                    // BSpline
  std::vector<double> interior_knots;  // BSpline, strictly increasing in (0, 1)

  static WarpBasis linear() { return {}; }
  static WarpBasis constant(int n_pieces);
  static WarpBasis bspline(int degree, std::vector<double> interior_knots);

  /// Number of basis functions n.
  std::size_t size() const;
  /// Values psi_1(t) .. psi_n(t).
  Vector evaluate(double t) const;
  void validate() const;
};

/// Warp coefficients for every (component r, slice k) pair.
class WarpParams {
 public:
  WarpParams() = default;
  /// Identity warps (all coefficients zero).
  WarpParams(WarpBasis basis, std::size_t R, std::size_t K, bool shared = false);

  const WarpBasis& basis() const { return basis_; }
  std::size_t R() const { return R_; }
  std::size_t K() const { return K_; }
  bool shared() const { return shared_; }

  const Vector& coeffs(std::size_t r, std::size_t k) const { return coeffs_.at(r * K_ + k); }
  void set_coeffs(std::size_t r, std::size_t k, Vector c);

  /// First coefficient; the whole parameter for the Linear basis.
  double beta(std::size_t r, std::size_t k) const { return coeffs(r, k)[0]; }
  void set_beta(std::size_t r, std::size_t k, double beta);
  /// R x K matrix of first coefficients.
  Matrix beta_matrix() const;

  /// gamma_{r,k}(t_j) for every grid point.
  Vector warped_grid(std::size_t r, std::size_t k, const SampleGrid& grid) const;

  /// Checks finiteness and the shared-warp constraint.
  void validate() const;

 private:
  WarpBasis basis_;
  std::size_t R_ = 0, K_ = 0;
  bool shared_ = false;
  std::vector<Vector> coeffs_;
};

/// Below this |beta| the linear warp and its inverse use a second-order series.
inline constexpr double kLinearWarpSeriesThreshold = 1e-6;
/// Default number of quadrature nodes for the general exponential map.
inline constexpr std::size_t kExpMapQuadraturePoints = 2048;

/// gamma(t) = (1 - exp(-beta t)) / (1 - exp(-beta)).
double warp_eval_linear(double beta, double t);
/// Inverse of warp_eval_linear in its second argument.
double warp_invert_linear(double beta, double s);
/// warp_eval_linear applied to every grid point.
Vector warp_linear_grid(double beta, const SampleGrid& grid);

/// Normalized cumulative integral of exp(phi) evaluated at `t_query`.
Vector warp_eval_expmap(const WarpBasis& basis, const Vector& coeffs, const Vector& t_query,
                        std::size_t quadrature_points = kExpMapQuadraturePoints);

/// Sparse linear-interpolation operator from grid samples to warped points.
///
/// Row j has weight (1 - w_j) on node index_j and w_j on node index_j + 1.
class InterpMatrix {
 public:
  InterpMatrix(const SampleGrid& grid, const Vector& warped_points);

  /// Number of rows (interpolated points).
  std::size_t size() const { return index_.size(); }
  /// Number of columns (grid nodes).
  std::size_t nodes() const { return nodes_; }
  std::size_t index(std::size_t j) const { return index_[j]; }
  double weight(std::size_t j) const { return weight_[j]; }

  /// P f
  Vector apply(const Vector& f) const;
  /// P^T g
  Vector apply_transpose(const Vector& g) const;
  /// Dense size() x nodes() copy.
  Matrix dense() const;

 private:
  std::size_t nodes_ = 0;
  std::vector<std::size_t> index_;
  std::vector<double> weight_;
};

InterpMatrix interp_matrix(const SampleGrid& grid, const Vector& warped_points);

/// Samples f at the warped points by linear interpolation.
Vector interpolate(const SampleGrid& grid, const Vector& f, const Vector& warped_points);

}  // namespace regcp
