#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "regcp/error.hpp"

namespace regcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Three-way data array stored as K stacked I x J slices.
///
/// Storage is slice-major and row-major within a slice:
/// entry (i, j, k) lives at data[k * I * J + i * J + j].
class DenseTensor3 {
 public:
  DenseTensor3() = default;
  DenseTensor3(std::size_t I, std::size_t J, std::size_t K);
  DenseTensor3(std::size_t I, std::size_t J, std::size_t K, std::vector<double> data);
  /// Builds a tensor from K slices of identical shape.
  static DenseTensor3 from_slices(const std::vector<Matrix>& slices);

  std::size_t I() const { return I_; }
  std::size_t J() const { return J_; }
  std::size_t K() const { return K_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(k * I_ + i) * J_ + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(k * I_ + i) * J_ + j];
  }

  /// Copy of slice k as an I x J matrix.
  Matrix slice(std::size_t k) const;
  void set_slice(std::size_t k, const Matrix& m);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double frobenius_norm_sq() const;
  bool all_finite() const;

 private:
  std::size_t I_ = 0, J_ = 0, K_ = 0;
  std::vector<double> data_;
};

/// Factors of the coupled slice model M_k ~ A diag(C(k,:)) B_k^T.
///
/// Column scales removed by normalization are absorbed into C; normA and
/// normB keep the most recently absorbed norms for diagnostics only.
struct FactorModel {
  Matrix A;               // I x R
  Matrix C;               // K x R
  std::vector<Matrix> B;  // K matrices, each J x R
  Vector normA;           // R
  Matrix normB;           // K x R

  FactorModel() = default;
  FactorModel(Matrix A, Matrix C, std::vector<Matrix> B);

  std::size_t rank() const { return static_cast<std::size_t>(A.cols()); }
  std::size_t I() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t J() const { return B.empty() ? 0 : static_cast<std::size_t>(B.front().rows()); }
  std::size_t K() const { return static_cast<std::size_t>(C.rows()); }

  /// Throws DimensionError if the factor shapes are inconsistent.
  void check_shapes() const;
  /// True when R <= min(I, J).
  bool rank_is_identifiable() const;

  /// Rescale columns of A to unit l2 norm, moving the scale into C.
  void normalize_A();
  /// Rescale columns of B_k to unit l-infinity norm, moving the scale into C(k,:).
  void normalize_B(std::size_t k);
};

/// Per-slice noise levels sigma_k and the coupling noise level sigma_w.
struct NoiseModel {
  Vector sigma;
  double sigma_w = 1.0;

  static NoiseModel uniform(std::size_t K, double sigma, double sigma_w);
  void validate(std::size_t K) const;
};

/// Strictly increasing sample points on [0, 1] with t_1 = 0 and t_J = 1.
class SampleGrid {
 public:
  explicit SampleGrid(Vector t);
  static SampleGrid uniform(std::size_t J);

  std::size_t size() const { return static_cast<std::size_t>(t_.size()); }
  const Vector& points() const { return t_; }
  double operator[](std::size_t j) const { return t_[static_cast<Eigen::Index>(j)]; }

 private:
  Vector t_;
};

/// A diag(C(k,:)) B_k^T.
Matrix reconstruct_slice(const FactorModel& model, std::size_t k);

/// Sum over slices of ||M_k - A D_k B_k^T||_F^2 / sigma_k^2.
double ml_cost(const DenseTensor3& data, const FactorModel& model, const NoiseModel& noise);

/// ||M_k - A D_k B_k^T||_F^2 for one slice.
double slice_residual_sq(const DenseTensor3& data, const FactorModel& model, std::size_t k);

/// Relative reconstruction error ||M - M_hat||_F / ||M||_F.
double relative_fit_error(const DenseTensor3& data, const FactorModel& model);

// ---------------------------------------------------------------------------
// Least-squares kernels

/// Solves the symmetric positive (semi)definite system H X = F.
///
/// Throws RankDeficientError when a pivot of the LDL^T factorization is below
/// 1e-12 times the largest pivot.
Matrix solve_normal(const Matrix& H, const Matrix& F);

/// argmin_X ||Y - G X||_F^2 + lambda ||X - T||_F^2.
Matrix solve_ridge_ls(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T);

struct NonnegOptions {
  int max_iter = 50;
  double rel_tol = 1e-10;
};

/// Minimizes 0.5 tr(X^T H X) - tr(F^T X) subject to X >= 0.
///
/// Cyclic coordinate descent over the rows of X (one factor column per row),
/// started from `X0` when given, otherwise from the better of zero and the
/// clamped unconstrained solution. A final exact solve on the detected free set
/// is accepted whenever it is feasible and does not raise the objective.
Matrix solve_nonneg_normal(const Matrix& H, const Matrix& F,
                           const std::optional<Matrix>& X0 = std::nullopt,
                           const NonnegOptions& opts = {});

/// Nonnegative version of solve_ridge_ls.
Matrix solve_nonneg_ls(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T,
                       const std::optional<Matrix>& X0 = std::nullopt,
                       const NonnegOptions& opts = {});

/// ||Y - G X||_F^2 + lambda ||X - T||_F^2.
double ridge_objective(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T,
                       const Matrix& X);

}  // namespace regcp
