#pragma once

#include <cmath>
#include <random>

#include "regcp/core.hpp"

namespace testutil {

using regcp::Matrix;
using regcp::Vector;

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(gen);
  return m;
}

inline regcp::FactorModel random_model(std::mt19937_64& gen, std::size_t I, std::size_t J, std::size_t K,
                                       std::size_t R, double lo = -1.0, double hi = 1.0) {
  const auto ii = static_cast<Eigen::Index>(I), jj = static_cast<Eigen::Index>(J),
             kk = static_cast<Eigen::Index>(K), rr = static_cast<Eigen::Index>(R);
  std::vector<Matrix> B;
  for (std::size_t k = 0; k < K; ++k) B.push_back(random_matrix(gen, jj, rr, lo, hi));
  return regcp::FactorModel(random_matrix(gen, ii, rr, lo, hi), random_matrix(gen, kk, rr, lo, hi), std::move(B));
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double n = std::max(a.norm(), b.norm());
  return n == 0.0 ? 0.0 : (a - b).norm() / n;
}

// Entry-wise sum_r c_kr a_ir b_jr with plain loops.
inline Matrix naive_slice(const regcp::FactorModel& m, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix out = Matrix::Zero(m.A.rows(), m.B[k].rows());
  for (Eigen::Index i = 0; i < m.A.rows(); ++i)
    for (Eigen::Index j = 0; j < m.B[k].rows(); ++j)
      for (Eigen::Index r = 0; r < m.A.cols(); ++r) out(i, j) += m.C(kk, r) * m.A(i, r) * m.B[k](j, r);
  return out;
}

inline regcp::DenseTensor3 tensor_of(const regcp::FactorModel& m) {
  std::vector<Matrix> s;
  for (std::size_t k = 0; k < m.K(); ++k) s.push_back(naive_slice(m, k));
  return regcp::DenseTensor3::from_slices(s);
}

// Mode-1 unfolding oracle: [M_1 ... M_K] = A [B_1 D_1; ...; B_K D_K]^T.
inline Matrix oracle_A(const std::vector<Matrix>& slices, const regcp::FactorModel& m) {
  const auto I = m.A.rows(), R = m.A.cols();
  Eigen::Index J = 0;
  for (const auto& s : slices) J += s.cols();
  Matrix X(I, J), Z(J, R);
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto n = slices[k].cols();
    X.middleCols(off, n) = slices[k];
    Z.middleRows(off, n) = m.B[k] * m.C.row(static_cast<Eigen::Index>(k)).asDiagonal();
    off += n;
  }
  return Z.colPivHouseholderQr().solve(X.transpose()).transpose();
}

// Khatri-Rao design: vec(M_k) = [vec(a_1 b_1^T) ... vec(a_R b_R^T)] d.
inline Vector oracle_D(const Matrix& Mk, const Matrix& A, const Matrix& Bk) {
  const auto R = A.cols();
  Matrix W(A.rows() * Bk.rows(), R);
  for (Eigen::Index r = 0; r < R; ++r) {
    Matrix outer = A.col(r) * Bk.col(r).transpose();
    W.col(r) = outer.reshaped();
  }
  Vector y = Mk.reshaped();
  return W.colPivHouseholderQr().solve(y);
}

// Augmented system [A D_k; sqrt(l) I] B_k^T = [M_k; sqrt(l) T^T].
inline Matrix oracle_B(const Matrix& Mk, const Matrix& A, const Vector& d, const Matrix& T, double lambda) {
  const auto I = A.rows(), R = A.cols(), J = Mk.cols();
  Matrix G(I + R, R), Y(I + R, J);
  G << A * d.asDiagonal(), std::sqrt(lambda) * Matrix::Identity(R, R);
  Y << Mk, std::sqrt(lambda) * T.transpose();
  return G.colPivHouseholderQr().solve(Y).transpose();
}

}  // namespace testutil
