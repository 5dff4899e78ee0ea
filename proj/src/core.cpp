#include "regcp/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regcp {

// ---------------------------------------------------------------------------
// DenseTensor3

DenseTensor3::DenseTensor3(std::size_t I, std::size_t J, std::size_t K)
    : I_(I), J_(J), K_(K), data_(I * J * K, 0.0) {
  if (I == 0 || J == 0 || K == 0) throw DimensionError("tensor dimensions must be positive");
}

DenseTensor3::DenseTensor3(std::size_t I, std::size_t J, std::size_t K, std::vector<double> data)
    : I_(I), J_(J), K_(K), data_(std::move(data)) {
  if (I == 0 || J == 0 || K == 0) throw DimensionError("tensor dimensions must be positive");
  if (data_.size() != I * J * K) {
    std::ostringstream os;
    os << "tensor payload has " << data_.size() << " entries, expected " << I * J * K;
    throw DimensionError(os.str());
  }
  if (!all_finite()) throw NumericalError("tensor contains non-finite entries");
}

DenseTensor3 DenseTensor3::from_slices(const std::vector<Matrix>& slices) {
  if (slices.empty()) throw DimensionError("no slices");
  const auto I = static_cast<std::size_t>(slices.front().rows());
  const auto J = static_cast<std::size_t>(slices.front().cols());
  DenseTensor3 t(I, J, slices.size());
  for (std::size_t k = 0; k < slices.size(); ++k) t.set_slice(k, slices[k]);
  return t;
}

Matrix DenseTensor3::slice(std::size_t k) const {
  if (k >= K_) throw DomainError("slice index out of range");
  Matrix m(I_, J_);
  const double* p = data_.data() + k * I_ * J_;
  for (std::size_t i = 0; i < I_; ++i)
    for (std::size_t j = 0; j < J_; ++j) m(i, j) = p[i * J_ + j];
  return m;
}

void DenseTensor3::set_slice(std::size_t k, const Matrix& m) {
  if (k >= K_) throw DomainError("slice index out of range");
  if (static_cast<std::size_t>(m.rows()) != I_ || static_cast<std::size_t>(m.cols()) != J_)
    throw DimensionError("slice shape mismatch");
  double* p = data_.data() + k * I_ * J_;
  for (std::size_t i = 0; i < I_; ++i)
    for (std::size_t j = 0; j < J_; ++j) p[i * J_ + j] = m(i, j);
}

double DenseTensor3::frobenius_norm_sq() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

bool DenseTensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// FactorModel

FactorModel::FactorModel(Matrix A_, Matrix C_, std::vector<Matrix> B_)
    : A(std::move(A_)), C(std::move(C_)), B(std::move(B_)) {
  normA = Vector::Ones(A.cols());
  normB = Matrix::Ones(C.rows(), C.cols());
  check_shapes();
}

void FactorModel::check_shapes() const {
  const auto R = A.cols();
  if (R < 1) throw DimensionError("rank must be at least 1");
  if (C.cols() != R) throw DimensionError("C has wrong number of columns");
  if (static_cast<std::size_t>(C.rows()) != B.size())
    throw DimensionError("number of B_k matrices must equal the rows of C");
  for (const auto& Bk : B) {
    if (Bk.cols() != R) throw DimensionError("B_k has wrong number of columns");
    if (Bk.rows() != B.front().rows()) throw DimensionError("B_k matrices differ in rows");
  }
}

bool FactorModel::rank_is_identifiable() const { return rank() <= std::min(I(), J()); }

void FactorModel::normalize_A() {
  if (normA.size() != A.cols()) normA = Vector::Ones(A.cols());
  for (Eigen::Index r = 0; r < A.cols(); ++r) {
    const double n = A.col(r).norm();
    normA[r] = n;
    if (n > 0.0) {
      A.col(r) /= n;
      C.col(r) *= n;
    }
  }
}

void FactorModel::normalize_B(std::size_t k) {
  if (normB.rows() != C.rows() || normB.cols() != C.cols()) normB = Matrix::Ones(C.rows(), C.cols());
  auto& Bk = B.at(k);
  const auto kk = static_cast<Eigen::Index>(k);
  for (Eigen::Index r = 0; r < Bk.cols(); ++r) {
    const double n = Bk.col(r).cwiseAbs().maxCoeff();
    normB(kk, r) = n;
    if (n > 0.0) {
      Bk.col(r) /= n;
      C(kk, r) *= n;
    }
  }
}

// ---------------------------------------------------------------------------
// NoiseModel / SampleGrid

NoiseModel NoiseModel::uniform(std::size_t K, double sigma, double sigma_w) {
  NoiseModel n;
  n.sigma = Vector::Constant(static_cast<Eigen::Index>(K), sigma);
  n.sigma_w = sigma_w;
  n.validate(K);
  return n;
}

void NoiseModel::validate(std::size_t K) const {
  if (static_cast<std::size_t>(sigma.size()) != K) throw DimensionError("sigma must have K entries");
  if ((sigma.array() <= 0.0).any() || !(sigma_w > 0.0))
    throw DomainError("noise levels must be strictly positive");
}

SampleGrid::SampleGrid(Vector t) : t_(std::move(t)) {
  if (t_.size() < 2) throw DomainError("sample grid needs at least two points");
  if (t_[0] != 0.0 || t_[t_.size() - 1] != 1.0) throw DomainError("sample grid must start at 0 and end at 1");
  for (Eigen::Index j = 1; j < t_.size(); ++j)
    if (!(t_[j] > t_[j - 1])) throw DomainError("sample grid must be strictly increasing");
}

SampleGrid SampleGrid::uniform(std::size_t J) {
  if (J < 2) throw DomainError("sample grid needs at least two points");
  Vector t(static_cast<Eigen::Index>(J));
  for (std::size_t j = 0; j < J; ++j) t[static_cast<Eigen::Index>(j)] = static_cast<double>(j) / static_cast<double>(J - 1);
  t[t.size() - 1] = 1.0;
  return SampleGrid(std::move(t));
}

// ---------------------------------------------------------------------------
// Model evaluation

Matrix reconstruct_slice(const FactorModel& model, std::size_t k) {
  if (k >= model.K()) throw DomainError("slice index out of range");
  const auto kk = static_cast<Eigen::Index>(k);
  return model.A * model.C.row(kk).asDiagonal() * model.B[k].transpose();
}

static void check_data_model(const DenseTensor3& data, const FactorModel& model) {
  model.check_shapes();
  if (data.I() != model.I() || data.J() != model.J() || data.K() != model.K())
    throw DimensionError("data and model dimensions disagree");
}

double slice_residual_sq(const DenseTensor3& data, const FactorModel& model, std::size_t k) {
  return (data.slice(k) - reconstruct_slice(model, k)).squaredNorm();
}

double ml_cost(const DenseTensor3& data, const FactorModel& model, const NoiseModel& noise) {
  check_data_model(data, model);
  noise.validate(data.K());
  double total = 0.0;
  for (std::size_t k = 0; k < data.K(); ++k) {
    const double s = noise.sigma[static_cast<Eigen::Index>(k)];
    total += slice_residual_sq(data, model, k) / (s * s);
  }
  return total;
}

double relative_fit_error(const DenseTensor3& data, const FactorModel& model) {
  check_data_model(data, model);
  double res = 0.0;
  for (std::size_t k = 0; k < data.K(); ++k) res += slice_residual_sq(data, model, k);
  const double norm = data.frobenius_norm_sq();
  return norm > 0.0 ? std::sqrt(res / norm) : std::sqrt(res);
}

// ---------------------------------------------------------------------------
// Least squares

namespace {

constexpr double kPivotRatio = 1e-12;

void check_pivots(const Eigen::LDLT<Matrix>& ldlt) {
  const Vector d = ldlt.vectorD().cwiseAbs();
  if (d.size() == 0) return;
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() < kPivotRatio * dmax || ldlt.info() != Eigen::Success)
    throw RankDeficientError("normal equations are rank deficient");
}

double quad_objective(const Matrix& H, const Matrix& F, const Matrix& X) {
  return 0.5 * (X.transpose() * H * X).trace() - (F.transpose() * X).trace();
}

double column_objective(const Matrix& H, const Vector& f, const Vector& x) {
  return 0.5 * x.dot(H * x) - f.dot(x);
}

// Exact solve restricted to the free set of each column; kept only when the
// result stays strictly positive and lowers the column objective.
void polish_free_set(const Matrix& H, const Matrix& F, Matrix& X) {
  const auto n = H.rows();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (X(i, c) > 0.0) free.push_back(i);
    if (free.empty()) continue;
    const auto m = static_cast<Eigen::Index>(free.size());
    Matrix Hs(m, m);
    Vector fs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      fs[a] = F(free[a], c);
      for (Eigen::Index b = 0; b < m; ++b) Hs(a, b) = H(free[a], free[b]);
    }
    Eigen::LDLT<Matrix> ldlt(Hs);
    const Vector d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || d.minCoeff() < kPivotRatio * d.maxCoeff()) continue;
    const Vector xs = ldlt.solve(fs);
    if ((xs.array() <= 0.0).any() || !xs.allFinite()) continue;
    Vector candidate = Vector::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) candidate[free[a]] = xs[a];
    const Vector current = X.col(c);
    if (column_objective(H, F.col(c), candidate) <= column_objective(H, F.col(c), current))
      X.col(c) = candidate;
  }
}

}  // namespace

Matrix solve_normal(const Matrix& H, const Matrix& F) {
  if (H.rows() != H.cols() || F.rows() != H.rows()) throw DimensionError("normal system shape mismatch");
  Eigen::LDLT<Matrix> ldlt(H);
  check_pivots(ldlt);
  return ldlt.solve(F);
}

static void check_ridge_shapes(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T) {
  if (Y.rows() != G.rows()) throw DimensionError("G and Y row counts differ");
  if (T.rows() != G.cols() || T.cols() != Y.cols()) throw DimensionError("prior T has wrong shape");
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
}

Matrix solve_ridge_ls(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T) {
  check_ridge_shapes(G, Y, lambda, T);
  Matrix H = G.transpose() * G;
  H.diagonal().array() += lambda;
  const Matrix F = G.transpose() * Y + lambda * T;
  return solve_normal(H, F);
}

double ridge_objective(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T, const Matrix& X) {
  return (Y - G * X).squaredNorm() + lambda * (X - T).squaredNorm();
}

Matrix solve_nonneg_normal(const Matrix& H, const Matrix& F, const std::optional<Matrix>& X0,
                           const NonnegOptions& opts) {
  if (H.rows() != H.cols() || F.rows() != H.rows()) throw DimensionError("normal system shape mismatch");
  const auto n = H.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(H(i, i) > 0.0) && (F.row(i).array() > 0.0).any())
      throw RankDeficientError("nonnegative least squares is unbounded (zero curvature)");

  Matrix X;
  if (X0) {
    if (X0->rows() != n || X0->cols() != F.cols()) throw DimensionError("initial guess has wrong shape");
    X = X0->cwiseMax(0.0);
  } else {
    X = Matrix::Zero(n, F.cols());
    try {
      Matrix clamped = solve_normal(H, F).cwiseMax(0.0);
      if (quad_objective(H, F, clamped) < 0.0) X = std::move(clamped);
    } catch (const RankDeficientError&) {
    }
  }

  double obj = quad_objective(H, F, X);
  for (int it = 0; it < opts.max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(H(i, i) > 0.0)) {
        X.row(i).setZero();
        continue;
      }
      const Eigen::RowVectorXd grad = H.row(i) * X - F.row(i);
      X.row(i) = (X.row(i) - grad / H(i, i)).cwiseMax(0.0);
    }
    const double next = quad_objective(H, F, X);
    const double change = std::abs(obj - next);
    obj = next;
    if (change <= opts.rel_tol * std::max(std::abs(obj), 1e-300)) break;
  }
  polish_free_set(H, F, X);
  return X;
}

Matrix solve_nonneg_ls(const Matrix& G, const Matrix& Y, double lambda, const Matrix& T,
                       const std::optional<Matrix>& X0, const NonnegOptions& opts) {
  check_ridge_shapes(G, Y, lambda, T);
  Matrix H = G.transpose() * G;
  H.diagonal().array() += lambda;
  const Matrix F = G.transpose() * Y + lambda * T;
  return solve_nonneg_normal(H, F, X0, opts);
}

}  // namespace regcp
