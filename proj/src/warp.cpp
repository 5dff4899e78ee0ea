#include "regcp/warp.hpp"

#include <algorithm>
#include <cmath>

namespace regcp {

namespace {

void check_unit(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

// Cox-de Boor recursion on a clamped knot vector.
Vector bspline_values(int degree, const std::vector<double>& knots, double t) {
  const auto n_basis = static_cast<int>(knots.size()) - degree - 1;
  Vector out = Vector::Zero(n_basis);
  if (t >= 1.0) {
    out[n_basis - 1] = 1.0;
    return out;
  }
  // Degree-0 functions on the full knot vector.
  const auto n0 = static_cast<int>(knots.size()) - 1;
  std::vector<double> N(static_cast<std::size_t>(n0), 0.0);
  for (int i = 0; i < n0; ++i)
    if (knots[i] <= t && t < knots[i + 1]) N[i] = 1.0;
  for (int p = 1; p <= degree; ++p) {
    for (int i = 0; i + p < n0; ++i) {
      double v = 0.0;
      const double d1 = knots[i + p] - knots[i];
      const double d2 = knots[i + p + 1] - knots[i + 1];
      if (d1 > 0.0) v += (t - knots[i]) / d1 * N[i];
      if (d2 > 0.0) v += (knots[i + p + 1] - t) / d2 * N[i + 1];
      N[i] = v;
    }
  }
  for (int i = 0; i < n_basis; ++i) out[i] = N[i];
  return out;
}

std::vector<double> clamped_knots(int degree, const std::vector<double>& interior) {
  std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
  k.insert(k.end(), interior.begin(), interior.end());
  k.insert(k.end(), static_cast<std::size_t>(degree + 1), 1.0);
  return k;
}

}  // namespace

// ---------------------------------------------------------------------------
// WarpBasis

WarpBasis WarpBasis::constant(int n_pieces) {
  WarpBasis b;
  b.kind = Kind::Constant;
  b.n_pieces = n_pieces;
  b.validate();
  return b;
}

WarpBasis WarpBasis::bspline(int degree, std::vector<double> interior_knots) {
  WarpBasis b;
  b.kind = Kind::BSpline;
  b.degree = degree;
  b.interior_knots = std::move(interior_knots);
  b.validate();
  return b;
}

void WarpBasis::validate() const {
  switch (kind) {
    case Kind::Linear:
      return;
    case Kind::Constant:
      if (n_pieces < 1) throw ValidationError("constant warp basis needs at least one piece");
      return;
    case Kind::BSpline:
      if (degree < 0) throw ValidationError("B-spline degree must be nonnegative");
      for (std::size_t i = 0; i < interior_knots.size(); ++i) {
        if (!(interior_knots[i] > 0.0 && interior_knots[i] < 1.0))
          throw ValidationError("B-spline interior knots must lie in (0, 1)");
        if (i > 0 && !(interior_knots[i] > interior_knots[i - 1]))
          throw ValidationError("B-spline interior knots must be strictly increasing");
      }
      return;
  }
}

std::size_t WarpBasis::size() const {
  switch (kind) {
    case Kind::Linear:
      return 1;
    case Kind::Constant:
      return static_cast<std::size_t>(n_pieces);
    case Kind::BSpline:
      return interior_knots.size() + static_cast<std::size_t>(degree) + 1;
  }
  return 0;
}

Vector WarpBasis::evaluate(double t) const {
  switch (kind) {
    case Kind::Linear:
      return Vector::Constant(1, -t);
    case Kind::Constant: {
      Vector v = Vector::Zero(n_pieces);
      const auto piece = std::min(n_pieces - 1, static_cast<int>(std::floor(t * n_pieces)));
      v[std::max(piece, 0)] = 1.0;
      return v;
    }
    case Kind::BSpline:
      return bspline_values(degree, clamped_knots(degree, interior_knots), t);
  }
  return {};
}

// ---------------------------------------------------------------------------
// WarpParams

WarpParams::WarpParams(WarpBasis basis, std::size_t R, std::size_t K, bool shared)
    : basis_(std::move(basis)), R_(R), K_(K), shared_(shared) {
  basis_.validate();
  coeffs_.assign(R * K, Vector::Zero(static_cast<Eigen::Index>(basis_.size())));
}

void WarpParams::set_coeffs(std::size_t r, std::size_t k, Vector c) {
  if (static_cast<std::size_t>(c.size()) != basis_.size()) throw DimensionError("wrong number of warp coefficients");
  coeffs_.at(r * K_ + k) = std::move(c);
}

void WarpParams::set_beta(std::size_t r, std::size_t k, double beta) { coeffs_.at(r * K_ + k)[0] = beta; }

Matrix WarpParams::beta_matrix() const {
  Matrix b(R_, K_);
  for (std::size_t r = 0; r < R_; ++r)
    for (std::size_t k = 0; k < K_; ++k) b(r, k) = beta(r, k);
  return b;
}

Vector WarpParams::warped_grid(std::size_t r, std::size_t k, const SampleGrid& grid) const {
  if (basis_.kind == WarpBasis::Kind::Linear) return warp_linear_grid(beta(r, k), grid);
  return warp_eval_expmap(basis_, coeffs(r, k), grid.points());
}

void WarpParams::validate() const {
  for (const auto& c : coeffs_)
    if (!c.allFinite()) throw NumericalError("warp coefficients must be finite");
  if (shared_) {
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t r = 1; r < R_; ++r)
        if (coeffs(r, k) != coeffs(0, k)) throw ValidationError("shared warps differ across components");
  }
}

// ---------------------------------------------------------------------------
// Linear warps

double warp_eval_linear(double beta, double t) {
  check_unit(t, "t");
  if (t == 0.0) return 0.0;
  if (t == 1.0) return 1.0;
  if (std::abs(beta) < kLinearWarpSeriesThreshold) {
    const double u = t * (1.0 - t);
    return t + 0.5 * beta * u + beta * beta * u * (1.0 - 2.0 * t) / 12.0;
  }
  return std::clamp(std::expm1(-beta * t) / std::expm1(-beta), 0.0, 1.0);
}

double warp_invert_linear(double beta, double s) {
  check_unit(s, "s");
  if (s == 0.0) return 0.0;
  if (s == 1.0) return 1.0;
  if (std::abs(beta) < kLinearWarpSeriesThreshold) {
    const double u = s * (1.0 - s);
    return s - 0.5 * beta * u + beta * beta * u * (1.0 - 2.0 * s) / 6.0;
  }
  return std::clamp(-std::log1p(s * std::expm1(-beta)) / beta, 0.0, 1.0);
}

Vector warp_linear_grid(double beta, const SampleGrid& grid) {
  Vector out(grid.points().size());
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = warp_eval_linear(beta, grid.points()[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Exponential map

Vector warp_eval_expmap(const WarpBasis& basis, const Vector& coeffs, const Vector& t_query,
                        std::size_t quadrature_points) {
  basis.validate();
  if (static_cast<std::size_t>(coeffs.size()) != basis.size()) throw DimensionError("wrong number of warp coefficients");
  if (quadrature_points < 2) throw DomainError("quadrature needs at least two points");
  for (Eigen::Index q = 0; q < t_query.size(); ++q) check_unit(t_query[q], "query point");

  const auto Q = static_cast<Eigen::Index>(quadrature_points);
  const double h = 1.0 / static_cast<double>(Q - 1);
  auto density = [&](double s) { return std::exp(basis.evaluate(s).dot(coeffs)); };

  Vector f(Q);
  for (Eigen::Index q = 0; q < Q; ++q) f[q] = density(q == Q - 1 ? 1.0 : static_cast<double>(q) * h);
  Vector cumulative(Q);
  cumulative[0] = 0.0;
  for (Eigen::Index q = 1; q < Q; ++q) cumulative[q] = cumulative[q - 1] + 0.5 * h * (f[q - 1] + f[q]);
  const double total = cumulative[Q - 1];

  Vector out(t_query.size());
  for (Eigen::Index i = 0; i < t_query.size(); ++i) {
    const double t = t_query[i];
    if (t == 0.0) {
      out[i] = 0.0;
      continue;
    }
    if (t == 1.0) {
      out[i] = 1.0;
      continue;
    }
    const auto q = std::min<Eigen::Index>(static_cast<Eigen::Index>(t / h), Q - 2);
    const double tq = static_cast<double>(q) * h;
    const double partial = cumulative[q] + 0.5 * (t - tq) * (f[q] + density(t));
    out[i] = std::clamp(partial / total, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation

InterpMatrix::InterpMatrix(const SampleGrid& grid, const Vector& warped_points) {
  const auto& t = grid.points();
  const auto J = t.size();
  nodes_ = static_cast<std::size_t>(J);
  index_.resize(static_cast<std::size_t>(warped_points.size()));
  weight_.resize(index_.size());
  for (Eigen::Index j = 0; j < warped_points.size(); ++j) {
    const double s = warped_points[j];
    check_unit(s, "warped point");
    auto it = std::upper_bound(t.data(), t.data() + J, s);
    auto i = static_cast<Eigen::Index>(it - t.data()) - 1;
    i = std::clamp<Eigen::Index>(i, 0, J - 2);
    const double w = std::clamp((s - t[i]) / (t[i + 1] - t[i]), 0.0, 1.0);
    index_[static_cast<std::size_t>(j)] = static_cast<std::size_t>(i);
    weight_[static_cast<std::size_t>(j)] = w;
  }
}

Vector InterpMatrix::apply(const Vector& f) const {
  if (static_cast<std::size_t>(f.size()) != nodes_) throw DimensionError("interpolation input size mismatch");
  Vector out(static_cast<Eigen::Index>(index_.size()));
  for (std::size_t j = 0; j < index_.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(index_[j]);
    const double w = weight_[j];
    out[static_cast<Eigen::Index>(j)] = (1.0 - w) * f[i] + w * f[i + 1];
  }
  return out;
}

Vector InterpMatrix::apply_transpose(const Vector& g) const {
  if (static_cast<std::size_t>(g.size()) != index_.size()) throw DimensionError("interpolation transpose size mismatch");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(nodes_));
  for (std::size_t j = 0; j < index_.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(index_[j]);
    const double w = weight_[j];
    out[i] += (1.0 - w) * g[static_cast<Eigen::Index>(j)];
    out[i + 1] += w * g[static_cast<Eigen::Index>(j)];
  }
  return out;
}

Matrix InterpMatrix::dense() const {
  Matrix P = Matrix::Zero(static_cast<Eigen::Index>(index_.size()), static_cast<Eigen::Index>(nodes_));
  for (std::size_t j = 0; j < index_.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(index_[j]);
    P(static_cast<Eigen::Index>(j), i) += 1.0 - weight_[j];
    P(static_cast<Eigen::Index>(j), i + 1) += weight_[j];
  }
  return P;
}

InterpMatrix interp_matrix(const SampleGrid& grid, const Vector& warped_points) {
  if (static_cast<std::size_t>(warped_points.size()) != grid.size())
    throw DimensionError("warped points must match the grid size");
  return InterpMatrix(grid, warped_points);
}

Vector interpolate(const SampleGrid& grid, const Vector& f, const Vector& warped_points) {
  if (static_cast<std::size_t>(f.size()) != grid.size()) throw DimensionError("sample vector must match the grid");
  return InterpMatrix(grid, warped_points).apply(f);
}

}  // namespace regcp
