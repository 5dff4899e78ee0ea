#include "regcp/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>

#include "regcp/golden.hpp"

namespace regcp {

void AlignConfig::validate() const {
  if (!(grid_lo < grid_hi)) throw ValidationError("align grid_lo must be below grid_hi");
  if (grid_size < 3) throw ValidationError("align grid_size must be at least 3");
  if (!(golden_tol >= 0.0)) throw ValidationError("golden_tol must be nonnegative");
  if (golden_max_iter < 1) throw ValidationError("golden_max_iter must be positive");
  if (max_outer < 1) throw ValidationError("max_outer must be positive");
  if (!(residual_tol >= 0.0)) throw ValidationError("residual_tol must be nonnegative");
}

void normalize_columns_linf(Matrix& m) {
  for (Eigen::Index r = 0; r < m.cols(); ++r) {
    const double n = m.col(r).cwiseAbs().maxCoeff();
    if (n > 0.0) m.col(r) /= n;
  }
}

// ---------------------------------------------------------------------------
// One-dimensional search

BetaFit minimize_warp_objective(const std::function<double(double)>& objective, const AlignConfig& cfg,
                                std::optional<std::pair<double, double>> bracket) {
  cfg.validate();
  BetaFit fit;
  if (bracket) {
    auto [lo, hi] = *bracket;
    if (lo > hi) std::swap(lo, hi);
    const auto g = golden_section_minimize(objective, lo, hi, cfg.golden_tol, cfg.golden_max_iter);
    fit.beta = g.x;
    fit.residual = g.fx;
    fit.bracket_lo = lo;
    fit.bracket_hi = hi;
    return fit;
  }

  const double step = cfg.grid_step();
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  double best_abs = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.grid_size; ++i) {
    const double beta = i == cfg.grid_size - 1 ? cfg.grid_hi : cfg.grid_lo + i * step;
    const double val = objective(beta);
    if (val < best_val || (val == best_val && std::abs(beta) < best_abs)) {
      best = i;
      best_val = val;
      best_abs = std::abs(beta);
    }
  }
  const double best_beta = best == cfg.grid_size - 1 ? cfg.grid_hi : cfg.grid_lo + best * step;
  const double lo = std::max(cfg.grid_lo, best_beta - step);
  const double hi = std::min(cfg.grid_hi, best_beta + step);
  const auto g = golden_section_minimize(objective, lo, hi, cfg.golden_tol, cfg.golden_max_iter);

  fit.coarse = true;
  fit.bracket_lo = lo;
  fit.bracket_hi = hi;
  if (g.fx < best_val) {
    fit.beta = g.x;
    fit.residual = g.fx;
  } else {
    fit.beta = best_beta;
    fit.residual = best_val;
  }
  return fit;
}

double warp_residual(const Vector& curve, const Vector& target, double beta, const SampleGrid& grid) {
  if (curve.size() != target.size() || static_cast<std::size_t>(curve.size()) != grid.size())
    throw DimensionError("curve, target and grid sizes differ");
  const auto& t = grid.points();
  double s = 0.0;
  InterpMatrix P(grid, warp_linear_grid(beta, grid));
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(P.index(static_cast<std::size_t>(j)));
    const double w = P.weight(static_cast<std::size_t>(j));
    const double d = curve[j] - ((1.0 - w) * target[i] + w * target[i + 1]);
    s += d * d;
  }
  return s;
}

BetaFit fit_beta(const Vector& curve, const Vector& target, const SampleGrid& grid, const AlignConfig& cfg,
                 std::optional<std::pair<double, double>> bracket) {
  auto obj = [&](double beta) { return warp_residual(curve, target, beta, grid); };
  return minimize_warp_objective(obj, cfg, bracket);
}

BetaFit fit_beta_shared(std::span<const Vector> curves, std::span<const Vector> targets, const SampleGrid& grid,
                        const AlignConfig& cfg, std::optional<std::pair<double, double>> bracket) {
  if (curves.size() != targets.size() || curves.empty()) throw DimensionError("curves and targets must pair up");
  auto obj = [&](double beta) {
    double s = 0.0;
    for (std::size_t r = 0; r < curves.size(); ++r) s += warp_residual(curves[r], targets[r], beta, grid);
    return s;
  };
  return minimize_warp_objective(obj, cfg, bracket);
}

// ---------------------------------------------------------------------------
// Structural mean

StructuredMean structured_mean(std::span<const Vector> curves, std::span<const Vector> warped_grids,
                               const SampleGrid& grid, std::optional<Vector> weights, double smoothing) {
  if (curves.empty()) throw DimensionError("structured mean needs at least one curve");
  if (warped_grids.size() != curves.size()) throw DimensionError("one warped grid per curve required");
  const auto J = static_cast<Eigen::Index>(grid.size());
  const auto K = curves.size();

  Vector w = weights ? *weights : Vector::Ones(static_cast<Eigen::Index>(K));
  if (static_cast<std::size_t>(w.size()) != K) throw DimensionError("one weight per curve required");
  if ((w.array() < 0.0).any()) throw DomainError("weights must be nonnegative");
  const double wmax = w.maxCoeff();
  if (wmax > 0.0)
    w /= wmax;
  else
    w.setOnes();

  // P^T P is tridiagonal: diag d, super-diagonal e.
  Vector d = Vector::Zero(J), e = Vector::Zero(J - 1), rhs = Vector::Zero(J);
  for (std::size_t k = 0; k < K; ++k) {
    if (curves[k].size() != J || warped_grids[k].size() != J) throw DimensionError("curve length must equal J");
    const InterpMatrix P(grid, warped_grids[k]);
    const double wk = w[static_cast<Eigen::Index>(k)];
    if (wk == 0.0) continue;
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto i = static_cast<Eigen::Index>(P.index(static_cast<std::size_t>(j)));
      const double b = P.weight(static_cast<std::size_t>(j));
      const double a = 1.0 - b;
      d[i] += wk * a * a;
      d[i + 1] += wk * b * b;
      e[i] += wk * a * b;
      rhs[i] += wk * a * curves[k][j];
      rhs[i + 1] += wk * b * curves[k][j];
    }
  }

  auto solve = [&](const Vector& diag, Vector& x) -> bool {
    const double scale = diag.maxCoeff();
    Vector piv(J), y(J);
    piv[0] = diag[0];
    y[0] = rhs[0];
    if (!(piv[0] > 1e-12 * scale)) return false;
    for (Eigen::Index j = 1; j < J; ++j) {
      const double l = e[j - 1] / piv[j - 1];
      piv[j] = diag[j] - l * e[j - 1];
      if (!(piv[j] > 1e-12 * scale)) return false;
      y[j] = rhs[j] - l * y[j - 1];
    }
    x.resize(J);
    x[J - 1] = y[J - 1] / piv[J - 1];
    for (Eigen::Index j = J - 2; j >= 0; --j) x[j] = (y[j] - e[j] * x[j + 1]) / piv[j];
    return true;
  };

  StructuredMean out;
  if (smoothing > 0.0) {
    const double eps = smoothing * d.maxCoeff();
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index j = 0; j < J; ++j) trip.emplace_back(j, j, d[j]);
    for (Eigen::Index j = 0; j + 1 < J; ++j) {
      trip.emplace_back(j, j + 1, e[j]);
      trip.emplace_back(j + 1, j, e[j]);
    }
    for (Eigen::Index j = 0; j + 2 < J; ++j) {
      const Eigen::Index idx[3] = {j, j + 1, j + 2};
      const double c[3] = {1.0, -2.0, 1.0};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) trip.emplace_back(idx[a], idx[b], eps * c[a] * c[b]);
    }
    Eigen::SparseMatrix<double> N(J, J);
    N.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(N);
    if (ldlt.info() == Eigen::Success) {
      out.mean = ldlt.solve(rhs);
      if (ldlt.info() == Eigen::Success && out.mean.allFinite()) return out;
    }
  }
  if (!solve(d, out.mean)) {
    out.regularized = true;
    const Vector reg = d.array() + 1e-10;
    if (!solve(reg, out.mean)) throw NumericalError("structured mean system is singular");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aligner

Aligner::Aligner(SampleGrid grid, AlignConfig cfg, WarpBasis basis, std::size_t R, std::size_t K, bool shared)
    : grid_(std::move(grid)), cfg_(cfg), R_(R), K_(K), shared_(shared), warps_(std::move(basis), R, K, shared),
      Bstar_(Matrix::Zero(static_cast<Eigen::Index>(grid_.size()), static_cast<Eigen::Index>(R))),
      has_bracket_(R * K, false) {
  cfg_.validate();
}

void Aligner::set_template(const Matrix& Bstar) {
  if (static_cast<std::size_t>(Bstar.rows()) != grid_.size() || static_cast<std::size_t>(Bstar.cols()) != R_)
    throw DimensionError("template must be J x R");
  Bstar_ = Bstar;
  have_template_ = true;
}

void Aligner::set_warps(const WarpParams& warps) {
  if (warps.R() != R_ || warps.K() != K_) throw DimensionError("warp parameters have wrong shape");
  warps_ = warps;
}

Vector Aligner::warped_points(const Vector& coeffs) const {
  if (warps_.basis().kind == WarpBasis::Kind::Linear) return warp_linear_grid(coeffs[0], grid_);
  return warp_eval_expmap(warps_.basis(), coeffs, grid_.points());
}

Vector Aligner::inverse_warped_points(std::size_t r, std::size_t k) const {
  const auto& t = grid_.points();
  const auto J = t.size();
  Vector out(J);
  if (warps_.basis().kind == WarpBasis::Kind::Linear) {
    for (Eigen::Index j = 0; j < J; ++j) out[j] = warp_invert_linear(warps_.beta(r, k), t[j]);
    return out;
  }
  // Invert the monotone warped grid by linear interpolation of (gamma(t_j), t_j).
  const Vector g = warped_points(warps_.coeffs(r, k));
  Eigen::Index i = 0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double s = t[j];
    while (i < J - 2 && g[i + 1] < s) ++i;
    const double span = g[i + 1] - g[i];
    const double w = span > 0.0 ? std::clamp((s - g[i]) / span, 0.0, 1.0) : 0.0;
    out[j] = std::clamp((1.0 - w) * t[i] + w * t[i + 1], 0.0, 1.0);
  }
  out[0] = 0.0;
  out[J - 1] = 1.0;
  return out;
}

double Aligner::pair_objective(const Vector& curve, std::size_t r, std::size_t, const Vector& coeffs) const {
  const Vector warped = interpolate(grid_, Bstar_.col(static_cast<Eigen::Index>(r)), warped_points(coeffs));
  return (curve - warped).squaredNorm();
}

Matrix Aligner::warped_template(std::size_t k) const {
  Matrix out(Bstar_.rows(), Bstar_.cols());
  for (std::size_t r = 0; r < R_; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    out.col(rr) = interpolate(grid_, Bstar_.col(rr), warped_points(warps_.coeffs(r, k)));
  }
  return out;
}

double Aligner::objective(const std::vector<Matrix>& curves, const Vector& weights) const {
  double total = 0.0;
  for (std::size_t k = 0; k < K_; ++k)
    total += weights[static_cast<Eigen::Index>(k)] * (curves[k] - warped_template(k)).squaredNorm();
  return total;
}

double Aligner::residual_norm_sum(const std::vector<Matrix>& curves, const Vector& weights) const {
  double total = 0.0;
  for (std::size_t k = 0; k < K_; ++k) {
    const Matrix diff = curves[k] - warped_template(k);
    for (Eigen::Index r = 0; r < diff.cols(); ++r)
      total += weights[static_cast<Eigen::Index>(k)] * diff.col(r).norm();
  }
  return total;
}

void Aligner::choose_template(const std::vector<Matrix>& curves, const Vector& weights) {
  const bool linear = warps_.basis().kind == WarpBasis::Kind::Linear;
  for (std::size_t r = 0; r < R_; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    double best = std::numeric_limits<double>::infinity();
    Vector best_curve;
    for (std::size_t k = 0; k < K_; ++k) {
      const Vector candidate = interpolate(grid_, curves[k].col(rr), inverse_warped_points(r, k));
      // Score each candidate by the residual left after re-fitting every warp
      // against it, so the pick does not depend on the starting warps.
      double score = 0.0;
      for (std::size_t k2 = 0; k2 < K_; ++k2) {
        double res = 0.0;
        if (linear) {
          res = fit_beta(curves[k2].col(rr), candidate, grid_, cfg_).residual;
        } else {
          const Vector warped = interpolate(grid_, candidate, warped_points(warps_.coeffs(r, k2)));
          res = (curves[k2].col(rr) - warped).squaredNorm();
        }
        score += weights[static_cast<Eigen::Index>(k2)] * res;
      }
      if (score < best) {
        best = score;
        best_curve = candidate;
      }
    }
    Bstar_.col(rr) = best_curve;
  }
  if (cfg_.normalize_template) normalize_columns_linf(Bstar_);
  have_template_ = true;
}

void Aligner::solve_means(const std::vector<Matrix>& curves, const Vector& weights) {
  std::vector<Vector> cs(K_), gs(K_);
  for (std::size_t r = 0; r < R_; ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    for (std::size_t k = 0; k < K_; ++k) {
      cs[k] = curves[k].col(rr);
      gs[k] = warped_points(warps_.coeffs(r, k));
    }
    auto m = structured_mean(cs, gs, grid_, weights, cfg_.mean_smoothing);
    if (m.regularized) ++regularized_means_;
    Bstar_.col(rr) = m.mean;
  }
  if (cfg_.normalize_template) normalize_columns_linf(Bstar_);
}

void Aligner::update_mean(const std::vector<Matrix>& curves, const Vector& weights) {
  if (!have_template_)
    choose_template(curves, weights);
  else
    solve_means(curves, weights);
}

BetaFit Aligner::search(const std::function<double(double)>& obj, double current, double current_res,
                        double energy, std::size_t slot) {
  const double rel = energy > 0.0 ? current_res / energy : 0.0;
  BetaFit fit;
  if (!has_bracket_[slot] || rel > cfg_.coarse_threshold) {
    fit = minimize_warp_objective(obj, cfg_);
    has_bracket_[slot] = true;
  } else {
    const double step = cfg_.grid_step();
    double lo = std::max(cfg_.grid_lo, current - step);
    double hi = std::min(cfg_.grid_hi, current + step);
    if (!(lo < hi)) {
      lo = current - step;
      hi = current + step;
    }
    fit = minimize_warp_objective(obj, cfg_, std::make_pair(lo, hi));
  }
  if (!(fit.residual < current_res)) {
    fit.beta = current;
    fit.residual = current_res;
  }
  return fit;
}

void Aligner::update_warps(const std::vector<Matrix>& curves) {
  if (!have_template_) throw Error("alignment template is not initialized");
  const std::size_t n = warps_.basis().size();

  auto slot_objective = [&](std::size_t k, const std::vector<std::size_t>& rs, const Vector& coeffs) {
    double s = 0.0;
    for (std::size_t r : rs) s += pair_objective(curves[k].col(static_cast<Eigen::Index>(r)), r, k, coeffs);
    return s;
  };

  auto fit_group = [&](std::size_t k, const std::vector<std::size_t>& rs, std::size_t slot) {
    Vector coeffs = warps_.coeffs(rs.front(), k);
    double energy = 0.0;
    for (std::size_t r : rs) energy += curves[k].col(static_cast<Eigen::Index>(r)).squaredNorm();
    for (std::size_t i = 0; i < n; ++i) {
      const double current_res = slot_objective(k, rs, coeffs);
      auto obj = [&](double x) {
        Vector c = coeffs;
        c[static_cast<Eigen::Index>(i)] = x;
        return slot_objective(k, rs, c);
      };
      const auto fit = search(obj, coeffs[static_cast<Eigen::Index>(i)], current_res, energy, slot);
      coeffs[static_cast<Eigen::Index>(i)] = fit.beta;
    }
    for (std::size_t r : rs) warps_.set_coeffs(r, k, coeffs);
  };

  for (std::size_t k = 0; k < K_; ++k) {
    if (shared_) {
      std::vector<std::size_t> rs(R_);
      for (std::size_t r = 0; r < R_; ++r) rs[r] = r;
      fit_group(k, rs, k);
    } else {
      for (std::size_t r = 0; r < R_; ++r) fit_group(k, {r}, r * K_ + k);
    }
  }
}

double Aligner::pass(const std::vector<Matrix>& curves, const Vector& weights, AlignMode mode) {
  if (curves.size() != K_) throw DimensionError("expected K curve matrices");
  for (const auto& c : curves)
    if (static_cast<std::size_t>(c.rows()) != grid_.size() || static_cast<std::size_t>(c.cols()) != R_)
      throw DimensionError("curve matrices must be J x R");
  if (static_cast<std::size_t>(weights.size()) != K_) throw DimensionError("expected K weights");
  if (mode == AlignMode::FreeMean)
    update_mean(curves, weights);
  else if (!have_template_)
    throw Error("fixed-mean alignment requires a template");
  update_warps(curves);
  return objective(curves, weights);
}

// ---------------------------------------------------------------------------

AlignResult align_curves(const std::vector<Matrix>& curves, const SampleGrid& grid, const AlignConfig& cfg,
                         AlignMode mode, bool shared, const std::optional<Matrix>& fixed_template,
                         const WarpBasis& basis, std::optional<Vector> weights) {
  if (curves.empty()) throw DimensionError("no curves to align");
  const auto K = curves.size();
  const auto R = static_cast<std::size_t>(curves.front().cols());
  const Vector w = weights ? *weights : Vector::Ones(static_cast<Eigen::Index>(K));

  Aligner aligner(grid, cfg, basis, R, K, shared);
  if (mode == AlignMode::FixedMean) {
    if (!fixed_template) throw Error("fixed-mean alignment requires a template");
    aligner.set_template(*fixed_template);
  }

  AlignResult out;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_outer; ++it) {
    out.objective_trace.push_back(aligner.pass(curves, w, mode));
    out.iterations = it;
    const double res = aligner.residual_norm_sum(curves, w);
    if (res == 0.0 || (std::isfinite(prev) && std::abs(prev - res) <= cfg.residual_tol * prev)) break;
    prev = res;
  }

  double energy = 0.0;
  for (std::size_t k = 0; k < K; ++k) energy += w[static_cast<Eigen::Index>(k)] * curves[k].squaredNorm();
  out.relative_residual = energy > 0.0 ? out.objective_trace.back() / energy : 0.0;
  out.coupling.Bstar = aligner.Bstar();
  out.coupling.lambda = w;
  out.warps = aligner.warps();
  return out;
}

}  // namespace regcp
