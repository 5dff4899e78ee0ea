#include "regcp/metrics.hpp"

#include <cmath>
#include <limits>

namespace regcp {

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("assignment cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();

  // Potentials u (rows), v (columns); p[j] = row assigned to column j (1-based, 0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

namespace {

Matrix normalized_l2(const Matrix& m, bool require_nonzero) {
  Matrix out = m;
  for (Eigen::Index r = 0; r < out.cols(); ++r) {
    const double n = out.col(r).norm();
    if (n > 0.0)
      out.col(r) /= n;
    else if (require_nonzero)
      throw DomainError("true factor has a zero column");
  }
  return out;
}

// cost(r, s) = ||u_r - sign * v_s||^2 for unit columns.
Matrix match_cost(const Matrix& U, const Matrix& V, bool sign_flip) {
  const auto R = U.cols();
  Matrix cost(R, R);
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index s = 0; s < R; ++s) {
      const double dot = U.col(r).dot(V.col(s));
      const double sign = sign_flip && dot < 0.0 ? -1.0 : 1.0;
      cost(r, s) = (U.col(r) - sign * V.col(s)).squaredNorm();
    }
  return cost;
}

void check_pair(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("true and estimated factors differ in shape");
}

}  // namespace

std::vector<std::size_t> match_permutation(const Matrix& B_true, const Matrix& B_est, const MatchOptions& opts) {
  check_pair(B_true, B_est);
  return solve_assignment(match_cost(normalized_l2(B_true, true), normalized_l2(B_est, false), opts.sign_flip));
}

EvalReport eps_b(const std::vector<Matrix>& truth, const std::vector<Matrix>& est, const EvalOptions& opts) {
  if (truth.size() != est.size() || truth.empty()) throw DimensionError("truth and estimate slice counts differ");
  const auto K = truth.size();
  std::vector<Matrix> U(K), V(K);
  for (std::size_t k = 0; k < K; ++k) {
    check_pair(truth[k], est[k]);
    U[k] = normalized_l2(truth[k], true);
    V[k] = normalized_l2(est[k], false);
  }

  EvalReport report;
  report.permutations.resize(K);
  if (opts.global_permutation) {
    Matrix total = Matrix::Zero(U[0].cols(), U[0].cols());
    for (std::size_t k = 0; k < K; ++k) total += match_cost(U[k], V[k], opts.sign_flip);
    const auto perm = solve_assignment(total);
    for (auto& p : report.permutations) p = perm;
  } else {
    for (std::size_t k = 0; k < K; ++k) report.permutations[k] = solve_assignment(match_cost(U[k], V[k], opts.sign_flip));
  }

  report.per_slice_eps.resize(static_cast<Eigen::Index>(K));
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double nk = 0.0;
    for (Eigen::Index r = 0; r < U[k].cols(); ++r) {
      const auto s = static_cast<Eigen::Index>(report.permutations[k][static_cast<std::size_t>(r)]);
      const double dot = U[k].col(r).dot(V[k].col(s));
      const double sign = opts.sign_flip && dot < 0.0 ? -1.0 : 1.0;
      nk += (U[k].col(r) - sign * V[k].col(s)).squaredNorm();
    }
    const double dk = U[k].squaredNorm();
    report.per_slice_eps[static_cast<Eigen::Index>(k)] = nk / dk;
    num += nk;
    den += dk;
  }
  report.eps_b = num / den;
  return report;
}

EvalReport evaluate(const DenseTensor3& data, const FactorModel& truth, const FactorModel& estimate,
                    const EvalOptions& opts) {
  EvalReport report = eps_b(truth.B, estimate.B, opts);
  report.fit_residual = relative_fit_error(data, estimate);
  return report;
}

}  // namespace regcp
