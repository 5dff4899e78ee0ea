#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "regcp/core.hpp"

namespace regcp {

/// Optimal assignment for a square cost matrix (Hungarian method).
/// Returns assignment[row] = column.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

struct MatchOptions {
  /// Flip estimated columns to nonnegative correlation before matching.
  bool sign_flip = true;
};

/// Permutation perm with est column perm[r] matched to true column r,
/// minimizing sum_r ||u_r - v_perm(r)||^2 over l2-normalized columns.
std::vector<std::size_t> match_permutation(const Matrix& B_true, const Matrix& B_est, const MatchOptions& opts = {});

struct EvalReport {
  double eps_b = 0.0;
  Vector per_slice_eps;
  /// permutations[k][r] = estimated column matched to true column r in slice k.
  std::vector<std::vector<std::size_t>> permutations;
  /// Relative ||M - M_hat||_F / ||M||_F, NaN when not computed.
  double fit_residual = std::numeric_limits<double>::quiet_NaN();
};

struct EvalOptions {
  bool sign_flip = true;
  /// Use one permutation for all slices instead of one per slice.
  bool global_permutation = false;
};

/// Column-normalized, permutation-matched relative error on the B_k factors.
EvalReport eps_b(const std::vector<Matrix>& truth, const std::vector<Matrix>& est, const EvalOptions& opts = {});

/// eps_b plus the relative fit residual of `estimate` on `data`.
EvalReport evaluate(const DenseTensor3& data, const FactorModel& truth, const FactorModel& estimate,
                    const EvalOptions& opts = {});

}  // namespace regcp
