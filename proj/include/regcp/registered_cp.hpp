#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regcp/align.hpp"
#include "regcp/core.hpp"
#include "regcp/warp.hpp"

namespace regcp {

/// Which factors are constrained to be entry-wise nonnegative.
struct Constraints {
  bool A = false;
  bool C = false;
  bool B = false;

  static Constraints none() { return {}; }
  static Constraints nonneg() { return {true, true, true}; }
};

enum class Variant { Rcp, CpAls, Uncoupled };

struct FitConfig {
  std::size_t rank = 1;
  Variant variant = Variant::Rcp;
  /// Nonnegativity on A, C and every B_k.
  bool nonneg = false;
  /// Expected SNR in dB; sets rho = 10^(-snr/10) unless `rho` is given.
  double snr_assumed = 40.0;
  std::optional<double> rho;
  int max_iter = 500;
  double tol = 1e-8;
  int init_iters = 100;
  AlignConfig align;
  WarpBasis basis = WarpBasis::linear();
  bool shared_warp = false;
  /// Multiplies lambda after every iteration past the second; 1 disables it.
  double lambda_growth = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  Constraints constraints() const { return nonneg ? Constraints::nonneg() : Constraints::none(); }
  double effective_rho() const;
};

/// Parses "rcp", "rcp_nonneg", "cp_als", "cp_als_nonneg", "uncoupled",
/// "uncoupled_nonneg" into variant + nonneg flag of `cfg`.
void apply_method(FitConfig& cfg, const std::string& method);
std::string method_name(const FitConfig& cfg);

struct FitResult {
  FactorModel model;
  CouplingState coupling;
  WarpParams warps;
  /// Penalized objective after every outer iteration (with the lambda in force afterwards).
  std::vector<double> cost_trace;
  int iterations = 0;
  bool converged = false;
  long long runtime_ms = 0;
  std::uint64_t seed = 0;
  /// Slices whose lambda fell back to rho because of a zero denominator.
  std::vector<std::size_t> lambda_fallbacks;
};

/// Thrown when the objective becomes non-finite; carries the cost trace so far.
class FitAborted : public NumericalError {
 public:
  FitAborted(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

std::vector<Matrix> slices_of(const DenseTensor3& data);

// ---------------------------------------------------------------------------
// Costs

/// Per-slice targets b*_r[gamma_{r,k}] stacked as a J x R matrix.
Matrix warped_targets(const Matrix& Bstar, const WarpParams& warps, const SampleGrid& grid, std::size_t k);

/// ml_cost plus sigma_w^-2 sum_{r,k} ||B_k(:,r) - b*_r[gamma_{r,k}]||^2.
double map_cost(const DenseTensor3& data, const FactorModel& model, const CouplingState& coupling,
                const WarpParams& warps, const SampleGrid& grid, const NoiseModel& noise);

/// sum_k ||M_k - A D_k B_k^T||^2 + lambda_k ||B_k - T_k||^2; the objective the
/// alternating solver decreases.
double penalized_cost(const std::vector<Matrix>& slices, const FactorModel& model,
                      const std::vector<Matrix>& targets, const Vector& lambda);

// ---------------------------------------------------------------------------
// Block updates (modify `model` in place)

/// Least-squares A with everything else fixed; columns l2-normalized into C.
void update_A(const std::vector<Matrix>& slices, FactorModel& model, bool nonneg = false);
/// Row k of C.
void update_D(const std::vector<Matrix>& slices, FactorModel& model, std::size_t k, bool nonneg = false);
/// Penalized B_k pulled towards `target` (J x R) with weight lambda. With
/// `normalize`, columns are then l-infinity normalized into C(k,:).
void update_B(const std::vector<Matrix>& slices, FactorModel& model, std::size_t k, const Matrix& target,
              double lambda, bool nonneg = false, bool normalize = true);

// ---------------------------------------------------------------------------
// Plain CP-ALS

struct CpAlsResult {
  FactorModel model;
  std::vector<double> cost_trace;
  int restarts = 0;
};

/// CP alternating least squares with a single B shared by all slices.
/// Factors start uniform on [0, 1) drawn from `seed` (A, then B, then C).
CpAlsResult cp_als(const DenseTensor3& data, std::size_t R, int iters, const Constraints& constraints,
                   std::uint64_t seed, double tol = 0.0);

// ---------------------------------------------------------------------------
// Regularization weights

double rho_from_snr(double snr_db);

struct LambdaResult {
  Vector lambda;
  std::vector<std::size_t> fallbacks;
};

/// rho ||M_k - A D_k B_k^T||^2 / ||B_k||^2 for each slice.
LambdaResult lambda_initial(const std::vector<Matrix>& slices, const FactorModel& model, double rho);
/// rho ||M_k - A D_k B_k^T||^2 / ||B_k - targets_k||^2 for each slice.
LambdaResult lambda_refined(const std::vector<Matrix>& slices, const FactorModel& model,
                            const std::vector<Matrix>& targets, double rho);

// ---------------------------------------------------------------------------

/// Alternating solver for the registered model (or one of its baselines).
FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg);
FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg, const SampleGrid& grid);

/// Observer called with a label and the penalized cost after each block
/// update; used to audit monotone descent.
using BlockObserver = std::function<void(int iteration, const char* block, double cost)>;
FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg, const SampleGrid& grid,
                            const BlockObserver& observer);

}  // namespace regcp
