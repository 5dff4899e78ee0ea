#include "regcp/registered_cp.hpp"

#include <chrono>
#include <cmath>

#include "regcp/random.hpp"

namespace regcp {

// ---------------------------------------------------------------------------
// Configuration

void FitConfig::validate() const {
  if (rank < 1) throw ValidationError("rank must be at least 1");
  if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
  if (init_iters < 0) throw ValidationError("init_iters must be nonnegative");
  if (!(tol >= 0.0)) throw ValidationError("tol must be nonnegative");
  if (rho && !(*rho >= 0.0)) throw ValidationError("rho must be nonnegative");
  if (!(lambda_growth >= 1.0)) throw ValidationError("lambda_growth must be at least 1");
  align.validate();
  basis.validate();
  if (shared_warp && basis.kind != WarpBasis::Kind::Linear && basis.size() == 0)
    throw ValidationError("shared warps need a non-empty basis");
}

double FitConfig::effective_rho() const { return rho ? *rho : rho_from_snr(snr_assumed); }

void apply_method(FitConfig& cfg, const std::string& method) {
  if (method == "rcp") {
    cfg.variant = Variant::Rcp;
    cfg.nonneg = false;
  } else if (method == "rcp_nonneg") {
    cfg.variant = Variant::Rcp;
    cfg.nonneg = true;
  } else if (method == "cp_als") {
    cfg.variant = Variant::CpAls;
    cfg.nonneg = false;
  } else if (method == "cp_als_nonneg") {
    cfg.variant = Variant::CpAls;
    cfg.nonneg = true;
  } else if (method == "uncoupled") {
    cfg.variant = Variant::Uncoupled;
    cfg.nonneg = false;
  } else if (method == "uncoupled_nonneg") {
    cfg.variant = Variant::Uncoupled;
    cfg.nonneg = true;
  } else {
    throw ValidationError("unknown method '" + method + "'");
  }
}

std::string method_name(const FitConfig& cfg) {
  std::string base;
  switch (cfg.variant) {
    case Variant::Rcp:
      base = "rcp";
      break;
    case Variant::CpAls:
      base = "cp_als";
      break;
    case Variant::Uncoupled:
      base = "uncoupled";
      break;
  }
  return cfg.nonneg ? base + "_nonneg" : base;
}

std::vector<Matrix> slices_of(const DenseTensor3& data) {
  std::vector<Matrix> out(data.K());
  for (std::size_t k = 0; k < data.K(); ++k) out[k] = data.slice(k);
  return out;
}

// ---------------------------------------------------------------------------
// Costs

Matrix warped_targets(const Matrix& Bstar, const WarpParams& warps, const SampleGrid& grid, std::size_t k) {
  if (static_cast<std::size_t>(Bstar.rows()) != grid.size()) throw DimensionError("B* must have J rows");
  if (static_cast<std::size_t>(Bstar.cols()) != warps.R() || k >= warps.K())
    throw DimensionError("warp parameters do not match B*");
  Matrix T(Bstar.rows(), Bstar.cols());
  for (std::size_t r = 0; r < warps.R(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    T.col(rr) = interpolate(grid, Bstar.col(rr), warps.warped_grid(r, k, grid));
  }
  return T;
}

double map_cost(const DenseTensor3& data, const FactorModel& model, const CouplingState& coupling,
                const WarpParams& warps, const SampleGrid& grid, const NoiseModel& noise) {
  const double ml = ml_cost(data, model, noise);
  if (model.J() != grid.size()) throw DimensionError("grid size must equal J");
  if (warps.K() != model.K() || warps.R() != model.rank()) throw DimensionError("warps do not match the model");
  warps.validate();
  double coupling_sq = 0.0;
  for (std::size_t k = 0; k < model.K(); ++k)
    coupling_sq += (model.B[k] - warped_targets(coupling.Bstar, warps, grid, k)).squaredNorm();
  return ml + coupling_sq / (noise.sigma_w * noise.sigma_w);
}

double penalized_cost(const std::vector<Matrix>& slices, const FactorModel& model,
                      const std::vector<Matrix>& targets, const Vector& lambda) {
  double total = 0.0;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double fit = (slices[k] - model.A * model.C.row(kk).asDiagonal() * model.B[k].transpose()).squaredNorm();
    total += fit + lambda[kk] * (model.B[k] - targets[k]).squaredNorm();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Block updates

void update_A(const std::vector<Matrix>& slices, FactorModel& model, bool nonneg) {
  const auto R = static_cast<Eigen::Index>(model.rank());
  Matrix H = Matrix::Zero(R, R);
  Matrix F = Matrix::Zero(R, model.A.rows());
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const Matrix BD = model.B[k] * model.C.row(static_cast<Eigen::Index>(k)).asDiagonal();
    H.noalias() += BD.transpose() * BD;
    F.noalias() += BD.transpose() * slices[k].transpose();
  }
  const Matrix At = nonneg ? solve_nonneg_normal(H, F, Matrix(model.A.transpose())) : solve_normal(H, F);
  model.A = At.transpose();
  model.normalize_A();
}

void update_D(const std::vector<Matrix>& slices, FactorModel& model, std::size_t k, bool nonneg) {
  const auto kk = static_cast<Eigen::Index>(k);
  const Matrix& Bk = model.B.at(k);
  const Matrix H = (model.A.transpose() * model.A).cwiseProduct(Bk.transpose() * Bk);
  const Matrix F = (model.A.transpose() * slices[k] * Bk).diagonal();
  const Matrix d = nonneg ? solve_nonneg_normal(H, F, Matrix(model.C.row(kk).transpose())) : solve_normal(H, F);
  model.C.row(kk) = d.col(0).transpose();
}

void update_B(const std::vector<Matrix>& slices, FactorModel& model, std::size_t k, const Matrix& target,
              double lambda, bool nonneg, bool normalize) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  const auto kk = static_cast<Eigen::Index>(k);
  if (target.rows() != model.B.at(k).rows() || target.cols() != model.B[k].cols())
    throw DimensionError("target must be J x R");
  const Matrix G = model.A * model.C.row(kk).asDiagonal();
  Matrix H = G.transpose() * G;
  H.diagonal().array() += lambda;
  const Matrix F = G.transpose() * slices[k] + lambda * target.transpose();
  const Matrix Bt = nonneg ? solve_nonneg_normal(H, F, Matrix(model.B[k].transpose())) : solve_normal(H, F);
  model.B[k] = Bt.transpose();
  if (normalize) model.normalize_B(k);
}

// ---------------------------------------------------------------------------
// CP-ALS

namespace {

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform();
  return m;
}

double data_cost(const std::vector<Matrix>& slices, const FactorModel& model) {
  double total = 0.0;
  for (std::size_t k = 0; k < slices.size(); ++k)
    total += (slices[k] - reconstruct_slice(model, k)).squaredNorm();
  return total;
}

void cp_sweep(const std::vector<Matrix>& slices, FactorModel& model, const Constraints& cons) {
  const auto R = static_cast<Eigen::Index>(model.rank());
  const auto K = slices.size();
  Matrix& B = model.B.front();
  const Matrix CtC = model.C.transpose() * model.C;

  // A
  {
    const Matrix H = CtC.cwiseProduct(B.transpose() * B);
    Matrix F = Matrix::Zero(R, model.A.rows());
    for (std::size_t k = 0; k < K; ++k)
      F.noalias() += model.C.row(static_cast<Eigen::Index>(k)).asDiagonal() * B.transpose() * slices[k].transpose();
    const Matrix At = cons.A ? solve_nonneg_normal(H, F, Matrix(model.A.transpose())) : solve_normal(H, F);
    model.A = At.transpose();
    model.normalize_A();
  }
  // B
  {
    const Matrix H = (model.C.transpose() * model.C).cwiseProduct(model.A.transpose() * model.A);
    Matrix F = Matrix::Zero(R, B.rows());
    for (std::size_t k = 0; k < K; ++k)
      F.noalias() += model.C.row(static_cast<Eigen::Index>(k)).asDiagonal() * model.A.transpose() * slices[k];
    const Matrix Bt = cons.B ? solve_nonneg_normal(H, F, Matrix(B.transpose())) : solve_normal(H, F);
    B = Bt.transpose();
    for (Eigen::Index r = 0; r < R; ++r) {
      const double n = B.col(r).cwiseAbs().maxCoeff();
      if (n > 0.0) {
        B.col(r) /= n;
        model.C.col(r) *= n;
      }
    }
  }
  // C
  for (std::size_t k = 0; k < K; ++k) model.B[k] = B;
  for (std::size_t k = 0; k < K; ++k) update_D(slices, model, k, cons.C);
}

}  // namespace

CpAlsResult cp_als(const DenseTensor3& data, std::size_t R, int iters, const Constraints& constraints,
                   std::uint64_t seed, double tol) {
  if (R < 1) throw ValidationError("rank must be at least 1");
  const auto slices = slices_of(data);
  const auto I = static_cast<Eigen::Index>(data.I());
  const auto J = static_cast<Eigen::Index>(data.J());
  const auto K = static_cast<Eigen::Index>(data.K());
  const auto RR = static_cast<Eigen::Index>(R);

  Rng rng(seed);
  constexpr int kMaxRestarts = 3;
  for (int restart = 0;; ++restart) {
    Matrix A = uniform_matrix(rng, I, RR);
    Matrix B = uniform_matrix(rng, J, RR);
    Matrix C = uniform_matrix(rng, K, RR);
    CpAlsResult out;
    out.model = FactorModel(std::move(A), std::move(C), std::vector<Matrix>(data.K(), B));
    out.restarts = restart;
    try {
      double prev = data_cost(slices, out.model);
      for (int it = 0; it < iters; ++it) {
        cp_sweep(slices, out.model, constraints);
        const double cost = data_cost(slices, out.model);
        if (!std::isfinite(cost)) throw NumericalError("CP-ALS produced a non-finite cost");
        out.cost_trace.push_back(cost);
        if (tol > 0.0 && std::abs(prev - cost) <= tol * prev) break;
        prev = cost;
      }
      if (iters == 0) {
        out.model.normalize_A();
        for (std::size_t k = 0; k < data.K(); ++k) out.model.normalize_B(k);
      }
      return out;
    } catch (const RankDeficientError&) {
      if (restart >= kMaxRestarts) throw;
    }
  }
}

// ---------------------------------------------------------------------------
// Lambda schedule

double rho_from_snr(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

namespace {

LambdaResult lambda_ratio(const std::vector<Matrix>& slices, const FactorModel& model, double rho,
                          const std::vector<Matrix>* targets) {
  if (!(rho >= 0.0)) throw DomainError("rho must be nonnegative");
  LambdaResult out;
  out.lambda.resize(static_cast<Eigen::Index>(slices.size()));
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const double residual = (slices[k] - reconstruct_slice(model, k)).squaredNorm();
    const double denom = targets ? (model.B[k] - (*targets)[k]).squaredNorm() : model.B[k].squaredNorm();
    double lambda = rho;
    if (denom > 0.0 && std::isfinite(residual / denom))
      lambda = rho * (residual / denom);
    else
      out.fallbacks.push_back(k);
    out.lambda[static_cast<Eigen::Index>(k)] = lambda;
  }
  return out;
}

}  // namespace

LambdaResult lambda_initial(const std::vector<Matrix>& slices, const FactorModel& model, double rho) {
  return lambda_ratio(slices, model, rho, nullptr);
}

LambdaResult lambda_refined(const std::vector<Matrix>& slices, const FactorModel& model,
                            const std::vector<Matrix>& targets, double rho) {
  if (targets.size() != slices.size()) throw DimensionError("one target per slice required");
  return lambda_ratio(slices, model, rho, &targets);
}

// ---------------------------------------------------------------------------
// Full solver

FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg) {
  return fit_registered_cp(data, cfg, SampleGrid::uniform(data.J()), nullptr);
}

FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg, const SampleGrid& grid) {
  return fit_registered_cp(data, cfg, grid, nullptr);
}

FitResult fit_registered_cp(const DenseTensor3& data, const FitConfig& cfg, const SampleGrid& grid,
                            const BlockObserver& observer) {
  cfg.validate();
  if (grid.size() != data.J()) throw DimensionError("grid size must equal J");
  const auto start = std::chrono::steady_clock::now();
  const auto cons = cfg.constraints();
  const std::size_t K = data.K();
  const std::size_t R = cfg.rank;
  const auto J = static_cast<Eigen::Index>(data.J());

  FitResult result;
  result.seed = cfg.seed;
  auto finish = [&]() {
    result.runtime_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return result;
  };

  if (cfg.variant == Variant::CpAls) {
    auto cp = cp_als(data, R, cfg.max_iter, cons, cfg.seed, cfg.tol);
    result.model = std::move(cp.model);
    result.cost_trace = std::move(cp.cost_trace);
    result.iterations = static_cast<int>(result.cost_trace.size());
    result.converged = result.iterations < cfg.max_iter;
    result.coupling.Bstar = result.model.B.front();
    result.coupling.lambda = Vector::Zero(static_cast<Eigen::Index>(K));
    result.warps = WarpParams(cfg.basis, R, K, cfg.shared_warp);
    return finish();
  }

  const bool coupled = cfg.variant == Variant::Rcp;
  const double rho = cfg.effective_rho();
  const auto slices = slices_of(data);

  FactorModel model = cp_als(data, R, cfg.init_iters, cons, cfg.seed).model;
  Matrix Bstar = model.B.front();
  normalize_columns_linf(Bstar);
  WarpParams warps(cfg.basis, R, K, cfg.shared_warp);
  // Rescaling B_k or b* mid-fit moves the coupling penalty, so both stay
  // unnormalized until the loop ends. With lambda_k = 0 the rescale is free.
  AlignConfig align_cfg = cfg.align;
  align_cfg.normalize_template = false;
  Aligner aligner(grid, align_cfg, cfg.basis, R, K, cfg.shared_warp);

  Vector lambda = Vector::Zero(static_cast<Eigen::Index>(K));
  if (coupled) {
    auto init = lambda_initial(slices, model, rho);
    lambda = init.lambda;
    result.lambda_fallbacks = init.fallbacks;
  }

  std::vector<Matrix> targets(K, Matrix::Zero(J, static_cast<Eigen::Index>(R)));
  auto refresh_targets = [&]() {
    if (!coupled) return;
    for (std::size_t k = 0; k < K; ++k)
      targets[k] = aligner.template_initialized() ? aligner.warped_template(k) : Bstar;
  };
  refresh_targets();
  auto observe = [&](int it, const char* block) {
    if (observer) observer(it, block, penalized_cost(slices, model, targets, lambda));
  };

  double prev = 0.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    update_A(slices, model, cons.A);
    observe(it, "A");
    for (std::size_t k = 0; k < K; ++k) update_D(slices, model, k, cons.C);
    observe(it, "D");
    for (std::size_t k = 0; k < K; ++k)
      update_B(slices, model, k, targets[k], lambda[static_cast<Eigen::Index>(k)], cons.B,
               lambda[static_cast<Eigen::Index>(k)] == 0.0);
    observe(it, "B");

    if (coupled) {
      aligner.pass(model.B, lambda, AlignMode::FreeMean);
      Bstar = aligner.Bstar();
      warps = aligner.warps();
      refresh_targets();
      observe(it, "align");
      if (it == 1) {
        auto refined = lambda_refined(slices, model, targets, rho);
        lambda = refined.lambda;
        result.lambda_fallbacks = refined.fallbacks;
        observe(it, "lambda");
      } else if (cfg.lambda_growth != 1.0) {
        lambda *= cfg.lambda_growth;
        observe(it, "lambda");
      }
    }

    const double cost = penalized_cost(slices, model, targets, lambda);
    result.cost_trace.push_back(cost);
    result.iterations = it;
    if (!std::isfinite(cost)) throw FitAborted("objective became non-finite", result.cost_trace);
    if (it >= 2 && std::abs(prev - cost) <= cfg.tol * prev) {
      result.converged = true;
      break;
    }
    prev = cost;
  }

  if (cfg.align.normalize_template) {
    normalize_columns_linf(Bstar);
    for (std::size_t k = 0; k < K; ++k) model.normalize_B(k);
  }
  result.model = std::move(model);
  result.coupling.Bstar = std::move(Bstar);
  result.coupling.lambda = lambda;
  result.warps = std::move(warps);
  return finish();
}

}  // namespace regcp
