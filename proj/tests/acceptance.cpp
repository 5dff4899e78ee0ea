// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: regcp_acceptance [criterion numbers...] [--out DIR]
// With no numbers every criterion runs. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "regcp/align.hpp"
#include "regcp/experiment.hpp"
#include "regcp/metrics.hpp"
#include "regcp/registered_cp.hpp"
#include "regcp/synth.hpp"
#include "regcp/warp.hpp"

using namespace regcp;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path g_out = fs::temp_directory_path() / "regcp_acceptance";

// ---------------------------------------------------------------------------

Outcome warp_correctness() {
  double worst = 0.0;
  for (int a = 0; a < 21; ++a)
    for (int b = 0; b < 21; ++b) {
      const double beta = -6.0 + 12.0 * a / 20.0, t = b / 20.0;
      long double exact = t;
      if (beta != 0.0) exact = std::expm1(-static_cast<long double>(beta) * t) / std::expm1(-static_cast<long double>(beta));
      worst = std::max(worst, std::abs(warp_eval_linear(beta, t) - static_cast<double>(exact)));
    }
  double ident = 0.0, inv = 0.0;
  for (int b = 0; b <= 20; ++b) {
    const double t = b / 20.0;
    ident = std::max({ident, std::abs(warp_eval_linear(1e-7, t) - t), std::abs(warp_eval_linear(-1e-7, t) - t)});
    for (double beta : {-6.0, -2.0, -1e-7, 0.0, 1e-7, 0.5, 3.0, 6.0})
      inv = std::max(inv, std::abs(warp_invert_linear(beta, warp_eval_linear(beta, t)) - t));
  }
  // The warp itself departs from t by about beta t (1 - t) / 2, so report that too.
  const long double b7 = 1e-7L;
  const double exact_dev = static_cast<double>(std::expm1(-b7 * 0.5L) / std::expm1(-b7) - 0.5L);
  return {worst <= 1e-10 && ident <= 1e-8 && inv <= 1e-10,
          "max |err| " + fmt("%.2e", worst) + ", identity " + fmt("%.2e", ident) + " (exact deviation at t=0.5 is " +
              fmt("%.2e", exact_dev) + "), round trip " + fmt("%.2e", inv)};
}

Outcome expmap_consistency() {
  const auto g = SampleGrid::uniform(201);
  double worst = 0.0;
  for (double beta : {-3.0, -1.0, 1.0, 3.0}) {
    Vector c(1);
    c << beta;
    Vector got = warp_eval_expmap(WarpBasis::linear(), c, g.points(), 2048);
    for (std::size_t j = 0; j < g.size(); ++j)
      worst = std::max(worst, std::abs(got[static_cast<Eigen::Index>(j)] - warp_eval_linear(beta, g[j])));
  }
  return {worst <= 1e-6, "max |err| " + fmt("%.2e", worst)};
}

Outcome block_descent() {
  double worst = 0.0;
  int violations = 0, checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig sc;
    sc.I = 10;
    sc.J = 100;
    sc.K = 6;
    sc.R = 2;
    sc.snr_db = 40.0;
    sc.seed = seed;
    auto data = generate(sc);
    FitConfig fc;
    fc.rank = 2;
    fc.seed = seed;
    fc.snr_assumed = 40.0;
    apply_method(fc, seed % 2 ? "rcp_nonneg" : "rcp");
    double last = -1.0;
    auto obs = [&](int it, const char*, double cost) {
      if (it >= 2 && last >= 0.0) {
        ++checked;
        const double rel = (cost - last) / last;
        worst = std::max(worst, rel);
        if (rel > 1e-10) ++violations;
      }
      last = cost;
    };
    fit_registered_cp(data.tensor, fc, SampleGrid::uniform(sc.J), obs);
  }
  return {violations == 0, std::to_string(checked) + " block steps, " + std::to_string(violations) +
                               " increases, worst relative change " + fmt("%.2e", worst)};
}

Outcome alignment_oracle() {
  const auto g = SampleGrid::uniform(200);
  Vector truth(200);
  for (std::size_t j = 0; j < 200; ++j) truth[static_cast<Eigen::Index>(j)] = std::exp(-0.5 * std::pow((g[j] - 0.5) / 0.05, 2));
  const std::vector<double> betas{-2.0, -1.0, 0.5, 1.5};
  std::vector<Matrix> curves;
  for (double b : betas) curves.push_back(interpolate(g, truth, warp_linear_grid(b, g)));
  AlignConfig cfg;
  auto fixed = align_curves(curves, g, cfg, AlignMode::FixedMean, false, Matrix(truth));
  double err = 0.0;
  for (std::size_t k = 0; k < betas.size(); ++k) err = std::max(err, std::abs(fixed.warps.beta(0, k) - betas[k]));
  auto free = align_curves(curves, g, cfg, AlignMode::FreeMean, false);
  return {err <= 1e-2 && free.relative_residual <= 1e-4,
          "fixed-mean max |beta err| " + fmt("%.2e", err) + ", free-mean relative residual " +
              fmt("%.2e", free.relative_residual) + " after " + std::to_string(free.iterations) + " passes"};
}

Outcome oracle_equivalence() {
  std::mt19937_64 gen(2024);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t R = pick(1, 3), I = pick(R, 8), J = pick(R, 8), K = pick(1, 8);
    auto m = random_model(gen, I, J, K, R);
    auto slices = slices_of(tensor_of(random_model(gen, I, J, K, R)));
    Matrix expectA = oracle_A(slices, m);
    FactorModel ma = m;
    update_A(slices, ma);
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      worst = std::max(worst, rel_diff(ma.A * ma.C.row(kk).asDiagonal(), expectA * m.C.row(kk).asDiagonal()));
    }
    for (std::size_t k = 0; k < K; ++k) {
      FactorModel md = m;
      update_D(slices, md, k);
      worst = std::max(worst, rel_diff(md.C.row(static_cast<Eigen::Index>(k)).transpose(),
                                       oracle_D(slices[k], m.A, m.B[k])));
      const double lambda = std::uniform_real_distribution<double>(0.0, 2.0)(gen);
      Matrix T = random_matrix(gen, static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(R));
      FactorModel mb = m;
      update_B(slices, mb, k, T, lambda, false, false);
      worst = std::max(worst, rel_diff(mb.B[k], oracle_B(slices[k], m.A, m.C.row(static_cast<Eigen::Index>(k)).transpose(),
                                                          T, lambda)));
    }
  }
  return {worst <= 1e-8, "worst relative difference " + fmt("%.2e", worst) + " over 50 instances"};
}

Outcome metric_correctness() {
  std::mt19937_64 gen(77);
  std::vector<std::string> failed;
  std::vector<Matrix> truth;
  for (int k = 0; k < 3; ++k) truth.push_back(random_matrix(gen, 60, 3, 0.0, 1.0));
  if (eps_b(truth, truth).eps_b != 0.0) failed.push_back("identity");
  std::vector<Matrix> perm;
  for (const auto& m : truth) perm.push_back(m.rowwise().reverse());
  if (!(eps_b(truth, perm).eps_b < 1e-28)) failed.push_back("permutation");
  std::vector<Matrix> a, b;
  for (int k = 0; k < 3; ++k) {
    a.push_back(Matrix::Zero(5, 1));
    b.push_back(Matrix::Zero(5, 1));
    a.back()(k, 0) = 1.0;
    b.back()(k + 1, 0) = 3.0;
  }
  if (std::abs(eps_b(a, b).eps_b - 2.0) > 1e-14) failed.push_back("orthogonal");
  Matrix B = random_matrix(gen, 200, 4);
  if (match_permutation(B, B) != std::vector<std::size_t>{0, 1, 2, 3}) failed.push_back("identity permutation");
  if (match_permutation(B, B.rowwise().reverse()) != std::vector<std::size_t>{3, 2, 1, 0}) failed.push_back("reversal");

  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto R = static_cast<Eigen::Index>(1 + trial % 4);
    Matrix t = random_matrix(gen, 200, R), e = random_matrix(gen, 200, R);
    Matrix u = t, v = e;
    for (Eigen::Index r = 0; r < R; ++r) {
      u.col(r).normalize();
      v.col(r).normalize();
    }
    std::vector<std::size_t> p(static_cast<std::size_t>(R));
    std::iota(p.begin(), p.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) c += (u.col(r) - v.col(static_cast<Eigen::Index>(p[static_cast<std::size_t>(r)]))).squaredNorm();
      best = std::min(best, c);
    } while (std::next_permutation(p.begin(), p.end()));
    const double got = eps_b({t}, {e}, {false, false}).eps_b * static_cast<double>(R);
    if (std::abs(got - best) > 1e-10 * std::max(1.0, best)) ++mismatches;
  }
  if (mismatches) failed.push_back(std::to_string(mismatches) + " brute-force mismatches");
  std::string detail = failed.empty() ? "all examples and 100 brute-force instances agree" : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

ExperimentConfig recovery_config() {
  ExperimentConfig c;
  c.mode = SweepMode::SnrSweep;
  c.snr_list = {60, 40};
  c.trials = 10;
  c.methods = {"rcp_nonneg", "uncoupled_nonneg"};
  c.master_seed = 2024;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome end_to_end() {
  auto cfg = recovery_config();
  auto rows = run_experiment(cfg);
  fs::create_directories(g_out);
  write_results_csv(g_out / "recovery_results.csv", rows);
  auto summary = summarize(rows);
  write_summary_csv(g_out / "recovery_summary.csv", summary);
  bool pass = true;
  std::string detail;
  for (double snr : cfg.snr_list) {
    double rcp = NAN, unc = NAN;
    for (const auto& s : summary) {
      if (s.snr_db != snr) continue;
      if (s.method == "rcp_nonneg") rcp = s.median;
      if (s.method == "uncoupled_nonneg") unc = s.median;
    }
    pass = pass && rcp <= unc;
    detail += "SNR " + fmt("%.0f", snr) + ": median eps_b rcp " + fmt("%.3e", std::pow(10.0, rcp)) + " vs uncoupled " +
              fmt("%.3e", std::pow(10.0, unc)) + "; ";
  }
  return {pass, detail};
}

Outcome rho_sweep() {
  ExperimentConfig c;
  c.mode = SweepMode::RhoSweep;
  c.snr_list = {40};
  c.rho_list = {0.0};
  c.trials = 10;
  c.methods = {"rcp_nonneg", "uncoupled_nonneg"};
  c.master_seed = 7;
  auto rows = run_experiment(c);
  int mismatches = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const auto& r = rows[i];
    const auto& u = rows[i + 1];
    if (std::memcmp(&r.eps_b, &u.eps_b, sizeof(double)) != 0 ||
        std::memcmp(&r.fit_residual, &u.fit_residual, sizeof(double)) != 0 || r.iterations != u.iterations ||
        r.seed != u.seed || r.status != "ok" || u.status != "ok")
      ++mismatches;
  }
  return {mismatches == 0, std::to_string(rows.size() / 2) + " trial pairs, " + std::to_string(mismatches) + " differ"};
}

Outcome determinism() {
  const auto first = g_out / "recovery_results.csv";
  if (!fs::exists(first)) {
    fs::create_directories(g_out);
    write_results_csv(first, run_experiment(recovery_config()));
  }
  const auto second = g_out / "recovery_results_rerun.csv";
  write_results_csv(second, run_experiment(recovery_config()));
  const bool same = slurp(first) == slurp(second);
  return {same, same ? "results.csv byte-identical across runs" : "results.csv differs between runs"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc)
      g_out = argv[++i];
    else
      only.insert(std::atoi(a.c_str()));
  }
  const std::vector<Criterion> all{
      {1, "warp correctness", 1, warp_correctness},
      {2, "exponential-map consistency", 1, expmap_consistency},
      {3, "block-descent monotonicity", 120, block_descent},
      {4, "alignment oracle", 30, alignment_oracle},
      {5, "small-instance oracle equivalence", 30, oracle_equivalence},
      {6, "metric correctness", 10, metric_correctness},
      {7, "end-to-end recovery", 1800, end_to_end},
      {8, "rho-sweep sanity", 300, rho_sweep},
      {9, "determinism", 1800, determinism},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] criterion %d (%s): %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
