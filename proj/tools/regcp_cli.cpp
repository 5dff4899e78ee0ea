// regcp command-line frontend: synth, fit, align, eval, experiment.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "regcp/align.hpp"
#include "regcp/experiment.hpp"
#include "regcp/io.hpp"
#include "regcp/metrics.hpp"
#include "regcp/registered_cp.hpp"
#include "regcp/synth.hpp"

namespace fs = std::filesystem;
using namespace regcp;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config;
  std::string out;
  std::string input;
  std::string method;
  std::optional<std::size_t> rank;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::optional<double> snr;
  bool shared_warp = false;
  // align
  std::string curves;
  std::string template_csv;
  // eval
  std::string truth;
  std::string estimate;
};

json config_or_empty(const std::string& path) { return path.empty() ? json::object() : read_json_file(path); }

int cmd_synth(const Options& o) {
  auto cfg = synth_config_from_json(config_or_empty(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.snr) cfg.snr_db = *o.snr;
  cfg.validate();
  const auto data = generate(cfg);
  write_synthetic(o.out, data, cfg);
  std::cout << "wrote " << cfg.I << "x" << cfg.J << "x" << cfg.K << " tensor to " << o.out << "\n";
  return 0;
}

int cmd_fit(const Options& o) {
  const fs::path in(o.input);
  const auto manifest = fs::is_directory(in) ? in / "manifest.json" : in;
  if (!fs::exists(manifest)) throw ValidationError("no tensor manifest at " + manifest.string());
  const auto tensor = read_tensor(manifest);

  auto cfg = fit_config_from_json(config_or_empty(o.config));
  if (!o.method.empty()) apply_method(cfg, o.method);
  if (o.rank) cfg.rank = *o.rank;
  if (o.seed) cfg.seed = *o.seed;
  if (o.rho) cfg.rho = *o.rho;
  if (o.snr) cfg.snr_assumed = *o.snr;
  if (o.shared_warp) cfg.shared_warp = true;
  cfg.validate();

  FitResult result;
  try {
    result = fit_registered_cp(tensor, cfg);
  } catch (const FitAborted& e) {
    std::cerr << "fit aborted: " << e.what() << "\ncost trace:";
    for (double c : e.trace()) std::cerr << ' ' << format_double(c);
    std::cerr << "\n";
    return kExitNumerical;
  }
  const double residual = relative_fit_error(tensor, result.model);
  const fs::path out = o.out.empty() ? fs::path("fit") : fs::path(o.out);
  write_fit_result(out, result, cfg, residual);
  std::cout << "relative fit residual " << format_double(residual) << " after " << result.iterations
            << " iterations" << (result.converged ? "" : " (not converged)") << "\n";
  return 0;
}

int cmd_align(const Options& o) {
  const Matrix all = read_matrix_csv(o.curves);
  const std::size_t R = o.rank.value_or(1);
  if (R == 0 || static_cast<std::size_t>(all.cols()) % R != 0)
    throw ValidationError("curve columns must be a multiple of the rank");
  const std::size_t K = static_cast<std::size_t>(all.cols()) / R;
  std::vector<Matrix> curves;
  for (std::size_t k = 0; k < K; ++k)
    curves.push_back(all.middleCols(static_cast<Eigen::Index>(k * R), static_cast<Eigen::Index>(R)));

  json cj = config_or_empty(o.config);
  AlignConfig cfg = cj.contains("align") ? align_config_from_json(cj["align"]) : align_config_from_json(cj);
  std::optional<Matrix> fixed;
  if (!o.template_csv.empty()) fixed = read_matrix_csv(o.template_csv);
  const auto grid = SampleGrid::uniform(static_cast<std::size_t>(all.rows()));
  const auto res = align_curves(curves, grid, cfg, fixed ? AlignMode::FixedMean : AlignMode::FreeMean, o.shared_warp,
                                fixed);

  const fs::path out = o.out.empty() ? fs::path("align") : fs::path(o.out);
  fs::create_directories(out);
  write_matrix_csv(out / "Bstar.csv", res.coupling.Bstar);
  write_json_file(out / "align.json", json{{"beta", matrix_to_json(res.warps.beta_matrix())},
                                           {"iterations", res.iterations},
                                           {"relative_residual", res.relative_residual},
                                           {"objective_trace", res.objective_trace}});
  std::cout << "relative residual " << format_double(res.relative_residual) << " after " << res.iterations
            << " iterations\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const fs::path data_dir(o.truth);
  const auto truth = read_factors(data_dir / "truth");
  const auto est = read_factors(o.estimate);
  EvalReport report;
  if (fs::exists(data_dir / "manifest.json"))
    report = evaluate(read_tensor(data_dir / "manifest.json"), truth, est);
  else
    report = eps_b(truth.B, est.B);
  json j{{"eps_b", report.eps_b},
         {"fit_residual", std::isnan(report.fit_residual) ? json(nullptr) : json(report.fit_residual)},
         {"per_slice_eps", std::vector<double>(report.per_slice_eps.data(),
                                               report.per_slice_eps.data() + report.per_slice_eps.size())},
         {"permutations", report.permutations}};
  if (!o.out.empty()) write_json_file(o.out, j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const Options& o) {
  auto cfg = experiment_config_from_json(config_or_empty(o.config));
  if (o.seed) cfg.master_seed = *o.seed;
  if (!o.method.empty()) cfg.methods = {o.method};
  if (o.snr) cfg.snr_list = {*o.snr};
  if (o.rho) {
    cfg.mode = SweepMode::RhoSweep;
    cfg.rho_list = {*o.rho};
  }
  if (o.shared_warp) cfg.fit.shared_warp = true;
  cfg.validate();
  const fs::path out = o.out.empty() ? fs::path("experiment") : fs::path(o.out);
  fs::create_directories(out);
  const auto rows = run_experiment(cfg);
  write_results_csv(out / "results.csv", rows);
  write_summary_csv(out / "summary.csv", summarize(rows));
  write_json_file(out / "config.json", to_json(cfg));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  std::cout << rows.size() << " rows written to " << (out / "results.csv").string();
  if (failed) std::cout << " (" << failed << " not ok)";
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Registered CP factorization toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output path");
    sub->add_option("--seed", o.seed, "Random seed");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic tensor with ground truth");
  add_common(synth);
  synth->add_option("--snr", o.snr, "Nominal SNR in dB");
  synth->get_option("--out")->required();

  auto* fit = app.add_subcommand("fit", "Fit a model to a tensor");
  add_common(fit);
  fit->add_option("input", o.input, "Tensor directory or manifest.json")->required();
  fit->add_option("--method", o.method, "rcp, rcp_nonneg, cp_als, cp_als_nonneg, uncoupled, uncoupled_nonneg");
  fit->add_option("--rank", o.rank, "Number of components");
  fit->add_option("--rho", o.rho, "Coupling multiplier (overrides --snr)");
  fit->add_option("--snr", o.snr, "Assumed SNR in dB, sets rho = 10^(-snr/10)");
  fit->add_flag("--shared-warp", o.shared_warp, "One warp per slice shared by all components");

  auto* align = app.add_subcommand("align", "Register a family of curves");
  add_common(align);
  align->add_option("curves", o.curves, "CSV, J rows, K*R columns (slice-major)")->required();
  align->add_option("--rank", o.rank, "Components per slice");
  align->add_option("--template", o.template_csv, "Fixed template CSV (J x R)");
  align->add_flag("--shared-warp", o.shared_warp, "One warp per slice");

  auto* eval = app.add_subcommand("eval", "Score an estimate against ground truth");
  eval->add_option("truth", o.truth, "Directory written by synth")->required();
  eval->add_option("estimate", o.estimate, "Directory written by fit")->required();
  eval->add_option("--out", o.out, "Write the report as JSON");

  auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  add_common(exp);
  exp->add_option("--method", o.method, "Restrict to one method");
  exp->add_option("--snr", o.snr, "Restrict to one SNR");
  exp->add_option("--rho", o.rho, "Run a rho sweep at this single value");
  exp->add_flag("--shared-warp", o.shared_warp, "One warp per slice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*fit) return cmd_fit(o);
    if (*align) return cmd_align(o);
    if (*eval) return cmd_eval(o);
    if (*exp) return cmd_experiment(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const RankDeficientError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
