#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "regcp/registered_cp.hpp"
#include "regcp/synth.hpp"

namespace regcp {

enum class SweepMode { SnrSweep, RhoSweep };

struct ExperimentConfig {
  SweepMode mode = SweepMode::SnrSweep;
  std::vector<double> snr_list{20, 30, 40, 50, 60};
  /// Used only by the rho sweep, crossed with snr_list.
  std::vector<double> rho_list{0.0};
  int trials = 50;
  std::vector<std::string> methods{"rcp_nonneg", "uncoupled_nonneg"};
  SynthConfig synth;
  FitConfig fit;
  std::uint64_t master_seed = 0;
  /// Wall-clock times make results.csv run-dependent; off by default.
  bool record_runtime = false;
  /// Worker threads; 0 picks REGCP_THREADS or the hardware count.
  unsigned threads = 0;

  void validate() const;
};

/// One (setting, trial) cell of the design.
struct Setting {
  double snr_db = 0.0;
  double rho = 0.0;
  bool rho_fixed = false;
};

struct TrialRow {
  int trial = 0;
  double snr_db = 0.0;
  double rho = 0.0;
  std::string method;
  double eps_b = 0.0;
  double fit_residual = 0.0;
  int iterations = 0;
  long long runtime_ms = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

struct SummaryRow {
  double snr_db = 0.0;
  double rho = 0.0;
  std::string method;
  int n = 0;
  int n_ok = 0;
  double q1 = 0.0, median = 0.0, q3 = 0.0;  // of log10(eps_b)
};

std::vector<Setting> experiment_settings(const ExperimentConfig& cfg);

/// master_seed + 1000 * setting + trial.
std::uint64_t trial_seed(std::uint64_t master, std::size_t setting, int trial);

/// Thread count after applying REGCP_THREADS and the config override.
unsigned resolve_threads(unsigned requested);

/// Runs every (setting, trial, method); rows come back in (setting, trial, method) order.
std::vector<TrialRow> run_experiment(const ExperimentConfig& cfg);

/// Median and quartiles (linear interpolation) of log10(eps_b) over ok rows.
std::vector<SummaryRow> summarize(const std::vector<TrialRow>& rows);

void write_results_csv(const std::filesystem::path& path, const std::vector<TrialRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

}  // namespace regcp
