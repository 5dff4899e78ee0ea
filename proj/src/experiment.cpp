#include "regcp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include "regcp/io.hpp"
#include "regcp/metrics.hpp"

namespace regcp {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (snr_list.empty()) throw ValidationError("snr_list must not be empty");
  if (mode == SweepMode::RhoSweep && rho_list.empty()) throw ValidationError("rho_list must not be empty");
  for (double r : rho_list)
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("rho values must be finite and nonnegative");
  if (trials < 1) throw ValidationError("trials must be at least 1");
  if (trials > 1000) throw ValidationError("trials above 1000 would collide with the per-setting seed stride");
  if (methods.empty()) throw ValidationError("methods must not be empty");
  for (const auto& m : methods) {
    FitConfig probe;
    apply_method(probe, m);
  }
  synth.validate();
  fit.validate();
}

std::vector<Setting> experiment_settings(const ExperimentConfig& cfg) {
  std::vector<Setting> out;
  for (double snr : cfg.snr_list) {
    if (cfg.mode == SweepMode::SnrSweep) {
      Setting s{snr, 0.0, cfg.fit.rho.has_value()};
      FitConfig f = cfg.fit;
      f.snr_assumed = snr;
      s.rho = f.effective_rho();
      out.push_back(s);
    } else {
      for (double rho : cfg.rho_list) out.push_back({snr, rho, true});
    }
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t setting, int trial) {
  return master + 1000u * static_cast<std::uint64_t>(setting) + static_cast<std::uint64_t>(trial);
}

unsigned resolve_threads(unsigned requested) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("REGCP_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) n = static_cast<unsigned>(v);
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

namespace {

std::vector<TrialRow> run_cell(const ExperimentConfig& cfg, const Setting& s, int trial, std::uint64_t seed) {
  std::vector<TrialRow> rows;
  SynthConfig sc = cfg.synth;
  sc.snr_db = s.snr_db;
  sc.seed = seed;
  std::optional<SyntheticData> data;
  std::string gen_error;
  try {
    data = generate(sc);
  } catch (const std::exception& e) {
    gen_error = e.what();
  }
  for (const auto& method : cfg.methods) {
    TrialRow row;
    row.trial = trial;
    row.snr_db = s.snr_db;
    row.rho = s.rho;
    row.method = method;
    row.seed = seed;
    if (!data) {
      row.status = "synth_error";
      row.eps_b = row.fit_residual = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
      continue;
    }
    FitConfig fc = cfg.fit;
    apply_method(fc, method);
    fc.rank = sc.R;
    fc.seed = seed;
    fc.snr_assumed = s.snr_db;
    if (s.rho_fixed) fc.rho = s.rho;
    try {
      auto fit = fit_registered_cp(data->tensor, fc);
      auto report = evaluate(data->tensor, data->truth.model, fit.model);
      row.eps_b = report.eps_b;
      row.fit_residual = report.fit_residual;
      row.iterations = fit.iterations;
      row.runtime_ms = cfg.record_runtime ? fit.runtime_ms : 0;
      if (!std::isfinite(row.eps_b)) row.status = "nonfinite";
    } catch (const FitAborted&) {
      row.status = "aborted";
    } catch (const NumericalError&) {
      row.status = "numerical_error";
    } catch (const std::exception&) {
      row.status = "error";
    }
    if (row.status != "ok" && row.status != "nonfinite")
      row.eps_b = row.fit_residual = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<TrialRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto settings = experiment_settings(cfg);
  const std::size_t cells = settings.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRow>> slots(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t s = c / static_cast<std::size_t>(cfg.trials);
      const int t = static_cast<int>(c % static_cast<std::size_t>(cfg.trials));
      slots[c] = run_cell(cfg, settings[s], t, trial_seed(cfg.master_seed, s, t));
    }
  };
  const unsigned n = std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(cells));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<TrialRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  return rows;
}

static double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<TrialRow>& rows) {
  // Keyed by first appearance so the output follows the results order.
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.snr_db == r.snr_db && s.rho == r.rho && s.method == r.method;
    });
    if (it == out.end()) {
      out.push_back({r.snr_db, r.rho, r.method});
      values.emplace_back();
      it = out.end() - 1;
    }
    auto& v = values[static_cast<std::size_t>(it - out.begin())];
    ++it->n;
    if (r.status == "ok") {
      ++it->n_ok;
      v.push_back(std::log10(r.eps_b));
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& v = values[i];
    if (v.empty()) {
      out[i].q1 = out[i].median = out[i].q3 = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::sort(v.begin(), v.end());
    out[i].q1 = quantile(v, 0.25);
    out[i].median = quantile(v, 0.5);
    out[i].q3 = quantile(v, 0.75);
  }
  return out;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<TrialRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "trial,snr_db,rho,method,eps_b,fit_residual,iterations,runtime_ms,seed,status\n";
  for (const auto& r : rows)
    out << r.trial << ',' << format_double(r.snr_db) << ',' << format_double(r.rho) << ',' << r.method << ','
        << format_double(r.eps_b) << ',' << format_double(r.fit_residual) << ',' << r.iterations << ','
        << r.runtime_ms << ',' << r.seed << ',' << r.status << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "snr_db,rho,method,n,n_ok,q1_log10_eps_b,median_log10_eps_b,q3_log10_eps_b\n";
  for (const auto& r : rows)
    out << format_double(r.snr_db) << ',' << format_double(r.rho) << ',' << r.method << ',' << r.n << ',' << r.n_ok
        << ',' << format_double(r.q1) << ',' << format_double(r.median) << ',' << format_double(r.q3) << '\n';
}

json to_json(const ExperimentConfig& c) {
  return json{{"mode", c.mode == SweepMode::SnrSweep ? "snr_sweep" : "rho_sweep"},
              {"snr_list", c.snr_list},
              {"rho_list", c.rho_list},
              {"trials", c.trials},
              {"methods", c.methods},
              {"synth", to_json(c.synth)},
              {"fit", to_json(c.fit)},
              {"master_seed", c.master_seed},
              {"record_runtime", c.record_runtime},
              {"threads", c.threads}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("experiment configuration must be a JSON object");
  ExperimentConfig c;
  try {
    if (j.contains("mode")) {
      const auto m = j["mode"].get<std::string>();
      if (m == "snr_sweep")
        c.mode = SweepMode::SnrSweep;
      else if (m == "rho_sweep")
        c.mode = SweepMode::RhoSweep;
      else
        throw ValidationError("unknown experiment mode '" + m + "'");
    }
    if (j.contains("snr_list")) c.snr_list = j["snr_list"].get<std::vector<double>>();
    if (j.contains("rho_list")) c.rho_list = j["rho_list"].get<std::vector<double>>();
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("synth")) c.synth = synth_config_from_json(j["synth"]);
    if (j.contains("fit")) c.fit = fit_config_from_json(j["fit"]);
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("record_runtime")) c.record_runtime = j["record_runtime"].get<bool>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid experiment configuration: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace regcp
