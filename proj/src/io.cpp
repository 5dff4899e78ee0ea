#include "regcp/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "regcp/random.hpp"

namespace regcp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Binary tensors

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::vector<unsigned char> encode_tensor(const DenseTensor3& t) {
  std::vector<unsigned char> out(t.size() * 8);
  for (std::size_t n = 0; n < t.size(); ++n) {
    auto bits = std::bit_cast<std::uint64_t>(t.data()[n]);
    for (int b = 0; b < 8; ++b) out[n * 8 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return out;
}

DenseTensor3 decode_tensor(const std::vector<unsigned char>& bytes, std::size_t I, std::size_t J, std::size_t K) {
  const std::size_t n = I * J * K;
  if (bytes.size() != 8 * n) throw ValidationError("tensor payload size does not match its dimensions");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  return DenseTensor3(I, J, K, std::move(data));
}

json to_json(const TensorManifest& m) {
  return json{{"I", m.I}, {"J", m.J}, {"K", m.K}, {"dtype", m.dtype}, {"order", m.order},
              {"data_path", m.data_path}, {"checksum", m.checksum}};
}

TensorManifest manifest_from_json(const json& j) {
  TensorManifest m;
  try {
    m.I = j.at("I").get<std::size_t>();
    m.J = j.at("J").get<std::size_t>();
    m.K = j.at("K").get<std::size_t>();
    m.dtype = j.at("dtype").get<std::string>();
    m.order = j.at("order").get<std::string>();
    m.data_path = j.at("data_path").get<std::string>();
    m.checksum = j.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid tensor manifest: ") + e.what());
  }
  if (m.dtype != "f64le") throw ValidationError("unsupported tensor dtype '" + m.dtype + "'");
  if (m.order != "slice-row-major") throw ValidationError("unsupported tensor order '" + m.order + "'");
  return m;
}

static std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

static void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

TensorManifest write_tensor(const fs::path& dir, const DenseTensor3& t) {
  fs::create_directories(dir);
  const auto bytes = encode_tensor(t);
  TensorManifest m;
  m.I = t.I();
  m.J = t.J();
  m.K = t.K();
  m.checksum = sha256_hex(bytes);
  write_bytes(dir / m.data_path, bytes);
  write_json_file(dir / "manifest.json", to_json(m));
  return m;
}

DenseTensor3 read_tensor(const fs::path& manifest_path) {
  const auto m = manifest_from_json(read_json_file(manifest_path));
  const auto bytes = read_bytes(manifest_path.parent_path() / m.data_path);
  if (bytes.size() != 8 * m.I * m.J * m.K) throw ValidationError("tensor payload has the wrong length");
  if (sha256_hex(bytes) != m.checksum) throw ValidationError("tensor checksum mismatch");
  return decode_tensor(bytes, m.I, m.J, m.K);
}

// ---------------------------------------------------------------------------
// Text formats

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      while (first < last && *first == ' ') ++first;
      auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc()) throw ValidationError("bad number '" + cell + "' in " + path.string());
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("empty CSV " + path.string());
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j.front().size()) throw ValidationError("ragged matrix in JSON");
    for (std::size_t c = 0; c < j[i].size(); ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

void read_range(const json& j, const char* key, std::pair<double, double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j[key];
  if (!v.is_array() || v.size() != 2) throw ValidationError(std::string("'") + key + "' must be a [lo, hi] pair");
  out = {v[0].get<double>(), v[1].get<double>()};
}

double read_snr(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    throw ValidationError("snr must be a number or \"inf\"");
  }
  return v.get<double>();
}

json snr_to_json(double snr) { return std::isinf(snr) ? json("inf") : json(snr); }

// Rejects negative values before they reach an unsigned field.
void read_count(const json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ValidationError(std::string("'") + key + "' must be a nonnegative integer");
  out = v.get<std::size_t>();
}

}  // namespace

json to_json(const SynthConfig& c) {
  return json{{"I", c.I},
              {"J", c.J},
              {"K", c.K},
              {"R", c.R},
              {"snr_db", snr_to_json(c.snr_db)},
              {"beta_intercept_range", {c.beta_intercept_range.first, c.beta_intercept_range.second}},
              {"beta_slope_range", {c.beta_slope_range.first, c.beta_slope_range.second}},
              {"bump_width_range", {c.bump_width_range.first, c.bump_width_range.second}},
              {"mode_range", {c.mode_range.first, c.mode_range.second}},
              {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
  if (!j.is_object()) throw ValidationError("synth configuration must be a JSON object");
  read_count(j, "I", c.I);
  read_count(j, "J", c.J);
  read_count(j, "K", c.K);
  read_count(j, "R", c.R);
  if (j.contains("snr_db")) c.snr_db = read_snr(j["snr_db"]);
  read_range(j, "beta_intercept_range", c.beta_intercept_range);
  read_range(j, "beta_slope_range", c.beta_slope_range);
  read_range(j, "bump_width_range", c.bump_width_range);
  read_range(j, "mode_range", c.mode_range);
  read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

json to_json(const AlignConfig& c) {
  return json{{"grid_lo", c.grid_lo},
              {"grid_hi", c.grid_hi},
              {"grid_size", c.grid_size},
              {"golden_tol", c.golden_tol},
              {"golden_max_iter", c.golden_max_iter},
              {"coarse_threshold", c.coarse_threshold},
              {"max_outer", c.max_outer},
              {"residual_tol", c.residual_tol},
              {"normalize_template", c.normalize_template},
              {"mean_smoothing", c.mean_smoothing}};
}

AlignConfig align_config_from_json(const json& j, AlignConfig c) {
  if (!j.is_object()) throw ValidationError("align configuration must be a JSON object");
  read_opt(j, "grid_lo", c.grid_lo);
  read_opt(j, "grid_hi", c.grid_hi);
  read_opt(j, "grid_size", c.grid_size);
  read_opt(j, "golden_tol", c.golden_tol);
  read_opt(j, "golden_max_iter", c.golden_max_iter);
  read_opt(j, "coarse_threshold", c.coarse_threshold);
  read_opt(j, "max_outer", c.max_outer);
  read_opt(j, "residual_tol", c.residual_tol);
  read_opt(j, "normalize_template", c.normalize_template);
  read_opt(j, "mean_smoothing", c.mean_smoothing);
  c.validate();
  return c;
}

static json basis_to_json(const WarpBasis& b) {
  switch (b.kind) {
    case WarpBasis::Kind::Linear:
      return json{{"kind", "linear"}};
    case WarpBasis::Kind::Constant:
      return json{{"kind", "constant"}, {"n_pieces", b.n_pieces}};
    case WarpBasis::Kind::BSpline:
      return json{{"kind", "bspline"}, {"degree", b.degree}, {"interior_knots", b.interior_knots}};
  }
  return {};
}

static WarpBasis basis_from_json(const json& j) {
  const auto kind = j.value("kind", std::string("linear"));
  if (kind == "linear") return WarpBasis::linear();
  if (kind == "constant") return WarpBasis::constant(j.value("n_pieces", 1));
  if (kind == "bspline")
    return WarpBasis::bspline(j.value("degree", 3), j.value("interior_knots", std::vector<double>{}));
  throw ValidationError("unknown warp basis '" + kind + "'");
}

json to_json(const FitConfig& c) {
  json j{{"rank", c.rank},
         {"method", method_name(c)},
         {"snr_assumed", c.snr_assumed},
         {"rho", c.rho ? json(*c.rho) : json(nullptr)},
         {"max_iter", c.max_iter},
         {"tol", c.tol},
         {"init_iters", c.init_iters},
         {"align", to_json(c.align)},
         {"basis", basis_to_json(c.basis)},
         {"shared_warp", c.shared_warp},
         {"lambda_growth", c.lambda_growth},
         {"seed", c.seed}};
  return j;
}

FitConfig fit_config_from_json(const json& j, FitConfig c) {
  if (!j.is_object()) throw ValidationError("fit configuration must be a JSON object");
  read_count(j, "rank", c.rank);
  if (j.contains("method")) apply_method(c, j["method"].get<std::string>());
  read_opt(j, "snr_assumed", c.snr_assumed);
  if (j.contains("rho")) {
    if (j["rho"].is_null())
      c.rho.reset();
    else
      c.rho = j["rho"].get<double>();
  }
  read_opt(j, "max_iter", c.max_iter);
  read_opt(j, "tol", c.tol);
  read_opt(j, "init_iters", c.init_iters);
  if (j.contains("align")) c.align = align_config_from_json(j["align"], c.align);
  if (j.contains("basis")) c.basis = basis_from_json(j["basis"]);
  read_opt(j, "shared_warp", c.shared_warp);
  read_opt(j, "lambda_growth", c.lambda_growth);
  read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Bundles

static std::string slice_file(std::size_t k) {
  std::ostringstream os;
  os << "B_" << std::setw(3) << std::setfill('0') << k << ".csv";
  return os.str();
}

static void write_factors(const fs::path& dir, const FactorModel& model) {
  write_matrix_csv(dir / "A.csv", model.A);
  write_matrix_csv(dir / "C.csv", model.C);
  for (std::size_t k = 0; k < model.B.size(); ++k) write_matrix_csv(dir / slice_file(k), model.B[k]);
}

FactorModel read_factors(const fs::path& dir) {
  Matrix A = read_matrix_csv(dir / "A.csv");
  Matrix C = read_matrix_csv(dir / "C.csv");
  std::vector<Matrix> B;
  for (Eigen::Index k = 0; k < C.rows(); ++k) B.push_back(read_matrix_csv(dir / slice_file(static_cast<std::size_t>(k))));
  return FactorModel(std::move(A), std::move(C), std::move(B));
}

void write_synthetic(const fs::path& dir, const SyntheticData& data, const SynthConfig& cfg) {
  fs::create_directories(dir);
  const auto manifest = write_tensor(dir, data.tensor);
  const auto truth_dir = dir / "truth";
  fs::create_directories(truth_dir);
  write_factors(truth_dir, data.truth.model);
  write_matrix_csv(truth_dir / "Bstar.csv", data.truth.Bstar);
  json truth{{"config", to_json(cfg)},
             {"seed", data.truth.seed},
             {"prng", Rng::kAlgorithm},
             {"draw_order", {"A", "C", "bumps", "beta", "noise"}},
             {"noise_sigma", data.truth.noise_sigma},
             {"beta", matrix_to_json(data.truth.beta)},
             {"modes", std::vector<double>(data.truth.modes.data(), data.truth.modes.data() + data.truth.modes.size())},
             {"widths", std::vector<double>(data.truth.widths.data(), data.truth.widths.data() + data.truth.widths.size())},
             {"measured_snr_db", snr_to_json(measured_snr(data.tensor, data.truth))},
             {"checksum", manifest.checksum}};
  write_json_file(truth_dir / "truth.json", truth);
}

void write_fit_result(const fs::path& dir, const FitResult& result, const FitConfig& cfg, double fit_residual) {
  fs::create_directories(dir);
  write_factors(dir, result.model);
  if (result.coupling.Bstar.size() > 0) write_matrix_csv(dir / "Bstar.csv", result.coupling.Bstar);
  json j{{"config", to_json(cfg)},
         {"seed", result.seed},
         {"iterations", result.iterations},
         {"converged", result.converged},
         {"runtime_ms", result.runtime_ms},
         {"fit_residual", fit_residual},
         {"cost_trace", result.cost_trace},
         {"lambda", std::vector<double>(result.coupling.lambda.data(),
                                        result.coupling.lambda.data() + result.coupling.lambda.size())},
         {"lambda_fallbacks", result.lambda_fallbacks},
         {"beta", matrix_to_json(result.warps.beta_matrix())},
         {"Bstar", matrix_to_json(result.coupling.Bstar)}};
  write_json_file(dir / "result.json", j);
}

}  // namespace regcp
