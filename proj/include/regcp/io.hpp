#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "regcp/core.hpp"
#include "regcp/registered_cp.hpp"
#include "regcp/synth.hpp"

namespace regcp {

namespace fs = std::filesystem;

/// Sidecar describing a binary tensor payload.
struct TensorManifest {
  std::size_t I = 0, J = 0, K = 0;
  std::string dtype = "f64le";
  std::string order = "slice-row-major";
  std::string data_path = "tensor.bin";
  /// SHA-256 of the payload, lowercase hex.
  std::string checksum;
};

std::string sha256_hex(const std::vector<unsigned char>& bytes);

/// Little-endian float64 payload in storage order.
std::vector<unsigned char> encode_tensor(const DenseTensor3& t);
DenseTensor3 decode_tensor(const std::vector<unsigned char>& bytes, std::size_t I, std::size_t J, std::size_t K);

/// Writes `<dir>/tensor.bin` and `<dir>/manifest.json`.
TensorManifest write_tensor(const fs::path& dir, const DenseTensor3& t);
/// Reads a tensor through its manifest; throws ValidationError on checksum
/// or size mismatch.
DenseTensor3 read_tensor(const fs::path& manifest_path);

/// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// Headerless CSV, one matrix row per line.
void write_matrix_csv(const fs::path& path, const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);

nlohmann::json to_json(const TensorManifest& m);
TensorManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

nlohmann::json to_json(const AlignConfig& c);
AlignConfig align_config_from_json(const nlohmann::json& j, AlignConfig base = {});

nlohmann::json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig base = {});

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const nlohmann::json& j);

/// Tensor, manifest, factor CSVs (A.csv, C.csv, Bstar.csv, B_<k>.csv) and truth.json.
void write_synthetic(const fs::path& dir, const SyntheticData& data, const SynthConfig& cfg);

/// Factor CSVs plus result.json (warps, B*, lambda, cost trace, ...).
void write_fit_result(const fs::path& dir, const FitResult& result, const FitConfig& cfg, double fit_residual);

/// Reads A.csv, C.csv and B_<k>.csv from a truth or fit directory.
FactorModel read_factors(const fs::path& dir);

}  // namespace regcp
