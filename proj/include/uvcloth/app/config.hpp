#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "uvcloth/gen/garment.hpp"
#include "uvcloth/model/infernet.hpp"

namespace uvcloth::app {

/// Everything a command needs to reproduce its artifacts. Relative paths are
/// resolved against the directory of the config file.
struct ProjectConfig {
  std::string category = "skirt";
  uv::CodecConfig codec{};  // resolution R, world scale, chart pole
  /// Bi-distance cap in texels; 0 selects R/4.
  double d_max = 0.0;
  model::ParamNetConfig paramnet{};
  model::AnimNetConfig animnet{};
  model::InferNetConfig infernet{};
  gen::DrapeConfig drape{};
  double pose_jitter = 0.2;
  std::uint64_t seed = 0;
  std::filesystem::path body_config;  // empty: built-in standard body
  std::filesystem::path dataset_dir = "data";
  std::filesystem::path model_dir = "models";
  std::filesystem::path runs_log = "runs.log";

  /// Copies R, d_max and the latent size into the per-network configs.
  void synchronize();
  /// Throws IoError when a referenced input path does not exist.
  void check_paths() const;
};

nlohmann::json config_to_json(const ProjectConfig& c);
/// Missing keys keep their defaults; relative paths resolve against `base`.
ProjectConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
ProjectConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const ProjectConfig& c);

std::string base64_encode(std::string_view bytes);
/// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace uvcloth::app
