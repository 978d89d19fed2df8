#include "uvcloth/app/config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

#include "uvcloth/error.hpp"
#include "uvcloth/model/pipeline.hpp"

namespace uvcloth::app {

using nlohmann::json;
namespace fs = std::filesystem;

void ProjectConfig::synchronize() {
  paramnet.resolution = codec.resolution;
  animnet.resolution = codec.resolution;
  animnet.codec = codec;
  paramnet.d_max = d_max;
  animnet.d_max = d_max;
  drape.collision_margin = animnet.collision_margin;
}

void ProjectConfig::check_paths() const {
  if (!body_config.empty() && !fs::exists(body_config)) {
    throw IoError("body config " + body_config.string() + " does not exist");
  }
}

json config_to_json(const ProjectConfig& c) {
  return {{"category", c.category},
          {"codec", model::codec_config_to_json(c.codec)},
          {"d_max", c.d_max},
          {"paramnet", model::paramnet_config_to_json(c.paramnet)},
          {"animnet", model::animnet_config_to_json(c.animnet)},
          {"infernet", model::infernet_config_to_json(c.infernet)},
          {"drape",
           {{"smoothing_iterations", c.drape.smoothing_iterations},
            {"smoothing_lambda", c.drape.smoothing_lambda},
            {"sag_coefficient", c.drape.sag_coefficient},
            {"collision_margin", c.drape.collision_margin}}},
          {"pose_jitter", c.pose_jitter},
          {"seed", c.seed},
          {"body_config", c.body_config.generic_string()},
          {"dataset_dir", c.dataset_dir.generic_string()},
          {"model_dir", c.model_dir.generic_string()},
          {"runs_log", c.runs_log.generic_string()}};
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ProjectConfig config_from_json(const json& j, const fs::path& base) {
  ProjectConfig c;
  c.category = j.value("category", c.category);
  gen::parse_category(c.category);  // validates
  if (j.contains("codec")) c.codec = model::codec_config_from_json(j["codec"]);
  c.d_max = j.value("d_max", c.d_max);
  if (j.contains("paramnet")) c.paramnet = model::paramnet_config_from_json(j["paramnet"]);
  if (j.contains("animnet")) c.animnet = model::animnet_config_from_json(j["animnet"]);
  if (j.contains("infernet")) c.infernet = model::infernet_config_from_json(j["infernet"]);
  if (j.contains("drape")) {
    const json& d = j["drape"];
    c.drape.smoothing_iterations = d.value("smoothing_iterations", c.drape.smoothing_iterations);
    c.drape.smoothing_lambda = d.value("smoothing_lambda", c.drape.smoothing_lambda);
    c.drape.sag_coefficient = d.value("sag_coefficient", c.drape.sag_coefficient);
  }
  c.pose_jitter = j.value("pose_jitter", c.pose_jitter);
  c.seed = j.value("seed", c.seed);
  c.body_config = resolve(base, j.value("body_config", std::string()));
  c.dataset_dir = resolve(base, j.value("dataset_dir", c.dataset_dir.string()));
  c.model_dir = resolve(base, j.value("model_dir", c.model_dir.string()));
  c.runs_log = resolve(base, j.value("runs_log", c.runs_log.string()));
  c.synchronize();
  return c;
}

ProjectConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what(), 0);
  }
  ProjectConfig c = config_from_json(j, path.parent_path());
  c.check_paths();
  return c;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ProjectConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text)
    if (ch != '\n' && ch != '\r' && ch != ' ') clean.push_back(ch);
  if (clean.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4", 0);
  std::string out(3 * (clean.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw ParseError("malformed base64", 0);
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace uvcloth::app
