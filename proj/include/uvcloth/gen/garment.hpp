#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "uvcloth/body/body_model.hpp"

namespace uvcloth::gen {

using geom::TriMesh;
using geom::Vec3;

enum class Category { kUpper, kPants, kSkirt };

const char* category_name(Category c);
Category parse_category(const std::string& name);  // case-insensitive

struct GarmentStyle {
  /// Fraction of the usable limb length covered by sleeves or legs.
  double sleeve_or_leg_length = 0.5;
  double skirt_length = 0.35;  // meters, [0.2, 0.5]
  /// Half-angle (radians) of the front opening of upper garments.
  double opening_gap = 0.0;
  double looseness = 0.015;  // meters, [0.005, 0.03]
};

struct GarmentSpec {
  Category category = Category::kSkirt;
  GarmentStyle style;
  std::uint64_t seed = 0;

  /// Throws DomainError naming the offending field.
  void validate() const;
};

nlohmann::json spec_to_json(const GarmentSpec& spec);
GarmentSpec spec_from_json(const nlohmann::json& j);

/// Skirt waist height above the root (meters).
inline constexpr double kSkirtWaist = 0.05;

/// Builds a T-pose garment. Connectivity depends only on the category: style
/// moves vertices but never re-indexes faces. Upper garments and pants are
/// exact offsets of the body along its interpolated normals.
TriMesh generate_garment(const GarmentSpec& spec, const body::BodyTemplate& tpl);

struct DrapeConfig {
  int smoothing_iterations = 10;
  double smoothing_lambda = 0.5;
  /// Downward sag per meter of distance from the driving joint, per meter of
  /// looseness.
  double sag_coefficient = 0.3;
  double collision_margin = 0.003;
};

/// Procedural draping: skins each vertex with its nearest body vertex's
/// weights (carrying its rest offset through beta), smooths the displacement
/// field, adds looseness-proportional sag and pushes the result out of the
/// posed body. Deterministic per seed.
TriMesh drape_pose(const TriMesh& garment, const body::BodyTemplate& tpl,
                   const body::BodyState& state, std::uint64_t seed,
                   const DrapeConfig& cfg = {});

/// Preset pose bank (theta only, beta identity).
std::vector<body::BodyState> pose_presets(const body::BodyTemplate& tpl);
std::vector<std::string> pose_preset_names();

/// Preset `index` with every joint rotation component jittered uniformly by
/// ±jitter radians.
body::BodyState jittered_pose(const body::BodyTemplate& tpl, int index, double jitter,
                              std::uint64_t seed);

enum class Split { kTrain, kTest };

/// Number of TEST samples: the last ceil(5%) indices.
int test_count(int count);
Split split_of(int index, int count);

struct DatasetOptions {
  int count = 100;
  std::uint64_t seed = 0;
  Category category = Category::kSkirt;
  DrapeConfig drape;
  double pose_jitter = 0.2;
};

struct DatasetSample {
  int index = 0;
  GarmentSpec spec;
  TriMesh tpose_garment;
  body::BodyState body_state;
  TriMesh posed_garment;
  Split split = Split::kTrain;
};

/// Sample i of a dataset, computed independently of the others.
DatasetSample make_sample(const DatasetOptions& opt, const body::BodyTemplate& tpl, int index);

/// Writes manifest.json plus per-sample T-pose, posed and posed-body OBJs and
/// spec JSON into out_dir.
/// Returns the manifest. Byte-identical for identical options.
nlohmann::json generate_dataset(const DatasetOptions& opt, const body::BodyTemplate& tpl,
                                const std::filesystem::path& out_dir);

/// Reads a manifest and its samples back.
struct LoadedDataset {
  nlohmann::json manifest;
  std::vector<DatasetSample> samples;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace uvcloth::gen
