#include "uvcloth/gen/garment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "uvcloth/anim/collision.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/geom/obj_io.hpp"
#include "uvcloth/geom/surface.hpp"

namespace uvcloth::gen {

using body::BodyState;
using body::BodyTemplate;
using geom::BarycentricPoint;
using geom::Face;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Angular slit kept open at the atlas seam so garment uv never wraps.
constexpr double kSeamSlit = 1e-3;

}  // namespace

const char* category_name(Category c) {
  switch (c) {
    case Category::kUpper: return "UPPER";
    case Category::kPants: return "PANTS";
    case Category::kSkirt: return "SKIRT";
  }
  return "UNKNOWN";
}

Category parse_category(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (up == "UPPER") return Category::kUpper;
  if (up == "PANTS") return Category::kPants;
  if (up == "SKIRT") return Category::kSkirt;
  throw DomainError("unknown garment category '" + name + "' (expected upper, pants or skirt)");
}

void GarmentSpec::validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in(style.looseness, 0.005, 0.03)) throw DomainError("looseness must lie in [0.005, 0.03] m");
  if (category == Category::kSkirt) {
    if (!in(style.skirt_length, 0.2, 0.5)) throw DomainError("skirt_length must lie in [0.2, 0.5] m");
    return;
  }
  if (!in(style.sleeve_or_leg_length, 0.0, 1.0)) {
    throw DomainError("sleeve_or_leg_length must lie in [0, 1]");
  }
  if (category == Category::kUpper && !in(style.opening_gap, 0.0, 0.6)) {
    throw DomainError("opening_gap must lie in [0, 0.6] rad");
  }
}

json spec_to_json(const GarmentSpec& s) {
  return json{{"category", category_name(s.category)},
              {"sleeve_or_leg_length", s.style.sleeve_or_leg_length},
              {"skirt_length", s.style.skirt_length},
              {"opening_gap", s.style.opening_gap},
              {"looseness", s.style.looseness},
              {"seed", s.seed}};
}

GarmentSpec spec_from_json(const json& j) {
  GarmentSpec s;
  s.category = parse_category(j.at("category").get<std::string>());
  s.style.sleeve_or_leg_length = j.value("sleeve_or_leg_length", s.style.sleeve_or_leg_length);
  s.style.skirt_length = j.value("skirt_length", s.style.skirt_length);
  s.style.opening_gap = j.value("opening_gap", s.style.opening_gap);
  s.style.looseness = j.value("looseness", s.style.looseness);
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

int tube_of_segment(const BodyTemplate& tpl, const std::string& name) {
  const int seg = tpl.config.index_of(name);
  if (seg < 0) throw DomainError("garment needs body segment '" + name + "'");
  for (std::size_t t = 0; t < tpl.tubes.size(); ++t) {
    if (tpl.tubes[t].segments.front() == seg) return static_cast<int>(t);
  }
  throw DomainError("segment '" + name + "' does not start a tube");
}

double tube_length(const BodyTemplate& tpl, int tube) {
  double len = 0;
  for (int s : tpl.tubes[tube].segments) len += tpl.config.segments[s].length;
  return len;
}

// Body surface point at axial coordinate `axial` and angle `alpha` of a tube.
// The angle selects the point on the ring polygon's chord in that direction,
// so points on a ring lie exactly on the body surface.
BarycentricPoint tube_point(const BodyTemplate& tpl, int tube_id, double axial, double alpha) {
  const body::Tube& tube = tpl.tubes[tube_id];
  const auto& rings = tube.rings;
  // Non-pole bands are 1 .. rings.size() - 3.
  std::size_t band = 1;
  while (band + 2 < rings.size() - 1 && rings[band + 1].axial < axial) ++band;
  const body::Ring& r0 = rings[band];
  const body::Ring& r1 = rings[band + 1];
  const double h = std::clamp((axial - r0.axial) / (r1.axial - r0.axial), 0.0, 1.0);

  const int sides = tube.sides;
  const double step = kTwoPi / sides;
  alpha = std::fmod(alpha, kTwoPi);
  if (alpha < 0) alpha += kTwoPi;
  const int j = std::min(static_cast<int>(alpha / step), sides - 1);
  const double s0 = std::sin(alpha - j * step);
  const double s1 = std::sin((j + 1) * step - alpha);
  const double w = s0 / (s0 + s1);

  const int base = tube.band_first_face[band] + 2 * j;
  if (w >= h) return {base, Vec3(1.0 - w, w - h, h)};      // (A, B, C)
  return {base + 1, Vec3(1.0 - h, w, h - w)};              // (A, C, D)
}

struct Patch {
  int tube = 0;
  double axial0 = 0, axial1 = 0;
  double alpha0 = 0, alpha1 = kTwoPi;
  int rows = 1, cols = 1;
};

void add_patch(const BodyTemplate& tpl, const std::vector<Vec3>& normals, const Patch& p,
               double offset, TriMesh& out) {
  const int first = static_cast<int>(out.vertices.size());
  for (int r = 0; r <= p.rows; ++r) {
    const double axial = p.axial0 + (p.axial1 - p.axial0) * r / p.rows;
    for (int c = 0; c <= p.cols; ++c) {
      const double alpha = p.alpha0 + (p.alpha1 - p.alpha0) * c / p.cols;
      const BarycentricPoint bp = tube_point(tpl, p.tube, axial, alpha);
      out.vertices.push_back(geom::reconstruct(tpl.mesh, normals, bp, offset));
    }
  }
  const int stride = p.cols + 1;
  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      const int a = first + r * stride + c;
      const int b = a + 1;
      const int cc = b + stride;
      const int d = a + stride;
      out.faces.push_back({a, b, cc});
      out.faces.push_back({a, cc, d});
    }
  }
}

TriMesh make_skirt(const GarmentStyle& st) {
  constexpr int kRings = 16;
  constexpr int kSides = 32;
  TriMesh m;
  const double flare = 0.2 + 4.0 * st.looseness;
  for (int k = 0; k < kRings; ++k) {
    const double d = st.skirt_length * k / (kRings - 1);
    const double r = 0.14 + st.looseness + flare * d;
    for (int j = 0; j < kSides; ++j) {
      const double a = kTwoPi * j / kSides;
      m.vertices.emplace_back(r * std::cos(a), kSkirtWaist - d, r * std::sin(a));
    }
  }
  for (int k = 0; k + 1 < kRings; ++k) {
    for (int j = 0; j < kSides; ++j) {
      const int a = k * kSides + j;
      const int b = k * kSides + (j + 1) % kSides;
      const int c = b + kSides;
      const int d = a + kSides;
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  }
  return m;
}

}  // namespace

TriMesh generate_garment(const GarmentSpec& spec, const BodyTemplate& tpl) {
  spec.validate();
  const GarmentStyle& st = spec.style;
  if (spec.category == Category::kSkirt) return make_skirt(st);

  const std::vector<Vec3> normals = geom::vertex_normals(tpl.mesh).normals;
  TriMesh out;
  const int torso = tube_of_segment(tpl, "torso");
  if (spec.category == Category::kUpper) {
    const double gap = st.opening_gap + kSeamSlit;
    add_patch(tpl, normals, {torso, 0.08, 0.38, gap, kTwoPi - gap, 15, 40}, st.looseness, out);
    for (const char* arm : {"upper_arm_l", "upper_arm_r"}) {
      const int t = tube_of_segment(tpl, arm);
      const double len = 0.05 + st.sleeve_or_leg_length * (tube_length(tpl, t) - 0.12);
      add_patch(tpl, normals, {t, 0.02, 0.02 + len, kSeamSlit, kTwoPi - kSeamSlit, 16, 20},
                st.looseness, out);
    }
  } else {
    add_patch(tpl, normals, {torso, 0.03, 0.15, kSeamSlit, kTwoPi - kSeamSlit, 4, 40},
              st.looseness, out);
    for (const char* leg : {"upper_leg_l", "upper_leg_r"}) {
      const int t = tube_of_segment(tpl, leg);
      const double len = 0.08 + st.sleeve_or_leg_length * (tube_length(tpl, t) - 0.16);
      add_patch(tpl, normals, {t, 0.08, 0.08 + len, kSeamSlit, kTwoPi - kSeamSlit, 20, 20},
                st.looseness, out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Draping

TriMesh drape_pose(const TriMesh& garment, const BodyTemplate& tpl, const BodyState& state,
                   std::uint64_t seed, const DrapeConfig& cfg) {
  const body::JointTransforms xf = body::forward_kinematics(tpl, state);
  const std::vector<Vec3> shaped = body::shaped_rest_vertices(tpl, state);
  const std::size_t n = garment.vertices.size();
  const auto& rest = tpl.mesh.vertices;

  std::vector<int> nearest(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < rest.size(); ++v) {
      const double d = (rest[v] - garment.vertices[i]).squaredNorm();
      if (d < best) {
        best = d;
        nearest[i] = static_cast<int>(v);
      }
    }
  }

  std::vector<Vec3> carried(n);
  std::vector<body::SkinWeights> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    carried[i] = shaped[nearest[i]] + (garment.vertices[i] - rest[nearest[i]]);
    weights[i] = tpl.skin[nearest[i]];
  }
  const std::vector<Vec3> skinned = body::skin_points(carried, weights, xf);

  // Smooth the displacement field rather than positions so the garment
  // keeps its shape where the body moves rigidly.
  std::vector<Vec3> disp(n);
  for (std::size_t i = 0; i < n; ++i) disp[i] = skinned[i] - carried[i];
  const auto nbrs = geom::vertex_neighbors(garment);
  for (int it = 0; it < cfg.smoothing_iterations; ++it) {
    const std::vector<Vec3> prev = disp;
    for (std::size_t i = 0; i < n; ++i) {
      if (nbrs[i].empty()) continue;
      Vec3 mean = Vec3::Zero();
      for (int j : nbrs[i]) mean += prev[j];
      mean /= static_cast<double>(nbrs[i].size());
      disp[i] = prev[i] + cfg.smoothing_lambda * (mean - prev[i]);
    }
  }

  TriMesh out;
  out.faces = garment.faces;
  out.vertices.resize(n);
  std::mt19937_64 rng(seed);
  const double sag_scale = std::uniform_real_distribution<double>(0.8, 1.2)(rng);
  std::unique_ptr<geom::SurfaceIndex> rest_index;
  if (cfg.sag_coefficient != 0.0) rest_index = std::make_unique<geom::SurfaceIndex>(tpl.mesh);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p = carried[i] + disp[i];
    if (rest_index) {
      const double looseness = std::max(0.0, geom::signed_distance(*rest_index, garment.vertices[i]));
      int joint = weights[i].joint[0];
      for (int k = 1; k < 4; ++k)
        if (weights[i].weight[k] > weights[i].weight[0]) joint = weights[i].joint[k];
      const double reach = (skinned[i] - xf.position[joint]).norm();
      p.y() -= cfg.sag_coefficient * sag_scale * looseness * reach;
    }
    out.vertices[i] = p;
  }

  const geom::SurfaceIndex posed(body::pose_body(tpl, state));
  return anim::resolve_collisions(out, posed, cfg.collision_margin).mesh;
}

// ---------------------------------------------------------------------------
// Poses

std::vector<std::string> pose_preset_names() {
  return {"t_pose", "a_pose",    "arms_forward", "arms_up", "walk_left", "walk_right",
          "sit",    "twist",     "lean",         "wave",    "squat",     "wide_stance"};
}

std::vector<BodyState> pose_presets(const BodyTemplate& tpl) {
  const int J = tpl.joint_count();
  auto joint = [&](const char* name) {
    const int j = tpl.config.index_of(name);
    if (j < 0) throw DomainError(std::string("pose presets need body segment '") + name + "'");
    return j;
  };
  const int root = 0;
  const int ual = joint("upper_arm_l"), lal = joint("lower_arm_l");
  const int uar = joint("upper_arm_r"), lar = joint("lower_arm_r");
  const int ull = joint("upper_leg_l"), lll = joint("lower_leg_l");
  const int ulr = joint("upper_leg_r"), llr = joint("lower_leg_r");

  std::vector<BodyState> p(12, BodyState::identity(J));
  // a_pose
  p[1].theta[ual] = Vec3(0, 0, -0.8);
  p[1].theta[uar] = Vec3(0, 0, 0.8);
  // arms_forward
  p[2].theta[ual] = Vec3(0, -1.2, 0);
  p[2].theta[uar] = Vec3(0, 1.2, 0);
  // arms_up
  p[3].theta[ual] = Vec3(0, 0, 1.0);
  p[3].theta[uar] = Vec3(0, 0, -1.0);
  // walk_left / walk_right
  p[4].theta[ull] = Vec3(-0.5, 0, 0);
  p[4].theta[lll] = Vec3(0.4, 0, 0);
  p[4].theta[ulr] = Vec3(0.3, 0, 0);
  p[4].theta[ual] = Vec3(0, 0, -0.9);
  p[4].theta[uar] = Vec3(0, 0, 0.9);
  p[5].theta[ulr] = Vec3(-0.5, 0, 0);
  p[5].theta[llr] = Vec3(0.4, 0, 0);
  p[5].theta[ull] = Vec3(0.3, 0, 0);
  p[5].theta[ual] = Vec3(0, 0, -0.9);
  p[5].theta[uar] = Vec3(0, 0, 0.9);
  // sit
  p[6].theta[ull] = Vec3(-0.8, 0, 0);
  p[6].theta[ulr] = Vec3(-0.8, 0, 0);
  p[6].theta[lll] = Vec3(0.8, 0, 0);
  p[6].theta[llr] = Vec3(0.8, 0, 0);
  // twist
  p[7].theta[root] = Vec3(0, 0.4, 0);
  p[7].theta[ual] = Vec3(0, 0, -0.5);
  p[7].theta[uar] = Vec3(0, 0, 0.5);
  // lean
  p[8].theta[root] = Vec3(0.2, 0, 0);
  p[8].theta[ual] = Vec3(0, -0.4, -0.4);
  p[8].theta[uar] = Vec3(0, 0.4, 0.4);
  // wave
  p[9].theta[ual] = Vec3(0, 0, 1.2);
  p[9].theta[lal] = Vec3(0, 0, 0.8);
  p[9].theta[uar] = Vec3(0, 0, 0.9);
  p[9].theta[lar] = Vec3(0, -0.5, 0);
  // squat
  p[10].theta[root] = Vec3(0.3, 0, 0);
  p[10].theta[ull] = Vec3(-0.9, 0, 0);
  p[10].theta[ulr] = Vec3(-0.9, 0, 0);
  p[10].theta[lll] = Vec3(1.0, 0, 0);
  p[10].theta[llr] = Vec3(1.0, 0, 0);
  // wide_stance
  p[11].theta[ull] = Vec3(0, 0, 0.3);
  p[11].theta[ulr] = Vec3(0, 0, -0.3);
  p[11].theta[ual] = Vec3(0, 0, -0.5);
  p[11].theta[uar] = Vec3(0, 0, 0.5);
  return p;
}

BodyState jittered_pose(const BodyTemplate& tpl, int index, double jitter, std::uint64_t seed) {
  const auto presets = pose_presets(tpl);
  if (index < 0 || index >= static_cast<int>(presets.size())) {
    throw DomainError("pose preset index out of range");
  }
  BodyState s = presets[index];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  for (Vec3& t : s.theta)
    for (int k = 0; k < 3; ++k) t[k] += u(rng);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset

int test_count(int count) { return (count * 5 + 99) / 100; }

Split split_of(int index, int count) {
  return index >= count - test_count(count) ? Split::kTest : Split::kTrain;
}

DatasetSample make_sample(const DatasetOptions& opt, const BodyTemplate& tpl, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  DatasetSample s;
  s.index = index;
  s.split = split_of(index, opt.count);
  s.spec.category = opt.category;
  s.spec.seed = rng();
  s.spec.style.looseness = uniform(0.005, 0.03);
  s.spec.style.sleeve_or_leg_length = uniform(0.0, 1.0);
  s.spec.style.skirt_length = uniform(0.2, 0.5);
  s.spec.style.opening_gap = opt.category == Category::kUpper ? uniform(0.0, 0.6) : 0.0;
  const int preset = static_cast<int>(rng() % pose_preset_names().size());
  const std::uint64_t pose_seed = rng();
  const std::uint64_t drape_seed = rng();

  s.tpose_garment = generate_garment(s.spec, tpl);
  s.body_state = jittered_pose(tpl, preset, opt.pose_jitter, pose_seed);
  s.posed_garment = drape_pose(s.tpose_garment, tpl, s.body_state, drape_seed, opt.drape);
  return s;
}

namespace {

std::string sample_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04d", index);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

const char* split_name(Split s) { return s == Split::kTrain ? "TRAIN" : "TEST"; }

}  // namespace

json generate_dataset(const DatasetOptions& opt, const BodyTemplate& tpl,
                      const std::filesystem::path& out_dir) {
  if (opt.count < 20) throw DomainError("a dataset needs at least 20 samples");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "samples").string() + ": " + ec.message());

  json samples = json::array();
  for (int i = 0; i < opt.count; ++i) {
    const DatasetSample s = make_sample(opt, tpl, i);
    const std::string stem = sample_stem(i);
    const std::string tpose = "samples/" + stem + "_tpose.obj";
    const std::string posed = "samples/" + stem + "_posed.obj";
    const std::string body_obj = "samples/" + stem + "_body.obj";
    const std::string meta = "samples/" + stem + ".json";
    geom::save_obj(s.tpose_garment, out_dir / tpose);
    geom::save_obj(s.posed_garment, out_dir / posed);
    geom::save_obj(body::pose_body(tpl, s.body_state), out_dir / body_obj);
    const json meta_json{{"index", i},
                         {"split", split_name(s.split)},
                         {"spec", spec_to_json(s.spec)},
                         {"body_state", body::body_state_to_json(s.body_state)}};
    write_text(out_dir / meta, meta_json.dump(2) + "\n");
    samples.push_back(json{{"index", i}, {"split", split_name(s.split)}, {"tpose", tpose},
                           {"posed", posed}, {"body", body_obj}, {"meta", meta}});
  }
  const int tests = test_count(opt.count);
  json manifest{{"version", 1},
                {"category", category_name(opt.category)},
                {"count", opt.count},
                {"seed", opt.seed},
                {"train", opt.count - tests},
                {"test", tests},
                {"samples", samples}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  LoadedDataset ds;
  try {
    ds.manifest = json::parse(in);
    for (const json& e : ds.manifest.at("samples")) {
      DatasetSample s;
      s.index = e.at("index").get<int>();
      s.split = e.at("split").get<std::string>() == "TEST" ? Split::kTest : Split::kTrain;
      s.tpose_garment = geom::load_obj(dir / e.at("tpose").get<std::string>());
      s.posed_garment = geom::load_obj(dir / e.at("posed").get<std::string>());
      std::ifstream mi(dir / e.at("meta").get<std::string>());
      if (!mi) throw IoError("missing sample metadata " + e.at("meta").get<std::string>());
      const json meta = json::parse(mi);
      s.spec = spec_from_json(meta.at("spec"));
      s.body_state = body::body_state_from_json(meta.at("body_state"));
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DomainError("malformed dataset manifest in " + dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace uvcloth::gen
