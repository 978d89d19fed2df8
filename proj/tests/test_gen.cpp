#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "uvcloth/anim/collision.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/gen/garment.hpp"
#include "uvcloth/geom/surface.hpp"

using namespace uvcloth;
using gen::Category;
using gen::GarmentSpec;
using geom::Vec3;

namespace {

const body::BodyTemplate& default_body() {
  static const body::BodyTemplate tpl = body::build_template(body::BodyConfig::standard());
  return tpl;
}

const geom::SurfaceIndex& default_index() {
  static const geom::SurfaceIndex index(default_body().mesh);
  return index;
}

GarmentSpec spec(Category c, double looseness, double frac = 0.5, double gap = 0.0,
                 double skirt = 0.35) {
  GarmentSpec s;
  s.category = c;
  s.style.looseness = looseness;
  s.style.sleeve_or_leg_length = frac;
  s.style.opening_gap = gap;
  s.style.skirt_length = skirt;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("uvcloth_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("gen") {
  TEST_CASE("upper garment is an exact normal offset of the body") {
    const auto g = gen::generate_garment(spec(Category::kUpper, 0.02, 0.7), default_body());
    REQUIRE(g.vertices.size() > 500);
    double worst_t = 0.0, worst_res = 0.0;
    for (const Vec3& v : g.vertices) {
      const auto c = geom::nearest_ray_correspondence(default_index(), v);
      worst_t = std::max(worst_t, std::abs(c.normal_distance - 0.02));
      worst_res = std::max(worst_res, c.residual);
    }
    CHECK(worst_t <= 1e-6);
    CHECK(worst_res < 1e-6);
  }

  TEST_CASE("pants and every upper style admit atlas correspondences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
      const Category c = trial % 2 ? Category::kPants : Category::kUpper;
      const double l = 0.005 + 0.025 * u(rng);
      const auto g = gen::generate_garment(spec(c, l, u(rng), 0.6 * u(rng)), default_body());
      double worst = 0.0;
      for (const Vec3& v : g.vertices) {
        worst = std::max(worst, geom::nearest_ray_correspondence(default_index(), v).residual);
      }
      CAPTURE(trial);
      CHECK(worst < 1e-5);
    }
  }

  TEST_CASE("front opening leaves the sector around the front axis empty") {
    const double gap = 0.3;
    const auto g = gen::generate_garment(spec(Category::kUpper, 0.02, 0.5, gap), default_body());
    int torso_vertices = 0;
    double min_angle = 10.0;
    for (const Vec3& v : g.vertices) {
      if (std::abs(v.x()) > 0.18) continue;  // sleeves
      ++torso_vertices;
      min_angle = std::min(min_angle, std::abs(std::atan2(v.x(), v.z())));
    }
    CHECK(torso_vertices > 300);
    CHECK(min_angle >= gap);
    CHECK(min_angle < gap + 0.01);
  }

  TEST_CASE("skirt hem height follows its length") {
    for (double len : {0.2, 0.35, 0.5}) {
      const auto g = gen::generate_garment(spec(Category::kSkirt, 0.01, 0, 0, len), default_body());
      double lo = 1e9, hi = -1e9;
      for (const Vec3& v : g.vertices) {
        lo = std::min(lo, v.y());
        hi = std::max(hi, v.y());
      }
      CHECK(std::abs(lo - (gen::kSkirtWaist - len)) <= 1e-6);
      CHECK(std::abs(hi - gen::kSkirtWaist) <= 1e-6);
    }
  }

  TEST_CASE("connectivity depends on the category only") {
    for (Category c : {Category::kUpper, Category::kPants, Category::kSkirt}) {
      const auto a = gen::generate_garment(spec(c, 0.005, 0.0, 0.0, 0.2), default_body());
      const auto b = gen::generate_garment(spec(c, 0.03, 1.0, 0.6, 0.5), default_body());
      CHECK(a.faces == b.faces);
      CHECK(a.vertices.size() == b.vertices.size());
      CHECK(a.vertices != b.vertices);
    }
  }

  TEST_CASE("garment faces point away from the body") {
    for (Category c : {Category::kUpper, Category::kPants}) {
      const auto g = gen::generate_garment(spec(c, 0.01), default_body());
      int outward = 0;
      for (std::size_t f = 0; f < g.faces.size(); ++f) {
        const Vec3 centroid = (g.vertices[g.faces[f][0]] + g.vertices[g.faces[f][1]] +
                               g.vertices[g.faces[f][2]]) / 3.0;
        const Vec3 n = geom::face_normal_unnormalized(g, static_cast<int>(f));
        const auto hit = geom::closest_signed(default_index(), centroid);
        if (n.dot(centroid - hit.closest) > 0) ++outward;
      }
      CHECK(outward == static_cast<int>(g.faces.size()));
    }
  }

  TEST_CASE("invalid styles are rejected") {
    CHECK_THROWS_AS(gen::generate_garment(spec(Category::kUpper, 0.04), default_body()),
                    DomainError);
    CHECK_THROWS_AS(gen::generate_garment(spec(Category::kUpper, 0.01, 1.2), default_body()),
                    DomainError);
    CHECK_THROWS_AS(gen::generate_garment(spec(Category::kUpper, 0.01, 0.5, 0.7), default_body()),
                    DomainError);
    CHECK_THROWS_AS(gen::generate_garment(spec(Category::kSkirt, 0.01, 0, 0, 0.6), default_body()),
                    DomainError);
    // Skirts ignore sleeve and opening fields.
    CHECK_NOTHROW(gen::generate_garment(spec(Category::kSkirt, 0.01, 3.0, 2.0), default_body()));
    CHECK_THROWS_AS(gen::parse_category("jumpsuit"), DomainError);
    CHECK(gen::parse_category("pants") == Category::kPants);
  }

  TEST_CASE("spec json round trip") {
    GarmentSpec s = spec(Category::kUpper, 0.017, 0.3, 0.2);
    s.seed = 1234567890123ull;
    const GarmentSpec back = gen::spec_from_json(gen::spec_to_json(s));
    CHECK(back.category == s.category);
    CHECK(back.seed == s.seed);
    CHECK(back.style.looseness == s.style.looseness);
    CHECK(back.style.opening_gap == s.style.opening_gap);
    CHECK(back.style.sleeve_or_leg_length == s.style.sleeve_or_leg_length);
  }

  TEST_CASE("drape with identity pose and no smoothing or sag is the identity") {
    const auto& tpl = default_body();
    gen::DrapeConfig cfg;
    cfg.smoothing_iterations = 0;
    cfg.sag_coefficient = 0.0;
    for (Category c : {Category::kUpper, Category::kPants, Category::kSkirt}) {
      const auto g = gen::generate_garment(spec(c, 0.01), tpl);
      const auto d = gen::drape_pose(g, tpl, body::BodyState::identity(tpl.joint_count()), 7, cfg);
      CHECK(d.faces == g.faces);
      CHECK(geom::vertex_to_vertex_error(g, d) <= 1e-9);
    }
  }

  TEST_CASE("draped garments never end inside the posed body") {
    const auto& tpl = default_body();
    int k = 0;
    for (Category c : {Category::kUpper, Category::kPants, Category::kSkirt}) {
      const auto g = gen::generate_garment(spec(c, 0.006, 0.9), tpl);
      for (int preset : {1, 4, 6, 10}) {
        const auto state = gen::jittered_pose(tpl, preset, 0.2, 100 + k++);
        const auto d = gen::drape_pose(g, tpl, state, 3);
        const geom::SurfaceIndex posed(body::pose_body(tpl, state));
        double worst = 1e9;
        for (const Vec3& v : d.vertices) worst = std::min(worst, anim::clearance(posed, v));
        CAPTURE(preset);
        CHECK(worst >= -1e-6);
        CHECK(d.faces == g.faces);
      }
    }
  }

  TEST_CASE("drape is deterministic per seed and sag depends on it") {
    const auto& tpl = default_body();
    const auto g = gen::generate_garment(spec(Category::kSkirt, 0.03), tpl);
    const auto state = gen::jittered_pose(tpl, 4, 0.2, 9);
    const auto a = gen::drape_pose(g, tpl, state, 11);
    const auto b = gen::drape_pose(g, tpl, state, 11);
    const auto c = gen::drape_pose(g, tpl, state, 12);
    CHECK(a.vertices == b.vertices);
    CHECK(a.vertices != c.vertices);
  }

  TEST_CASE("raising the arm rotates the sleeve about the shoulder") {
    const auto& tpl = default_body();
    const auto g = gen::generate_garment(spec(Category::kUpper, 0.01, 1.0), tpl);
    auto state = body::BodyState::identity(tpl.joint_count());
    const int arm = tpl.config.index_of("upper_arm_l");
    state.theta[arm] = Vec3(0, 0, std::numbers::pi / 2);
    const auto d = gen::drape_pose(g, tpl, state, 1);
    const Vec3 shoulder = tpl.joint_rest[arm];
    Vec3 before = Vec3::Zero(), after = Vec3::Zero();
    int n = 0;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      if (g.vertices[i].x() < 0.2) continue;
      before += g.vertices[i] - shoulder;
      after += d.vertices[i] - shoulder;
      ++n;
    }
    REQUIRE(n > 100);
    const double angle = std::acos(before.normalized().dot(after.normalized())) * 180.0 /
                         std::numbers::pi;
    CHECK(angle > 80.0);
    CHECK(angle < 100.0);
    CHECK(after.y() > 0.0);
  }

  TEST_CASE("pose bank has twelve presets and jitter stays in range") {
    const auto& tpl = default_body();
    const auto presets = gen::pose_presets(tpl);
    CHECK(presets.size() == 12);
    CHECK(gen::pose_preset_names().size() == 12);
    for (int i = 0; i < 12; ++i) {
      const auto s = gen::jittered_pose(tpl, i, 0.2, 77);
      for (int j = 0; j < tpl.joint_count(); ++j) {
        CHECK((s.theta[j] - presets[i].theta[j]).cwiseAbs().maxCoeff() <= 0.2);
      }
    }
    CHECK_THROWS_AS(gen::jittered_pose(tpl, 12, 0.2, 0), DomainError);
  }

  TEST_CASE("split keeps the last five percent for testing") {
    CHECK(gen::test_count(100) == 5);
    CHECK(gen::test_count(20) == 1);
    CHECK(gen::test_count(21) == 2);
    int train = 0, test = 0;
    for (int i = 0; i < 100; ++i) (gen::split_of(i, 100) == gen::Split::kTrain ? train : test)++;
    CHECK(train == 95);
    CHECK(test == 5);
    CHECK(gen::split_of(94, 100) == gen::Split::kTrain);
    CHECK(gen::split_of(95, 100) == gen::Split::kTest);
    CHECK(gen::split_of(18, 20) == gen::Split::kTrain);
    CHECK(gen::split_of(19, 20) == gen::Split::kTest);
  }

  TEST_CASE("dataset output is byte-identical per seed and loads back") {
    const auto& tpl = default_body();
    gen::DatasetOptions opt;
    opt.count = 20;
    opt.seed = 42;
    opt.category = Category::kPants;
    const auto a = scratch("ds_a"), b = scratch("ds_b");
    const auto manifest = gen::generate_dataset(opt, tpl, a);
    gen::generate_dataset(opt, tpl, b);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    CHECK(manifest.at("train").get<int>() == 19);
    CHECK(manifest.at("test").get<int>() == 1);
    for (const auto& e : manifest.at("samples")) {
      for (const char* key : {"tpose", "posed", "meta"}) {
        const std::string rel = e.at(key).get<std::string>();
        CHECK(std::filesystem::path(rel).is_relative());
        CHECK(slurp(a / rel) == slurp(b / rel));
      }
    }
    const auto loaded = gen::load_dataset(a);
    REQUIRE(loaded.samples.size() == 20);
    const auto direct = gen::make_sample(opt, tpl, 7);
    CHECK(loaded.samples[7].tpose_garment.faces == direct.tpose_garment.faces);
    CHECK(geom::vertex_to_vertex_error(loaded.samples[7].posed_garment, direct.posed_garment) <
          1e-6);
    CHECK(loaded.samples[7].spec.style.looseness == direct.spec.style.looseness);
    CHECK(loaded.samples[19].split == gen::Split::kTest);
    for (const auto& s : loaded.samples) CHECK(s.tpose_garment.faces == s.posed_garment.faces);

    opt.count = 19;
    CHECK_THROWS_AS(gen::generate_dataset(opt, tpl, scratch("ds_c")), DomainError);
    CHECK_THROWS_AS(gen::load_dataset(scratch("ds_missing")), IoError);
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
  }

  TEST_CASE("sampled styles cover the valid ranges") {
    const auto& tpl = default_body();
    gen::DatasetOptions opt;
    opt.count = 40;
    opt.seed = 3;
    opt.category = Category::kUpper;
    double lo = 1, hi = 0;
    for (int i = 0; i < 8; ++i) {
      const auto s = gen::make_sample(opt, tpl, i);
      CHECK_NOTHROW(s.spec.validate());
      lo = std::min(lo, s.spec.style.looseness);
      hi = std::max(hi, s.spec.style.looseness);
    }
    CHECK(hi > lo);
  }
}

TEST_SUITE("collision") {
  TEST_CASE("points inside or too close are pushed to the margin") {
    const auto& idx = default_index();
    geom::TriMesh cloud;
    // Inside the torso, on its surface, and just outside the margin.
    cloud.vertices = {Vec3(0, 0.25, 0.10), Vec3(0, 0.25, 0.14), Vec3(0, 0.25, 0.15),
                      Vec3(0.3, 0.44, 0.0), Vec3(0, 0.25, 0.5)};
    const auto r = anim::resolve_collisions(cloud, idx, 0.003);
    CHECK(r.report.converged());
    for (const Vec3& p : r.mesh.vertices) CHECK(anim::clearance(idx, p) >= 0.003 - 1e-9);
    CHECK(r.mesh.vertices[2] == cloud.vertices[2]);
    CHECK(r.mesh.vertices[4] == cloud.vertices[4]);
    CHECK(r.report.moved == 3);
  }

  TEST_CASE("a sheet through the body comes out collision free") {
    const auto& idx = default_index();
    geom::TriMesh sheet;
    const int n = 20;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        sheet.vertices.emplace_back(-0.3 + 0.6 * i / n, -0.1 + 0.6 * j / n, 0.05);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int a = i * (n + 1) + j;
        sheet.faces.push_back({a, a + n + 1, a + n + 2});
        sheet.faces.push_back({a, a + n + 2, a + 1});
      }
    }
    const auto r = anim::resolve_collisions(sheet, idx, 0.003);
    CHECK(r.report.converged());
    CHECK(r.report.moved > 0);
    for (const Vec3& p : r.mesh.vertices) CHECK(anim::clearance(idx, p) >= 0.003 - 1e-9);
  }
}
