// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <unistd.h>

#include "uvcloth/anim/collision.hpp"
#include "uvcloth/error.hpp"
#include "uvcloth/model/infernet.hpp"
#include "uvcloth/model/map_tensors.hpp"
#include "uvcloth/model/pipeline.hpp"

using namespace uvcloth;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.note(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(secs < budget_s, "runtime " + fmt("%.1f s", secs) + " over budget " + fmt("%.0f s", budget_s));
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs,
              o.detail.c_str());
  std::fflush(stdout);
}

const body::BodyTemplate& tpl() {
  static const body::BodyTemplate t = body::build_template(body::BodyConfig::standard());
  return t;
}

const geom::SurfaceIndex& tpl_index() {
  static const geom::SurfaceIndex i(tpl().mesh);
  return i;
}

// ---------------------------------------------------------------------------
// Codec oracles

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double density = u(rng);
  const double cx = u(rng) * w, cy = u(rng) * h, r = u(rng) * w / 2;
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool blob = std::hypot(x - cx, y - cy) < r;
      m[y * w + x] = (blob != (u(rng) < density * 0.3)) ? 1 : 0;
    }
  return m;
}

// Exhaustive O(R⁴) signed distance to the opposite class, capped at d_max.
std::vector<double> brute_bidistance(const std::vector<std::uint8_t>& m, int w, int h, double d_max) {
  std::vector<double> out(m.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t self = m[y * w + x];
      long best = -1;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          if (m[yy * w + xx] == self) continue;
          const long d = long(xx - x) * (xx - x) + long(yy - y) * (yy - y);
          if (best < 0 || d < best) best = d;
        }
      const double dist = best < 0 ? d_max : std::min(std::sqrt(double(best)), d_max);
      out[y * w + x] = self ? dist : -dist;
    }
  return out;
}

void codec_exactness(Outcome& o) {
  std::mt19937_64 rng(1001);
  std::size_t mismatched = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto m = random_mask(rng, 64, 64);
    const auto back = uv::recover_mask(uv::bidistance_transform(m, 64, 64, 16.0));
    for (std::size_t i = 0; i < m.size(); ++i) mismatched += back[i] != m[i];
  }
  o.require(mismatched == 0, std::to_string(mismatched) + " mismatched texels in mask round trips");
  o.note("1000 masks 64x64: " + std::to_string(mismatched) + " mismatched texels");

  int unequal = 0;
  for (int t = 0; t < 50; ++t) {
    const auto m = random_mask(rng, 32, 32);
    const double d_max = t % 2 ? 8.0 : 1e6;
    if (uv::bidistance_transform(m, 32, 32, d_max).values != brute_bidistance(m, 32, 32, d_max)) ++unequal;
  }
  o.require(unequal == 0, std::to_string(unequal) + " bi-distance maps differ from the oracle");
  o.note("50 masks 32x32 vs brute force: " + std::to_string(unequal) + " differ");
}

void correspondence_oracle(Outcome& o) {
  const geom::TriMesh& body = tpl().mesh;
  const geom::SurfaceIndex& idx = tpl_index();
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(body.vertices.size()) - 1);
  std::normal_distribution<double> jitter(0.0, 0.02);
  int anchor_mismatch = 0;
  double worst = 0.0;
  for (int q = 0; q < 100; ++q) {
    const geom::Vec3 p = body.vertices[pick(rng)] + geom::Vec3(jitter(rng), jitter(rng), jitter(rng));
    geom::Correspondence best;
    for (int f = 0; f < static_cast<int>(body.faces.size()); ++f) {
      const geom::Correspondence c = geom::ray_foot_on_face(body, idx.normals(), f, p);
      if (f == 0 || geom::preferred(c, best)) best = c;
    }
    const geom::Correspondence got = geom::nearest_ray_correspondence(idx, p, 16);
    if (got.anchor.face != best.anchor.face || (got.anchor.weights - best.anchor.weights).norm() > 1e-9) {
      ++anchor_mismatch;
    }
    worst = std::max(worst, std::abs(got.normal_distance - best.normal_distance));
  }
  o.require(anchor_mismatch == 0, std::to_string(anchor_mismatch) + " anchors differ");
  o.require(worst <= 1e-9, "distance gap " + fmt("%.3g", worst));
  o.note("100 queries, k=16: " + std::to_string(anchor_mismatch) + " anchor mismatches, max distance gap " +
         fmt("%.2g", worst));
}

geom::TriMesh styled(gen::Category c, double looseness, double frac, double skirt) {
  gen::GarmentSpec s;
  s.category = c;
  s.style.looseness = looseness;
  s.style.sleeve_or_leg_length = frac;
  s.style.skirt_length = skirt;
  return gen::generate_garment(s, tpl());
}

void geometric_round_trips(Outcome& o) {
  const uv::CodecConfig codec;
  double worst_vertex = 0.0;
  const auto state = gen::jittered_pose(tpl(), 3, 0.2, 5);
  const geom::TriMesh posed_body = body::pose_body(tpl(), state);
  const std::vector<geom::TriMesh> garments = {styled(gen::Category::kUpper, 0.013, 0.8, 0.35),
                                               styled(gen::Category::kPants, 0.02, 0.7, 0.35),
                                               styled(gen::Category::kSkirt, 0.02, 0.0, 0.45)};
  for (std::size_t k = 0; k < garments.size(); ++k) {
    const geom::TriMesh& g = garments[k];
    const uv::GarmentUV guv = k < 2 ? uv::assign_uv_case1(g, tpl(), tpl_index(), codec)
                                    : uv::assign_uv_case2(g, codec.y0, codec.world_scale);
    const geom::TriMesh back = uv::decode_tpose_values(uv::tpose_values(g, guv), guv, tpl().mesh);
    worst_vertex = std::max(worst_vertex, geom::vertex_to_vertex_error(g, back));
    const geom::TriMesh posed = gen::drape_pose(g, tpl(), state, 1);
    const geom::TriMesh pback =
        uv::decode_posed_values(uv::posed_values(posed, guv, posed_body), guv, posed_body);
    worst_vertex = std::max(worst_vertex, geom::vertex_to_vertex_error(posed, pback));
  }
  o.require(worst_vertex < 1e-3, "per-vertex error " + fmt("%.3g mm", worst_vertex));
  o.note("per-vertex (CASE1 upper+pants, CASE2 skirt; T-pose and posed) max " + fmt("%.2g mm", worst_vertex));

  // Grid path on dataset samples of every category.
  double worst_ratio = 0.0;
  int n = 0;
  const std::vector<std::pair<gen::Category, int>> draws = {
      {gen::Category::kUpper, 4}, {gen::Category::kPants, 3}, {gen::Category::kSkirt, 3}};
  uv::CodecConfig c64;
  c64.resolution = 64;
  for (const auto& [cat, count] : draws) {
    gen::DatasetOptions opt;
    opt.count = 20;
    opt.seed = 303;
    opt.category = cat;
    for (int i = 0; i < count; ++i) {
      const gen::DatasetSample s = gen::make_sample(opt, tpl(), i);
      const model::EncodedSample e = model::encode_sample(s, tpl(), tpl_index(), c64);
      const double fp_mm = 1000.0 * uv::texel_footprint(s.tpose_garment, e.guv, 64);
      const double t_err = geom::vertex_to_vertex_error(s.tpose_garment, uv::decode_template_carried(e.t_map, e.guv, tpl()));
      const double a_err = geom::vertex_to_vertex_error(s.posed_garment, uv::decode_posed(e.a_map, e.guv, e.posed_body));
      worst_ratio = std::max({worst_ratio, t_err / fp_mm, a_err / fp_mm});
      ++n;
    }
  }
  o.require(n == 10 && worst_ratio < 2.0, "grid error " + fmt("%.3f footprints", worst_ratio));
  o.note("grid path R=64 on " + std::to_string(n) + " samples: max " + fmt("%.3f footprints", worst_ratio));
}

// ---------------------------------------------------------------------------
// Gradients

nn::Tensor random_tensor(nn::Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Tensor t(std::move(s));
  for (double& v : t.data) v = u(rng);
  return t;
}

// Small skirt set at R=16 shared by the toy-size network checks.
const std::vector<model::EncodedSample>& toy_samples() {
  static const std::vector<model::EncodedSample> all = [] {
    uv::CodecConfig c;
    c.resolution = 16;
    std::vector<gen::DatasetSample> ss;
    for (int g = 0; g < 3; ++g) {
      gen::DatasetSample s;
      s.index = g;
      s.spec.category = gen::Category::kSkirt;
      s.spec.style.skirt_length = 0.25 + 0.1 * g;
      s.tpose_garment = gen::generate_garment(s.spec, tpl());
      s.body_state = gen::jittered_pose(tpl(), g, 0.05, g);
      s.posed_garment = gen::drape_pose(s.tpose_garment, tpl(), s.body_state, g);
      ss.push_back(s);
    }
    return model::encode_samples(ss, tpl(), c);
  }();
  return all;
}

void shift(nn::Tensor& t, double by) {
  for (double& v : t.data) v += by;
}

void gradient_checks(Outcome& o) {
  double worst = 0.0;
  std::string worst_name;
  const auto record = [&](const std::string& name, const nn::GradCheckReport& r) {
    if (r.checked == 0) o.require(false, name + " checked no entries");
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name + " " + r.worst;
    }
    o.require(r.max_rel_error < 1e-4, name + " rel error " + fmt("%.3g", r.max_rel_error));
  };
  const std::vector<std::pair<json, nn::Shape>> layers = {
      {json::array({{{"type", "dense"}, {"in", 5}, {"out", 4}}}), {5}},
      {json::array({{{"type", "conv2d"}, {"in", 2}, {"out", 3}, {"kernel", 3}, {"stride", 1}}}), {2, 5, 5}},
      {json::array({{{"type", "conv2d"}, {"in", 2}, {"out", 3}, {"kernel", 3}, {"stride", 2}}}), {2, 6, 6}},
      {json::array({{{"type", "upsample"}, {"factor", 2}}}), {2, 3, 3}},
      {json::array({{{"type", "relu"}}}), {12}},
      {json::array({{{"type", "leaky_relu"}, {"slope", 0.1}}}), {12}},
      {json::array({{{"type", "sigmoid"}}}), {12}},
      {json::array({{{"type", "tanh"}}}), {12}},
      {json::array({{{"type", "point_mlp"}, {"widths", {3, 8, 6}}}}), {10, 3}},
      {json::array({{{"type", "maxpool_points"}}}), {10, 4}},
      {json::array({{{"type", "reshape"}, {"shape", {3, 4}}}}), {12}},
  };
  std::uint64_t seed = 500;
  for (const auto& [spec, shape] : layers) {
    nn::Network net(spec, shape, seed);
    record(spec[0]["type"].get<std::string>(), nn::check_network_gradients(net, random_tensor(shape, seed + 1), seed + 2));
    seed += 3;
  }

  // Whole-model losses at toy size. Targets are shifted away from the L1
  // kink and the step is small enough to stay on one side of every leaky
  // ReLU kink.
  const auto& e = toy_samples();
  std::vector<double> parts;
  {
    model::ParamNetConfig c;
    c.resolution = 16;
    c.latent = 6;
    c.base_channels = 2;
    model::ParamNet net(c, uv::CaseTag::kCase2, 3);
    model::ShapeSample s = net.prepare(e[0].t_map);
    shift(s.target, 5.0);
    shift(s.tmask, 5.0);
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(s, &g, parts);
    record("ParamNet", nn::check_gradients([&] { return net.sample_loss(s, nullptr, parts); }, net.params(), g, 1e-6));
  }
  {
    model::AnimNetConfig c;
    c.resolution = 16;
    c.latent = 6;
    c.base_channels = 2;
    model::AnimNet net(c, uv::CaseTag::kCase2, 3);
    model::PoseTensors p = net.prepare(model::PoseSample(e[1].t_map, e[1].normal_map, e[1].a_map));
    shift(p.target, 5.0);
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(p, &g, parts);
    record("AnimNet", nn::check_gradients([&] { return net.sample_loss(p, nullptr, parts); }, net.params(), g, 1e-6));
  }
  {
    model::InferNetConfig c;
    c.points = 24;
    c.widths = {3, 6, 8};
    c.fusion_hidden = 8;
    model::InferNet net(c, 5);
    model::InferPair p = net.make_pair(e[2].sample.posed_garment, e[2].posed_body, Eigen::VectorXd::Constant(5, 5.0));
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(p, &g, parts);
    record("InferNet", nn::check_gradients([&] { return net.sample_loss(p, nullptr, parts); }, net.params(), g, 1e-6));
  }
  o.note(std::to_string(layers.size()) + " layer types + 3 networks, max rel error " + fmt("%.2g", worst) +
         " (" + worst_name + ")");
}

// ---------------------------------------------------------------------------
// Training sanity; the trained models feed the PCA and animation criteria.

struct Trained {
  std::optional<model::ParamNet> shape;  // 12-skirt shape space
  std::vector<model::Latent> latents;
  std::optional<model::AnimNet> anim;
  std::vector<model::EncodedSample> anim_set;
  bool ok = false;
};

Trained trained;

void training_sanity(Outcome& o) {
  uv::CodecConfig c32;
  c32.resolution = 32;

  gen::DatasetOptions opt;
  opt.count = 20;
  opt.seed = 7;
  opt.category = gen::Category::kSkirt;
  std::vector<uv::UVMap> maps;
  for (int i = 0; i < 12; ++i) {
    const gen::DatasetSample s = gen::make_sample(opt, tpl(), i);
    maps.push_back(uv::encode_tpose(s.tpose_garment, uv::assign_uv_case2(s.tpose_garment, c32.y0, c32.world_scale), 32));
  }
  model::ParamNetConfig pc;
  pc.resolution = 32;
  pc.latent = 32;
  pc.base_channels = 8;
  pc.train.epochs = 200;
  pc.train.learning_rate = 0.02;
  pc.train.batch_size = 4;
  trained.shape.emplace(pc, uv::CaseTag::kCase2, 3);
  const model::ParamNetTraining pt = model::train_paramnet(*trained.shape, maps);
  trained.latents = pt.latents;
  const double r1 = pt.log.final_loss / pt.log.initial_loss;
  o.require(r1 < 0.25, "ParamNet ratio " + fmt("%.3f", r1));
  o.note("ParamNet 12 skirts " + std::to_string(pc.train.epochs) + " epochs: " + fmt("%.3f", r1) + "x initial");

  // AnimNet: 3 skirts x 10 poses.
  const geom::SurfaceIndex& tb = tpl_index();
  std::vector<model::PoseSample> ps;
  for (int g = 0; g < 3; ++g) {
    gen::DatasetSample s = gen::make_sample(opt, tpl(), g);
    for (int p = 0; p < 10; ++p) {
      s.body_state = gen::jittered_pose(tpl(), p, 0.05, 100 + p);
      s.posed_garment = gen::drape_pose(s.tpose_garment, tpl(), s.body_state, 5);
      trained.anim_set.push_back(model::encode_sample(s, tpl(), tb, c32));
      const auto& e = trained.anim_set.back();
      ps.emplace_back(e.t_map, e.normal_map, e.a_map);
    }
  }
  model::AnimNetConfig ac;
  ac.resolution = 32;
  ac.latent = 32;
  ac.base_channels = 8;
  ac.codec = c32;
  ac.train.epochs = 300;
  ac.train.learning_rate = 0.01;
  ac.train.batch_size = 4;
  trained.anim.emplace(ac, uv::CaseTag::kCase2, 3);
  const nn::TrainLog al = model::train_animnet(*trained.anim, ps);
  const double r2 = al.final_loss / al.initial_loss;
  o.require(r2 < 0.3, "AnimNet ratio " + fmt("%.3f", r2));
  o.note("AnimNet 30 samples: " + fmt("%.3f", r2) + "x");

  // InferNet: 10 skirts of evenly spaced length x 3 poses, targets from a
  // shape space trained on those skirts.
  std::vector<gen::DatasetSample> ss;
  for (int g = 0; g < 10; ++g) {
    gen::DatasetSample s;
    s.spec.category = gen::Category::kSkirt;
    s.spec.style.skirt_length = 0.2 + 0.3 * g / 9.0;
    s.spec.style.looseness = 0.01 + 0.002 * (g % 5);
    s.spec.seed = g;
    s.tpose_garment = gen::generate_garment(s.spec, tpl());
    for (int p = 0; p < 3; ++p) {
      s.index = g * 3 + p;
      s.body_state = gen::jittered_pose(tpl(), (g + p * 4) % 12, 0.1, 50 + s.index);
      s.posed_garment = gen::drape_pose(s.tpose_garment, tpl(), s.body_state, s.index);
      ss.push_back(s);
    }
  }
  const auto es = model::encode_samples(ss, tpl(), c32);
  std::vector<uv::UVMap> imaps;
  for (int g = 0; g < 10; ++g) imaps.push_back(es[g * 3].t_map);
  model::ParamNet ipn(pc, uv::CaseTag::kCase2, 3);
  const model::ParamNetTraining ipt = model::train_paramnet(ipn, imaps);

  model::InferNetConfig ic;
  ic.points = 256;
  ic.widths = {3, 32, 64, 128};
  ic.fusion_hidden = 128;
  ic.train.epochs = 300;
  ic.train.learning_rate = 0.01;
  ic.train.batch_size = 4;
  model::InferNet inet(ic, pc.latent);
  std::vector<model::InferPair> pairs;
  for (int i = 0; i < 30; ++i) pairs.push_back(inet.make_pair(es[i].sample.posed_garment, es[i].posed_body, ipt.latents[i / 3]));
  const nn::TrainLog il = model::train_infernet(inet, pairs);
  const double r3 = il.final_loss / il.initial_loss;
  int hits = 0;
  for (int i = 0; i < 30; ++i) {
    const model::InferenceResult r = model::infer_shape(inet, ipn, es[i].sample.posed_garment, es[i].posed_body);
    hits += inet.training_latents()[r.nearest] == ipt.latents[i / 3];
  }
  const double acc = hits / 30.0;
  o.require(r3 < 0.3, "InferNet ratio " + fmt("%.3f", r3));
  o.require(acc >= 0.95, "retrieval " + fmt("%.1f%%", 100 * acc));
  o.note("InferNet 30 pairs: " + fmt("%.3f", r3) + "x, retrieval " + std::to_string(hits) + "/30");
  trained.ok = true;
}

// ---------------------------------------------------------------------------

void pca_properties(Outcome& o) {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g;
  std::vector<model::Latent> z;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd v(8);
    for (int k = 0; k < 8; ++k) v(k) = g(rng) * (k + 1);
    z.push_back(v);
  }
  const auto check_set = [&](const std::vector<model::Latent>& set, const std::string& label) {
    const int N = static_cast<int>(set.front().size());
    const int max_n = std::min(N, static_cast<int>(set.size()) - 1);
    double prev = 1e300;
    int increases = 0;
    for (int n = 0; n <= max_n; ++n) {
      const double err = model::reconstruction_error(model::fit_pca(set, n), set);
      if (err > prev * (1 + 1e-12) + 1e-15) ++increases;
      prev = err;
    }
    const model::PCASubspace full = model::fit_pca(set, max_n);
    const double full_err = model::reconstruction_error(full, set);
    double span = 0.0;
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd c(full.rank);
      for (int k = 0; k < full.rank; ++k) c(k) = g(rng);
      const model::Latent v = full.mean + full.basis.topRows(full.rank).transpose() * c;
      const model::PCASubspace sub = model::fit_pca(set, full.rank);
      span = std::max(span, (model::from_params(sub, model::to_params(sub, v)) - v).cwiseAbs().maxCoeff());
    }
    o.require(increases == 0, label + ": error increased " + std::to_string(increases) + " times");
    o.require(full_err < 1e-6, label + ": full-rank error " + fmt("%.3g", full_err));
    o.require(span < 1e-6, label + ": span round trip " + fmt("%.3g", span));
    o.note(label + " (n=0.." + std::to_string(max_n) + "): monotone, full rank " + fmt("%.2g", full_err) +
           ", span round trip " + fmt("%.2g", span));
  };
  check_set(z, "random 20x8");
  if (trained.ok) check_set(trained.latents, "trained 12x32");
}

void animation_safety(Outcome& o) {
  if (!trained.ok) throw DomainError("needs the trained models from the training criterion");
  const double eps = 0.003;
  o.require(trained.anim->config().collision_margin == eps, "collision margin is not 3 mm");
  const model::PCASubspace& pca = trained.shape->pca();
  std::size_t reported = 0, measured = 0, frames = 0;
  double min_clear = 1e9;
  const auto audit = [&](const model::AnimateResult& r, const body::BodyState& st) {
    ++frames;
    reported += r.collisions.violations;
    const geom::SurfaceIndex posed(body::pose_body(tpl(), st));
    for (const geom::Vec3& v : r.mesh.vertices) {
      const double c = anim::clearance(posed, v);
      min_clear = std::min(min_clear, c);
      measured += c < eps - 1e-12;
    }
  };
  for (int f = 0; f < 12; ++f) {
    const body::BodyState st = gen::jittered_pose(tpl(), f, 0.1, 900 + f);
    audit(model::animate_map(*trained.anim, trained.anim_set[0].t_map, tpl(), st), st);
    audit(model::animate_map(*trained.anim, trained.anim_set[10].t_map, tpl(), st, &trained.anim_set[10].guv), st);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(pca.dims());
    s(0) = (f % 3 - 1) * pca.sigma(0);
    audit(model::animate_params(*trained.anim, *trained.shape, s, tpl(), st), st);
  }
  o.require(reported == 0, std::to_string(reported) + " reported violations");
  o.require(measured == 0, std::to_string(measured) + " vertices within 3 mm of the body");
  o.note(std::to_string(frames) + " outputs over a 12-frame sequence: " + std::to_string(reported) +
         " reported, " + std::to_string(measured) + " measured violations, min clearance " +
         fmt("%.4f mm", 1000 * min_clear));
}

void convention_checks(Outcome& o) {
  // Dataset split as written to disk.
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("uvcloth_accept_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  gen::DatasetOptions opt;
  opt.count = 100;
  opt.seed = 11;
  opt.category = gen::Category::kSkirt;
  gen::generate_dataset(opt, tpl(), dir);
  const gen::LoadedDataset ds = gen::load_dataset(dir);
  int train = 0, test = 0;
  bool tail = true;
  for (const auto& s : ds.samples) {
    (s.split == gen::Split::kTrain ? train : test)++;
    if ((s.split == gen::Split::kTest) != (s.index >= 95)) tail = false;
  }
  std::filesystem::remove_all(dir);
  o.require(train == 95 && test == 5 && tail, "split " + std::to_string(train) + "/" + std::to_string(test));
  o.note("split " + std::to_string(train) + "/" + std::to_string(test));

  // Variation guard.
  std::vector<model::Latent> z;
  std::mt19937_64 rng(808);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd v(6);
    for (int k = 0; k < 6; ++k) v(k) = g(rng);
    z.push_back(v);
  }
  const model::PCASubspace pca = model::fit_pca(z, 4);
  int accepted = 0, rejected = 0;
  for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const Eigen::VectorXd s = model::sample_variation(pca, 2, c);
    accepted += std::abs(s(2) - c * pca.sigma(2)) < 1e-15;
  }
  for (double c : {-1.0 - 1e-9, 1.0 + 1e-9, 1.5, -3.0}) {
    try {
      model::sample_variation(pca, 2, c);
    } catch (const DomainError&) {
      ++rejected;
    }
  }
  o.require(accepted == 5 && rejected == 4, "variation guard");
  o.note("variation guard " + std::to_string(accepted) + "/5 accepted, " + std::to_string(rejected) + "/4 rejected");

  // Masked L1: targets outside the mask carry no weight.
  const auto& e = toy_samples();
  model::ParamNetConfig pc;
  pc.resolution = 16;
  pc.latent = 6;
  pc.base_channels = 2;
  const model::ParamNet pn(pc, uv::CaseTag::kCase2, 3);
  model::ShapeSample s = pn.prepare(e[0].t_map);
  std::vector<double> parts;
  const double shape_before = pn.sample_loss(s, nullptr, parts);
  const double map_before = parts[0];
  model::AnimNetConfig ac;
  ac.resolution = 16;
  ac.latent = 6;
  ac.base_channels = 2;
  const model::AnimNet an(ac, uv::CaseTag::kCase2, 3);
  model::PoseTensors p = an.prepare(model::PoseSample(e[1].t_map, e[1].normal_map, e[1].a_map));
  const double pose_before = an.sample_loss(p, nullptr, parts);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  const std::size_t T = 16 * 16;
  std::size_t perturbed = 0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < T; ++i) {
      if (s.mask[i] == 0.0) s.target[c * T + i] = u(rng), ++perturbed;
      if (p.mask[i] == 0.0) p.target[c * T + i] = u(rng), ++perturbed;
    }
  const double shape_delta = pn.sample_loss(s, nullptr, parts) - shape_before;
  const double map_delta = parts[0] - map_before;
  const double pose_delta = an.sample_loss(p, nullptr, parts) - pose_before;
  o.require(perturbed > 0, "no unmasked texels to perturb");
  o.require(shape_delta == 0.0 && map_delta == 0.0 && pose_delta == 0.0, "masked L1 changed");
  o.note("masked L1 after perturbing " + std::to_string(perturbed) + " unmasked targets: shape delta " +
         fmt("%g", shape_delta) + ", pose delta " + fmt("%g", pose_delta));
}

}  // namespace

int main() {
  criterion(1, "Codec exactness", 60, codec_exactness);
  criterion(2, "Correspondence oracle", 60, correspondence_oracle);
  criterion(3, "Geometric round trips", 120, geometric_round_trips);
  criterion(4, "Gradient checks", 120, gradient_checks);
  criterion(5, "Training sanity", 1800, training_sanity);
  criterion(6, "PCA properties", 60, pca_properties);
  criterion(7, "Animation safety", 120, animation_safety);
  criterion(8, "Convention checks", 120, convention_checks);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures;
}
