#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "uvcloth/error.hpp"
#include "uvcloth/model/infernet.hpp"
#include "uvcloth/model/map_tensors.hpp"
#include "uvcloth/model/pipeline.hpp"

using namespace uvcloth;
using namespace uvcloth::model;

namespace {

const body::BodyTemplate& tpl() {
  static const body::BodyTemplate t = body::build_template(body::BodyConfig::standard());
  return t;
}

constexpr int kR = 16;

uv::CodecConfig codec16() {
  uv::CodecConfig c;
  c.resolution = kR;
  return c;
}

// Skirts of evenly spaced lengths, each draped in `poses` jittered presets.
const std::vector<EncodedSample>& skirts() {
  static const std::vector<EncodedSample> all = [] {
    std::vector<gen::DatasetSample> ss;
    for (int g = 0; g < 10; ++g) {
      gen::DatasetSample s;
      s.spec.category = gen::Category::kSkirt;
      s.spec.style.skirt_length = 0.2 + 0.3 * g / 9.0;
      s.spec.seed = g;
      s.tpose_garment = gen::generate_garment(s.spec, tpl());
      for (int p = 0; p < 2; ++p) {
        s.index = 2 * g + p;
        s.body_state = gen::jittered_pose(tpl(), (g + 5 * p) % 12, 0.05, 70 + s.index);
        s.posed_garment = gen::drape_pose(s.tpose_garment, tpl(), s.body_state, s.index);
        ss.push_back(s);
      }
    }
    return encode_samples(ss, tpl(), codec16());
  }();
  return all;
}

std::vector<uv::UVMap> tpose_maps() {
  std::vector<uv::UVMap> m;
  for (std::size_t i = 0; i < skirts().size(); i += 2) m.push_back(skirts()[i].t_map);
  return m;
}

ParamNetConfig toy_paramnet() {
  ParamNetConfig c;
  c.resolution = kR;
  c.latent = 6;
  c.base_channels = 2;
  c.pca_dims = 3;
  return c;
}

AnimNetConfig toy_animnet() {
  AnimNetConfig c;
  c.resolution = kR;
  c.latent = 6;
  c.base_channels = 2;
  return c;
}

InferNetConfig toy_infernet() {
  InferNetConfig c;
  c.points = 24;
  c.widths = {3, 6, 8};
  c.fusion_hidden = 8;
  return c;
}

// Shifts every target so no L1 residual sits near its kink; finite
// differences then see a smooth loss.
void offset(nn::Tensor& t, double by) {
  for (double& v : t.data) v += by;
}

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("uvcloth_model_" + name);
}

geom::TriMesh permuted(const geom::TriMesh& m, std::uint64_t seed) {
  std::vector<int> perm(m.vertices.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  geom::TriMesh out;
  out.vertices.resize(m.vertices.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out.vertices[perm[i]] = m.vertices[i];
  for (const geom::Face& f : m.faces) out.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  return out;
}

}  // namespace

TEST_SUITE("pca") {
  TEST_CASE("rank-one latents reconstruct exactly with one dimension") {
    std::vector<Latent> z;
    const Eigen::VectorXd a = random_vector(8, 1), d = random_vector(8, 2);
    for (int i = 0; i < 12; ++i) z.push_back(a + (0.3 * i - 1.0) * d);
    const PCASubspace p = fit_pca(z, 1);
    CHECK(p.rank == 1);
    CHECK(reconstruction_error(p, z) < 1e-18);
  }

  TEST_CASE("zero dimensions always decode to the mean") {
    std::vector<Latent> z;
    for (int i = 0; i < 5; ++i) z.push_back(random_vector(4, 10 + i));
    const PCASubspace p = fit_pca(z, 0);
    CHECK(from_params(p, Eigen::VectorXd(0)) == p.mean);
  }

  TEST_CASE("full rank fit is an exact round trip") {
    std::vector<Latent> z;
    for (int i = 0; i < 20; ++i) z.push_back(random_vector(8, 100 + i));
    const PCASubspace p = fit_pca(z, 8);
    CHECK(p.rank == 8);
    for (const Latent& v : z) CHECK((from_params(p, to_params(p, v)) - v).cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::MatrixXd gram = p.basis * p.basis.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
    for (int j = 1; j < 8; ++j) CHECK(p.sigma(j) <= p.sigma(j - 1));
  }

  TEST_CASE("reconstruction error never grows with the dimension") {
    std::vector<Latent> z;
    for (int i = 0; i < 15; ++i) z.push_back(random_vector(6, 200 + i));
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= 6; ++n) {
      const double e = reconstruction_error(fit_pca(z, n), z);
      CHECK(e <= prev + 1e-12);
      prev = e;
    }
    CHECK(prev < 1e-20);
  }

  TEST_CASE("parameters are an isometry on the span") {
    std::vector<Latent> z;
    for (int i = 0; i < 10; ++i) z.push_back(random_vector(5, 300 + i));
    const PCASubspace p = fit_pca(z, 3);
    const Eigen::VectorXd s = random_vector(3, 7);
    CHECK(std::abs((from_params(p, s) - p.mean).norm() - s.norm()) < 1e-12);
    CHECK(from_params(p, Eigen::VectorXd::Zero(3)) == p.mean);
    const Latent on_span = from_params(p, s);
    CHECK((from_params(p, to_params(p, on_span)) - on_span).norm() < 1e-12);
  }

  TEST_CASE("too few latents or too many dimensions are rejected") {
    std::vector<Latent> z(3, Eigen::VectorXd::Ones(4));
    CHECK_THROWS_AS(fit_pca(z, 3), DomainError);
    z.resize(10, Eigen::VectorXd::Ones(4));
    CHECK_THROWS_AS(fit_pca(z, 5), DomainError);
  }

  TEST_CASE("rank-deficient fits report trailing zero sigma") {
    std::vector<Latent> z;
    for (int i = 0; i < 6; ++i) z.push_back(Eigen::VectorXd::Constant(4, i));
    const PCASubspace p = fit_pca(z, 3);
    CHECK(p.rank == 1);
    CHECK(p.sigma(1) == 0.0);
    CHECK(p.sigma(2) == 0.0);
    const Eigen::MatrixXd gram = p.basis * p.basis.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("interpolation endpoints and midpoint") {
    const Eigen::VectorXd a = random_vector(4, 1), b = random_vector(4, 2);
    CHECK(interpolate(a, b, 0.0) == a);
    CHECK(interpolate(a, b, 1.0) == b);
    CHECK(interpolate(a, -a, 0.5).norm() == 0.0);
    CHECK_THROWS_AS(interpolate(a, b, 1.5), DomainError);
    CHECK_THROWS_AS(interpolate(a, b, -0.1), DomainError);
  }

  TEST_CASE("variation stays within one sigma") {
    std::vector<Latent> z;
    for (int i = 0; i < 10; ++i) z.push_back(random_vector(5, 400 + i));
    const PCASubspace p = fit_pca(z, 3);
    CHECK(sample_variation(p, 0, 0.0).norm() == 0.0);
    const Eigen::VectorXd s = sample_variation(p, 1, -1.0);
    CHECK(s(1) == -p.sigma(1));
    CHECK(s(0) == 0.0);
    CHECK_THROWS_AS(sample_variation(p, 0, 1.01), DomainError);
    CHECK_THROWS_AS(sample_variation(p, 3, 0.5), DomainError);
  }
}

TEST_SUITE("shape") {
  TEST_CASE("map tensors zero-fill outside the mask") {
    const uv::UVMap& m = skirts()[0].t_map;
    const nn::Tensor v = values_tensor(m);
    const nn::Tensor t = tmask_tensor(m, kR / 4.0);
    for (std::size_t i = 0; i < m.texel_count(); ++i) {
      if (!m.mask()[i]) CHECK(v[i] == 0.0);
      CHECK((t[i] > 0.0) == (m.mask()[i] != 0));
      CHECK(std::abs(t[i]) <= 1.0);
    }
    CHECK(mask_from_tmask(t, kR / 4.0) == m.mask());
  }

  TEST_CASE("full shape-space loss passes a gradient check") {
    ParamNet net(toy_paramnet(), uv::CaseTag::kCase2, 3);
    ShapeSample s = net.prepare(skirts()[4].t_map);
    offset(s.target, 5.0);
    offset(s.tmask, 5.0);
    std::vector<double> parts;
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(s, &g, parts);
    // A small step keeps the perturbation clear of leaky-ReLU kinks.
    const auto rep = nn::check_gradients([&] { return net.sample_loss(s, nullptr, parts); },
                                         net.params(), g, 1e-6);
    CAPTURE(rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
  }

  TEST_CASE("encoding is deterministic, finite and separates garments") {
    ParamNet net(toy_paramnet(), uv::CaseTag::kCase2, 3);
    const auto maps = tpose_maps();
    CHECK(net.encode(maps[0]) == net.encode(maps[0]));
    CHECK((net.encode(maps[0]) - net.encode(maps[9])).norm() > 0.0);
    uv::UVMap empty(kR, 3, uv::CaseTag::kCase2);
    CHECK(net.encode(empty).allFinite());
    const Latent z = random_vector(6, 3);
    const DecodedShape a = net.decode(z), b = net.decode(z);
    CHECK(a.map == b.map);
    CHECK(a.tmask == b.tmask);
  }

  TEST_CASE("mismatched maps are rejected") {
    ParamNet net(toy_paramnet(), uv::CaseTag::kCase2, 3);
    CHECK_THROWS_AS(net.encode(uv::UVMap(32, 3, uv::CaseTag::kCase2)), DimensionError);
    CHECK_THROWS_AS(net.encode(uv::UVMap(kR, 3, uv::CaseTag::kCase1)), DomainError);
    CHECK_THROWS_AS(net.decode(Eigen::VectorXd::Zero(5)), DimensionError);
    std::vector<uv::UVMap> few(9, skirts()[0].t_map);
    CHECK_THROWS_AS(train_paramnet(net, few), DomainError);
    auto mixed = tpose_maps();
    mixed[3].set_case_tag(uv::CaseTag::kCase1);
    CHECK_THROWS_AS(train_paramnet(net, mixed), DomainError);
  }

  TEST_CASE("map loss ignores targets outside the mask") {
    ParamNet net(toy_paramnet(), uv::CaseTag::kCase2, 3);
    ShapeSample s = net.prepare(skirts()[6].t_map);
    std::vector<double> parts;
    const double before = net.sample_loss(s, nullptr, parts);
    const double map_before = parts[0];
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    const std::size_t T = static_cast<std::size_t>(kR) * kR;
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < T; ++i)
        if (s.mask[i] == 0.0) s.target[c * T + i] = u(rng);
    CHECK(net.sample_loss(s, nullptr, parts) == before);
    CHECK(parts[0] == map_before);
  }

  TEST_CASE("a repeated sample is memorized") {
    ParamNetConfig c = toy_paramnet();
    c.latent = 8;
    c.base_channels = 8;
    c.train.epochs = 500;
    c.train.batch_size = 1;
    c.train.learning_rate = 0.02;
    c.train.eval_every = 10;
    ParamNet net(c, uv::CaseTag::kCase2, 3);
    const std::vector<uv::UVMap> same(10, skirts()[14].t_map);
    const ParamNetTraining t = train_paramnet(net, same);
    CHECK(t.log.final_loss < 1e-2);
    CHECK(!t.pca_warning.empty());  // identical latents have rank 0
  }

  TEST_CASE("training fits the PCA and checkpoints round trip") {
    ParamNetConfig c = toy_paramnet();
    c.train.epochs = 30;
    ParamNet net(c, uv::CaseTag::kCase2, 3);
    const auto maps = tpose_maps();
    const ParamNetTraining t = train_paramnet(net, maps);
    CHECK(t.log.epochs.size() == 30);
    CHECK(t.log.final_parts.size() == 2);
    CHECK(t.log.final_loss < t.log.initial_loss);
    REQUIRE(net.has_pca());
    CHECK(net.pca().dims() == 3);
    for (int j = 1; j < 3; ++j) CHECK(net.pca().sigma(j) <= net.pca().sigma(j - 1));

    const auto path = temp_file("paramnet.uvck");
    net.save(path);
    const ParamNet back = ParamNet::load(path);
    CHECK(back.case_tag() == uv::CaseTag::kCase2);
    CHECK(back.pca().dims() == 3);
    CHECK((back.pca().basis - net.pca().basis).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((back.encode(maps[2]) - net.encode(maps[2])).cwiseAbs().maxCoeff() < 1e-4);
    std::filesystem::remove(path);
  }

  TEST_CASE("decoding requires a fitted subspace for parameters") {
    ParamNet net(toy_paramnet(), uv::CaseTag::kCase2, 3);
    CHECK_THROWS_AS(net.pca(), DomainError);
  }
}

TEST_SUITE("animator") {
  TEST_CASE("pose samples require coupled masks") {
    const EncodedSample& e = skirts()[0];
    CHECK_NOTHROW(PoseSample(e.t_map, e.normal_map, e.a_map));
    CHECK_THROWS_AS(PoseSample(e.t_map, e.normal_map, skirts()[19].a_map), DomainError);
  }

  TEST_CASE("posed-map regressor passes a gradient check") {
    AnimNet net(toy_animnet(), uv::CaseTag::kCase2, 3);
    CHECK(net.input_channels() == 7);
    const EncodedSample& e = skirts()[3];
    PoseTensors p = net.prepare(PoseSample(e.t_map, e.normal_map, e.a_map));
    offset(p.target, 5.0);
    std::vector<double> parts;
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(p, &g, parts);
    const auto rep = nn::check_gradients([&] { return net.sample_loss(p, nullptr, parts); },
                                         net.params(), g, 1e-6);
    CAPTURE(rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
  }

  TEST_CASE("loss ignores posed targets outside the mask") {
    AnimNet net(toy_animnet(), uv::CaseTag::kCase2, 3);
    const EncodedSample& e = skirts()[5];
    PoseTensors p = net.prepare(PoseSample(e.t_map, e.normal_map, e.a_map));
    std::vector<double> parts;
    const double before = net.sample_loss(p, nullptr, parts);
    const std::size_t T = static_cast<std::size_t>(kR) * kR;
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < T; ++i)
        if (p.mask[i] == 0.0) p.target[c * T + i] = 100.0 + i;
    CHECK(net.sample_loss(p, nullptr, parts) == before);
  }

  TEST_CASE("prediction keeps the source mask") {
    AnimNet net(toy_animnet(), uv::CaseTag::kCase2, 3);
    const EncodedSample& e = skirts()[7];
    const uv::UVMap a = net.predict(e.t_map, e.normal_map);
    CHECK(a.mask() == e.t_map.mask());
    CHECK(a.channels() == 3);
  }

  TEST_CASE("training needs enough samples of one case") {
    AnimNet net(toy_animnet(), uv::CaseTag::kCase2, 3);
    std::vector<PoseSample> few;
    for (int i = 0; i < 19; ++i) few.emplace_back(skirts()[i].t_map, skirts()[i].normal_map, skirts()[i].a_map);
    CHECK_THROWS_AS(train_animnet(net, few), DomainError);
  }

  TEST_CASE("a repeated pose sample is memorized") {
    AnimNetConfig c = toy_animnet();
    c.latent = 8;
    c.base_channels = 4;
    c.train.epochs = 200;
    c.train.batch_size = 2;
    c.train.learning_rate = 0.02;
    c.train.eval_every = 10;
    AnimNet net(c, uv::CaseTag::kCase2, 3);
    const EncodedSample& e = skirts()[9];
    const std::vector<PoseSample> same(20, PoseSample(e.t_map, e.normal_map, e.a_map));
    CHECK(train_animnet(net, same).final_loss < 1e-2);
  }

  TEST_CASE("animation output is collision-free and deterministic") {
    AnimNetConfig c = toy_animnet();
    c.train.epochs = 20;
    AnimNet net(c, uv::CaseTag::kCase2, 3);
    std::vector<PoseSample> samples;
    for (const EncodedSample& e : skirts()) samples.emplace_back(e.t_map, e.normal_map, e.a_map);
    train_animnet(net, samples);
    const EncodedSample& e = skirts()[12];
    const body::BodyState pose = gen::jittered_pose(tpl(), 3, 0.1, 17);
    const AnimateResult grid = animate_map(net, e.t_map, tpl(), pose);
    const AnimateResult carried = animate_map(net, e.t_map, tpl(), pose, &e.guv);
    CHECK(grid.collisions.violations == 0);
    CHECK(carried.collisions.violations == 0);
    CHECK(carried.mesh.faces == e.sample.tpose_garment.faces);
    CHECK(grid.mask_texels == e.t_map.mask_count());
    const AnimateResult again = animate_map(net, e.t_map, tpl(), pose);
    CHECK(again.mesh.vertices == grid.mesh.vertices);

    const auto path = temp_file("animnet.uvck");
    net.save(path);
    const AnimNet back = AnimNet::load(path);
    CHECK(back.config().resolution == kR);
    CHECK(back.input_channels() == net.input_channels());
    std::filesystem::remove(path);

    CHECK_THROWS_AS(animate_map(net, uv::UVMap(kR, 3, uv::CaseTag::kCase2), tpl(), pose),
                    DomainError);
  }
}

TEST_SUITE("infer") {
  TEST_CASE("two-branch latent regressor passes a gradient check") {
    InferNet net(toy_infernet(), 5);
    const EncodedSample& e = skirts()[2];
    InferPair p = net.make_pair(e.sample.posed_garment, e.posed_body, random_vector(5, 9));
    for (int i = 0; i < 5; ++i) p.target(i) += 5.0;
    std::vector<double> parts;
    nn::Gradients g = net.zero_gradients();
    net.sample_loss(p, &g, parts);
    const auto rep = nn::check_gradients([&] { return net.sample_loss(p, nullptr, parts); },
                                         net.params(), g, 1e-6);
    CAPTURE(rep.worst);
    CHECK(rep.max_rel_error < 1e-4);
  }

  TEST_CASE("branches are invariant to point and vertex order") {
    InferNet net(toy_infernet(), 5);
    const EncodedSample& e = skirts()[4];
    const InferPair p = net.make_pair(e.sample.posed_garment, e.posed_body, Eigen::VectorXd::Zero(5));
    nn::Tensor shuffled = p.garment;
    std::vector<int> order(shuffled.dim(0));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(4);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < shuffled.dim(0); ++i)
      for (int k = 0; k < 3; ++k) shuffled[3 * i + k] = p.garment[3 * order[i] + k];
    const BranchFeatures a = net.features(p.human, p.garment);
    const BranchFeatures b = net.features(p.human, shuffled);
    for (std::size_t i = 0; i < a.garment.size(); ++i) CHECK(std::abs(a.garment[i] - b.garment[i]) < 1e-12);

    const InferPair q = net.make_pair(e.sample.posed_garment, permuted(e.posed_body, 8), Eigen::VectorXd::Zero(5));
    CHECK(net.predict(q.human, q.garment) == net.predict(p.human, p.garment));
  }

  TEST_CASE("invalid inputs are rejected") {
    InferNet net(toy_infernet(), 5);
    const EncodedSample& e = skirts()[0];
    CHECK_THROWS_AS(net.make_pair(e.sample.posed_garment, e.posed_body, Eigen::VectorXd::Zero(4)),
                    DomainError);
    CHECK_THROWS_AS(sample_surface(geom::TriMesh{}, 8, 0, 1.0), DomainError);
    std::vector<InferPair> few(19, net.make_pair(e.sample.posed_garment, e.posed_body, Eigen::VectorXd::Zero(5)));
    CHECK_THROWS_AS(train_infernet(net, few), DomainError);
  }

  TEST_CASE("a repeated pair is memorized and the end-to-end path works") {
    InferNetConfig c = toy_infernet();
    c.train.epochs = 150;
    c.train.learning_rate = 0.02;
    InferNet net(c, 6);
    const EncodedSample& e = skirts()[10];
    const Latent target = 0.3 * random_vector(6, 21);
    const std::vector<InferPair> same(20, net.make_pair(e.sample.posed_garment, e.posed_body, target));
    CHECK(train_infernet(net, same).final_loss < 1e-2);
    CHECK(net.residual_threshold() >= 0.0);

    ParamNetConfig pc = toy_paramnet();
    pc.train.epochs = 40;
    ParamNet shape(pc, uv::CaseTag::kCase2, 3);
    train_paramnet(shape, tpose_maps());
    const InferenceResult r = infer_shape(net, shape, e.sample.posed_garment, e.posed_body);
    CHECK((r.s - to_params(shape.pca(), r.z)).norm() < 1e-12);
    CHECK(r.nearest == 0);
    CHECK(!r.flagged);
    geom::TriMesh huge = e.sample.posed_garment;
    for (geom::Vec3& v : huge.vertices) v *= 1000.0;
    CHECK(infer_shape(net, shape, huge, e.posed_body).flagged);
    CHECK_THROWS_AS(infer_shape(net, shape, geom::TriMesh{}, e.posed_body), DomainError);

    const auto path = temp_file("infernet.uvck");
    net.save(path);
    const InferNet back = InferNet::load(path);
    CHECK(back.training_latents().size() == 20);
    CHECK(back.residual_threshold() == doctest::Approx(net.residual_threshold()).epsilon(1e-6));
    std::filesystem::remove(path);

    AnimNet anim(toy_animnet(), uv::CaseTag::kCase2, 3);
    const std::vector<body::BodyState> poses{gen::jittered_pose(tpl(), 1, 0.05, 3)};
    CHECK_THROWS_AS(edit_and_animate(r, {}, shape, anim, tpl(), {}), DomainError);
    CHECK_THROWS_AS(edit_and_animate(r, {{shape.pca().dims(), 0.0}}, shape, anim, tpl(), poses),
                    DomainError);
    const DecodedShape d = shape.decode(from_params(shape.pca(), r.s));
    REQUIRE(d.map.mask_count() > 0);
    const auto frames = edit_and_animate(r, {}, shape, anim, tpl(), poses);
    const AnimateResult direct = animate_params(anim, shape, r.s, tpl(), poses[0]);
    CHECK(frames.at(0).mesh.vertices == direct.mesh.vertices);
  }
}
