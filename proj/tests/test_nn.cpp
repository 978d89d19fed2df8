#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "uvcloth/error.hpp"
#include "uvcloth/nn/network.hpp"

using namespace uvcloth;
using namespace uvcloth::nn;
using nlohmann::json;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(s));
  for (double& v : t.data) v = u(rng);
  return t;
}

void check_layer(const json& spec, Shape input, std::uint64_t seed) {
  Network net(spec, input, seed);
  const auto rep = check_network_gradients(net, random_tensor(input, seed + 1), seed + 2);
  CAPTURE(spec.dump());
  CAPTURE(rep.worst);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_error < 1e-4);
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("dense with identity weights passes inputs through") {
    Network net(json::array({{{"type", "dense"}, {"in", 2}, {"out", 2}}}), {2}, 0);
    auto p = net.params();
    *p[0] = Tensor({2, 2}, {1, 0, 0, 1});
    p[1]->fill(0.0);
    CHECK(net.forward(Tensor({2}, {3, -1})).data == std::vector<double>{3, -1});
  }

  TEST_CASE("relu clamps negatives") {
    Network net(json::array({{{"type", "relu"}}}), {3}, 0);
    CHECK(net.forward(Tensor({3}, {-1, 0, 2})).data == std::vector<double>{0, 0, 2});
  }

  TEST_CASE("all-ones kernel sums the covered one-hot image") {
    Network net(json::array({{{"type", "conv2d"}, {"in", 1}, {"out", 1}, {"kernel", 3}, {"stride", 1}}}),
                {1, 3, 3}, 0);
    auto p = net.params();
    p[0]->fill(1.0);
    p[1]->fill(0.0);
    Tensor img({1, 3, 3});
    img.data[4] = 1.0;
    const Tensor out = net.forward(img);
    CHECK(out.shape == Shape{1, 3, 3});
    for (double v : out.data) CHECK(v == 1.0);
    // Hand convolution of a non-trivial image: corner sees its 2x2 block.
    Tensor ramp({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor r = net.forward(ramp);
    CHECK(r.data[0] == 1 + 2 + 4 + 5);
    CHECK(r.data[4] == 45);
    CHECK(r.data[5] == 2 + 3 + 5 + 6 + 8 + 9);
  }

  TEST_CASE("strided convolution halves the grid") {
    Network net(json::array({{{"type", "conv2d"}, {"in", 2}, {"out", 4}, {"kernel", 3}, {"stride", 2}}}),
                {2, 8, 8}, 1);
    CHECK(net.output_shape() == Shape{4, 4, 4});
  }

  TEST_CASE("dense weight gradient is the outer product") {
    Network net(json::array({{{"type", "dense"}, {"in", 3}, {"out", 2}}}), {3}, 5);
    const Tensor x({3}, {0.5, -2.0, 1.5});
    const Tensor g({2}, {0.3, -0.7});
    ForwardCache cache;
    net.forward(x, &cache);
    Gradients grads = net.zero_gradients();
    net.backward(cache, g, grads);
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 3; ++i) CHECK(grads[0].data[o * 3 + i] == doctest::Approx(g[o] * x[i]));
    CHECK(grads[1].data == g.data);
  }

  TEST_CASE("zero output gradient gives zero gradients") {
    Network net(json::array({{{"type", "conv2d"}, {"in", 1}, {"out", 2}, {"kernel", 3}, {"stride", 1}},
                             {{"type", "leaky_relu"}, {"slope", 0.1}},
                             {{"type", "dense"}, {"in", 32}, {"out", 3}}}),
                {1, 4, 4}, 2);
    ForwardCache cache;
    net.forward(random_tensor({1, 4, 4}, 3), &cache);
    Gradients grads = net.zero_gradients();
    const Tensor dx = net.backward(cache, Tensor({3}), grads);
    for (const Tensor& g : grads)
      for (double v : g.data) CHECK(v == 0.0);
    for (double v : dx.data) CHECK(v == 0.0);
  }

  TEST_CASE("every layer type passes a finite-difference check") {
    check_layer(json::array({{{"type", "dense"}, {"in", 5}, {"out", 4}}}), {5}, 10);
    check_layer(json::array({{{"type", "conv2d"}, {"in", 2}, {"out", 3}, {"kernel", 3}, {"stride", 1}}}),
                {2, 5, 5}, 11);
    check_layer(json::array({{{"type", "conv2d"}, {"in", 2}, {"out", 3}, {"kernel", 3}, {"stride", 2}}}),
                {2, 6, 6}, 12);
    check_layer(json::array({{{"type", "upsample"}, {"factor", 2}},
                             {{"type", "conv2d"}, {"in", 1}, {"out", 1}, {"kernel", 3}, {"stride", 1}}}),
                {1, 3, 3}, 13);
    check_layer(json::array({{{"type", "relu"}}}), {12}, 14);
    check_layer(json::array({{{"type", "leaky_relu"}, {"slope", 0.2}}}), {12}, 15);
    check_layer(json::array({{{"type", "sigmoid"}}}), {12}, 16);
    check_layer(json::array({{{"type", "tanh"}}}), {12}, 17);
    check_layer(json::array({{{"type", "point_mlp"}, {"widths", {3, 8, 6}}}}), {10, 3}, 18);
    check_layer(json::array({{{"type", "maxpool_points"}}}), {10, 4}, 19);
    check_layer(json::array({{{"type", "reshape"}, {"shape", {2, 3, 2}}},
                             {{"type", "conv2d"}, {"in", 2}, {"out", 1}, {"kernel", 3}, {"stride", 1}}}),
                {12}, 20);
  }

  TEST_CASE("a small encoder-decoder passes a finite-difference check") {
    const json spec = json::array({
        {{"type", "conv2d"}, {"in", 2}, {"out", 4}, {"kernel", 3}, {"stride", 2}},
        {{"type", "leaky_relu"}, {"slope", 0.1}},
        {{"type", "reshape"}, {"shape", {64}}},
        {{"type", "dense"}, {"in", 64}, {"out", 6}},
        {{"type", "dense"}, {"in", 6}, {"out", 16}},
        {{"type", "reshape"}, {"shape", {1, 4, 4}}},
        {{"type", "upsample"}, {"factor", 2}},
        {{"type", "conv2d"}, {"in", 1}, {"out", 2}, {"kernel", 3}, {"stride", 1}},
        {{"type", "sigmoid"}},
    });
    check_layer(spec, {2, 8, 8}, 30);
  }

  TEST_CASE("masked L1 loss") {
    const Tensor a({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(l1_masked_loss(a, a).value == 0.0);
    Tensor b = a;
    for (double& v : b.data) v -= 0.1;
    CHECK(l1_masked_loss(a, b).value == doctest::Approx(0.1));

    Tensor mask({2, 2}, {1, 1, 0, 0});
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += (i % 4 < 2) ? 0.2 : 9.0;
    const auto r = l1_masked_loss(c, a, &mask);
    CHECK(r.value == doctest::Approx(0.2));
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i % 4 >= 2) CHECK(r.grad.data[i] == 0.0);
    }
    CHECK(l1_masked_loss(a, a, &mask).grad.data == std::vector<double>(8, 0.0));

    Tensor empty({2, 2});
    CHECK_THROWS_AS(l1_masked_loss(a, b, &empty), DomainError);
    CHECK_THROWS_AS(l1_masked_loss(a, Tensor({8})), DimensionError);
  }

  TEST_CASE("masked L1 ignores targets outside the mask") {
    const Tensor pred = random_tensor({3, 4, 4}, 40);
    Tensor target = random_tensor({3, 4, 4}, 41);
    const Tensor mask({4, 4}, {1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1});
    const double before = l1_masked_loss(pred, target, &mask).value;
    for (std::size_t i = 0; i < target.size(); ++i)
      if (mask.data[i % 16] == 0.0) target.data[i] += 123.0;
    CHECK(l1_masked_loss(pred, target, &mask).value == before);
  }

  TEST_CASE("sgd with momentum") {
    Tensor p({2}, {1.0, 2.0});
    const Gradients g{Tensor({2}, {0.5, -1.0})};
    SgdState st;
    sgd_step({&p}, g, 1.0, 0.0, st);
    CHECK(p.data == std::vector<double>{0.5, 3.0});

    Tensor q({2}, {0.0, 0.0});
    SgdState mom;
    sgd_step({&q}, g, 1.0, 0.9, mom);
    sgd_step({&q}, g, 1.0, 0.9, mom);
    CHECK(q.data[0] == doctest::Approx(-(0.5 + 1.9 * 0.5)));
    CHECK(q.data[1] == doctest::Approx(1.0 + 1.9 * 1.0));

    Tensor r({2}, {4.0, 5.0});
    SgdState z;
    sgd_step({&r}, {Tensor({2})}, 0.3, 0.9, z);
    CHECK(r.data == std::vector<double>{4.0, 5.0});
  }

  TEST_CASE("forward is deterministic and zero learning rate keeps parameters") {
    const json spec = json::array({{{"type", "point_mlp"}, {"widths", {3, 16, 8}}},
                                   {{"type", "maxpool_points"}},
                                   {{"type", "dense"}, {"in", 8}, {"out", 4}}});
    Network a(spec, {20, 3}, 9), b(spec, {20, 3}, 9);
    const Tensor x = random_tensor({20, 3}, 1);
    CHECK(a.forward(x) == b.forward(x));

    const auto before = a.forward(x);
    ForwardCache cache;
    const Tensor y = a.forward(x, &cache);
    Gradients grads = a.zero_gradients();
    a.backward(cache, y, grads);
    SgdState st;
    sgd_step(a.params(), grads, 0.0, 0.9, st);
    CHECK(a.forward(x) == before);
  }

  TEST_CASE("stale caches and bad shapes are rejected") {
    const json spec = json::array({{{"type", "dense"}, {"in", 3}, {"out", 2}}});
    Network a(spec, {3}, 1), b(spec, {3}, 1);
    ForwardCache cache;
    a.forward(Tensor({3}, 1.0), &cache);
    Gradients g = a.zero_gradients();
    CHECK_THROWS_AS(b.backward(cache, Tensor({2}), g), DomainError);
    a.params();  // parameters may have changed
    CHECK_THROWS_AS(a.backward(cache, Tensor({2}), g), DomainError);
    CHECK_THROWS_AS(a.forward(Tensor({4})), DimensionError);
    CHECK_THROWS_AS(Network(json::array({{{"type", "conv2d"}, {"in", 3}, {"out", 2}}}), {2, 4, 4}, 0),
                    DimensionError);
    CHECK_THROWS_AS(Network(json::array({{{"type", "bogus"}}}), {3}, 0), DomainError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  }

  TEST_CASE("glorot initialization bounds") {
    Network net(json::array({{{"type", "dense"}, {"in", 30}, {"out", 20}}}), {30}, 4);
    const double a = std::sqrt(6.0 / 50.0);
    const auto p = static_cast<const Network&>(net).params();
    double hi = 0.0;
    for (double v : p[0]->data) hi = std::max(hi, std::abs(v));
    CHECK(hi <= a);
    CHECK(hi > 0.8 * a);
    for (double v : p[1]->data) CHECK(v == 0.0);
  }

  TEST_CASE("checkpoint round trip") {
    const json spec = json::array({{{"type", "conv2d"}, {"in", 1}, {"out", 2}, {"kernel", 3}, {"stride", 2}},
                                   {{"type", "reshape"}, {"shape", {8}}},
                                   {{"type", "dense"}, {"in", 8}, {"out", 3}}});
    Network net(spec, {1, 4, 4}, 77);
    Checkpoint ck;
    ck.meta["note"] = "unit";
    ck.meta["net"] = store_network(net, "net", ck);
    const auto path = std::filesystem::temp_directory_path() / "uvcloth_nn_ck.uvck";
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.meta.at("note") == "unit");
    const Network restored = restore_network(back.meta.at("net"), "net", back);
    const Tensor x = random_tensor({1, 4, 4}, 3);
    const Tensor y0 = net.forward(x), y1 = restored.forward(x);
    for (std::size_t i = 0; i < y0.size(); ++i) CHECK(y1[i] == doctest::Approx(y0[i]).epsilon(1e-6));

    {
      std::ofstream bad(path, std::ios::binary);
      bad << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
}
