#include "uvcloth/nn/architectures.hpp"

#include "uvcloth/error.hpp"

namespace uvcloth::nn {

using nlohmann::json;

namespace {

constexpr double kSlope = 0.1;

json leaky() { return {{"type", "leaky_relu"}, {"slope", kSlope}}; }

json conv(int in, int out, int stride) {
  return {{"type", "conv2d"}, {"in", in}, {"out", out}, {"kernel", 3}, {"stride", stride}};
}

int stage_channels(int base, int stage) { return base << stage; }

}  // namespace

int conv_stages(int resolution) {
  int s = 0;
  int r = resolution;
  while (r > 4 && r % 2 == 0) {
    r /= 2;
    ++s;
  }
  if (r != 4 || s == 0) {
    throw DomainError("map resolution must be a power of two >= 8, got " + std::to_string(resolution));
  }
  return s;
}

json conv_encoder(int in_channels, int resolution, int base, int latent) {
  const int stages = conv_stages(resolution);
  json spec = json::array();
  int ch = in_channels;
  for (int i = 0; i < stages; ++i) {
    spec.push_back(conv(ch, stage_channels(base, i), 2));
    spec.push_back(leaky());
    ch = stage_channels(base, i);
  }
  spec.push_back({{"type", "reshape"}, {"shape", {ch * 16}}});
  spec.push_back({{"type", "dense"}, {"in", ch * 16}, {"out", latent}});
  return spec;
}

json conv_decoder(int latent, int out_channels, int resolution, int base) {
  const int stages = conv_stages(resolution);
  int ch = stage_channels(base, stages - 1);
  json spec = json::array();
  spec.push_back({{"type", "dense"}, {"in", latent}, {"out", ch * 16}});
  spec.push_back(leaky());
  spec.push_back({{"type", "reshape"}, {"shape", {ch, 4, 4}}});
  for (int i = stages - 1; i >= 0; --i) {
    const int next = i == 0 ? out_channels : stage_channels(base, i - 1);
    spec.push_back({{"type", "upsample"}, {"factor", 2}});
    spec.push_back(conv(ch, next, 1));
    if (i > 0) spec.push_back(leaky());
    ch = next;
  }
  return spec;
}

json point_encoder(const std::vector<int>& widths) {
  return json::array({{{"type", "point_mlp"}, {"widths", widths}}, {{"type", "maxpool_points"}}});
}

json fusion_mlp(int in, int hidden, int out) {
  return json::array({{{"type", "dense"}, {"in", in}, {"out", hidden}},
                      leaky(),
                      {{"type", "dense"}, {"in", hidden}, {"out", out}}});
}

}  // namespace uvcloth::nn
