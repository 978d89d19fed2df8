#include "uvcloth/model/map_tensors.hpp"

#include "uvcloth/error.hpp"
#include "uvcloth/uv/codec.hpp"

namespace uvcloth::model {

nn::Tensor values_tensor(const uv::UVMap& map) {
  const int R = map.resolution();
  const std::size_t T = map.texel_count();
  nn::Tensor t({map.channels(), R, R});
  for (int c = 0; c < map.channels(); ++c) {
    auto plane = map.plane(c);
    for (std::size_t i = 0; i < T; ++i) t[c * T + i] = map.mask()[i] ? plane[i] : 0.0;
  }
  return t;
}

nn::Tensor mask_tensor(const uv::UVMap& map) {
  const int R = map.resolution();
  nn::Tensor t({R, R});
  for (std::size_t i = 0; i < map.texel_count(); ++i) t[i] = map.mask()[i] ? 1.0 : 0.0;
  return t;
}

nn::Tensor tmask_tensor(const uv::UVMap& map, double d_max) {
  const int R = map.resolution();
  const uv::BiDistanceMap b = uv::bidistance_transform(map, d_max);
  nn::Tensor t({1, R, R});
  for (std::size_t i = 0; i < b.values.size(); ++i) t[i] = b.values[i] / d_max;
  return t;
}

nn::Tensor concat_channels(const std::vector<const nn::Tensor*>& parts) {
  if (parts.empty()) throw DimensionError("nothing to concatenate");
  const int H = parts.front()->dim(1);
  const int W = parts.front()->dim(2);
  int C = 0;
  for (const nn::Tensor* p : parts) {
    if (p->shape.size() != 3 || p->dim(1) != H || p->dim(2) != W) {
      throw DimensionError("cannot concatenate " + nn::shape_string(p->shape) + " images of size " +
                           std::to_string(H) + "x" + std::to_string(W));
    }
    C += p->dim(0);
  }
  nn::Tensor out({C, H, W});
  std::size_t off = 0;
  for (const nn::Tensor* p : parts) {
    std::copy(p->data.begin(), p->data.end(), out.data.begin() + off);
    off += p->size();
  }
  return out;
}

uv::UVMap tensor_to_map(const nn::Tensor& values, const std::vector<std::uint8_t>& mask,
                        uv::CaseTag tag) {
  if (values.shape.size() != 3 || values.dim(1) != values.dim(2)) {
    throw DimensionError("map tensor must be (C, R, R), got " + nn::shape_string(values.shape));
  }
  const int R = values.dim(1);
  uv::UVMap map(R, values.dim(0), tag);
  if (mask.size() != map.texel_count()) throw DimensionError("mask size does not match the map");
  map.mask() = mask;
  const std::size_t T = map.texel_count();
  for (int c = 0; c < values.dim(0); ++c) {
    auto plane = map.plane(c);
    for (std::size_t i = 0; i < T; ++i) plane[i] = mask[i] ? static_cast<float>(values[c * T + i]) : 0.f;
  }
  return map;
}

std::vector<std::uint8_t> mask_from_tmask(const nn::Tensor& tmask, double d_max) {
  std::vector<double> v(tmask.data);
  for (double& x : v) x *= d_max;
  return uv::recover_mask(v);
}

}  // namespace uvcloth::model
