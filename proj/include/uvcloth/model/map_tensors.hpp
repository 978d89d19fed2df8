#pragma once

#include <vector>

#include "uvcloth/nn/tensor.hpp"
#include "uvcloth/uv/uv_map.hpp"

namespace uvcloth::model {

/// (C, R, R) planes with masked-out texels zero-filled.
nn::Tensor values_tensor(const uv::UVMap& map);

/// (R, R) binary mask.
nn::Tensor mask_tensor(const uv::UVMap& map);

/// (1, R, R) bi-distance map divided by d_max, so values lie in [-1, 1].
nn::Tensor tmask_tensor(const uv::UVMap& map, double d_max);

/// Stacks (C_i, R, R) tensors along the channel axis.
nn::Tensor concat_channels(const std::vector<const nn::Tensor*>& parts);

/// Map with the tensor's channels and the given mask; texels outside the mask
/// are zeroed.
uv::UVMap tensor_to_map(const nn::Tensor& values, const std::vector<std::uint8_t>& mask,
                        uv::CaseTag tag);

/// Binary mask from a predicted (1, R, R) tmask in units of d_max.
std::vector<std::uint8_t> mask_from_tmask(const nn::Tensor& tmask, double d_max);

}  // namespace uvcloth::model
