#pragma once

#include "json.hpp"

namespace uvcloth::nn {

/// Stride-2 conv stages from R×R down to 4×4 (channels base·2^i), then a
/// dense layer to `latent`. R must be a power of two ≥ 8.
nlohmann::json conv_encoder(int in_channels, int resolution, int base_channels, int latent);

/// Mirror of conv_encoder: dense to 4×4, then nearest ×2 upsampling followed
/// by a 3×3 conv per stage; the last conv emits `out_channels` linearly.
nlohmann::json conv_decoder(int latent, int out_channels, int resolution, int base_channels);

/// Shared per-point MLP followed by a max over points.
nlohmann::json point_encoder(const std::vector<int>& widths);

/// in → hidden (leaky ReLU) → out.
nlohmann::json fusion_mlp(int in, int hidden, int out);

/// Number of stride-2 stages between R and 4; throws DomainError unless R is
/// a power of two ≥ 8.
int conv_stages(int resolution);

}  // namespace uvcloth::nn
