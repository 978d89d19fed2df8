#pragma once

#include <memory>
#include <random>
#include <span>

#include "json.hpp"

#include "uvcloth/nn/tensor.hpp"

namespace uvcloth::nn {

/// What a layer keeps from forward for its backward pass.
struct LayerCache {
  Tensor input;
  std::vector<Tensor> saved;
  std::vector<int> index;
};

/// A differentiable stage working on one sample at a time.
class Layer {
 public:
  virtual ~Layer() = default;

  /// JSON descriptor, e.g. {"type": "dense", "in": 4, "out": 2}.
  virtual nlohmann::json descriptor() const = 0;
  /// Throws DimensionError when the input shape is incompatible.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& x, LayerCache* cache) const = 0;
  /// Returns dLoss/dInput and adds parameter gradients into `grads`, which is
  /// aligned with params().
  virtual Tensor backward(const LayerCache& cache, const Tensor& grad_out,
                          std::span<Tensor> grads) const = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  std::vector<const Tensor*> params() const;
  /// Glorot-uniform weights, zero biases.
  virtual void initialize(std::mt19937_64&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Builds a layer from its descriptor. Known types: dense, conv2d, upsample,
/// relu, leaky_relu, sigmoid, tanh, point_mlp, maxpool_points, reshape.
std::unique_ptr<Layer> make_layer(const nlohmann::json& descriptor);

}  // namespace uvcloth::nn
