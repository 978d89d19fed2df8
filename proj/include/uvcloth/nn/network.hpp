#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>

#include "uvcloth/nn/layers.hpp"

namespace uvcloth::nn {

/// Per-layer caches of one forward pass, tagged with the producing network.
struct ForwardCache {
  const void* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<LayerCache> layers;
};

using Gradients = std::vector<Tensor>;

/// Sequential network built from a JSON layer list. Shapes are checked at
/// construction; parameters are Glorot-initialized from `seed`.
class Network {
 public:
  Network() = default;
  Network(const nlohmann::json& spec, Shape input_shape, std::uint64_t seed);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const nlohmann::json& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t layer_count() const { return layers_.size(); }

  /// Throws DimensionError on a shape mismatch.
  Tensor forward(const Tensor& x, ForwardCache* cache = nullptr) const;
  /// Adds parameter gradients into `grads` (see zero_gradients) and returns
  /// the input gradient. Throws DomainError for a cache from another network
  /// or from before a parameter update.
  Tensor backward(const ForwardCache& cache, const Tensor& grad_out, Gradients& grads) const;

  /// Mutable access invalidates outstanding caches.
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  Gradients zero_gradients() const;
  std::size_t parameter_count() const;

 private:
  nlohmann::json spec_ = nlohmann::json::array();
  Shape input_shape_;
  Shape output_shape_;
  std::uint64_t seed_ = 0;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> first_param_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------
// Losses and optimization

struct LossResult {
  double value = 0.0;
  Tensor grad;  // dLoss/dPred
};

/// Mean over masked elements of |pred·m − target·m|. `mask` is either null,
/// shaped like pred, or (H, W) broadcast over the channels of a (C, H, W)
/// pred. The subgradient at a tie is 0. Throws DomainError on an empty mask.
LossResult l1_masked_loss(const Tensor& pred, const Tensor& target, const Tensor* mask = nullptr);

struct SgdState {
  std::vector<Tensor> velocity;
};

/// v ← momentum·v + g; p ← p − lr·v.
void sgd_step(const std::vector<Tensor*>& params, const Gradients& grads, double lr,
              double momentum, SgdState& state);

/// Rescales gradients so their global L2 norm is at most max_norm.
void clip_gradients(Gradients& grads, double max_norm);

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "tensor[index]" of the worst entry
};

/// Compares analytic gradients with central differences of `loss` for every
/// entry of `params` (relative error |a − n| / max(|a|, |n|, floor)).
/// `stride` > 1 checks every stride-th entry of each tensor.
GradCheckReport check_gradients(const std::function<double()>& loss,
                                const std::vector<Tensor*>& params, const Gradients& analytic,
                                double eps = 1e-4, std::size_t stride = 1, double floor = 1e-3);

/// Gradient check of a network under the loss Σ r·out with a seeded random r,
/// including the input gradient.
GradCheckReport check_network_gradients(Network& net, const Tensor& input, std::uint64_t seed,
                                        double eps = 1e-4);

// ---------------------------------------------------------------------------
// Checkpoints

/// "UVCK" container: magic, u32 version = 1, u64 manifest length, JSON
/// manifest, then float32 little-endian blobs in manifest order.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Network description (spec, input shape, seed) plus its tensors under
/// `prefix`; the inverse rebuilds the network and loads the tensors.
nlohmann::json store_network(const Network& net, const std::string& prefix, Checkpoint& ck);
Network restore_network(const nlohmann::json& info, const std::string& prefix,
                        const Checkpoint& ck);

}  // namespace uvcloth::nn
