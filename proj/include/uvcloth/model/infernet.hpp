#pragma once

#include "uvcloth/model/animnet.hpp"

namespace uvcloth::model {

struct InferNetConfig {
  int points = 1024;
  std::vector<int> widths{3, 64, 128, 256};
  int fusion_hidden = 512;
  /// Inputs are expected centered on the body root; coordinates are scaled by
  /// this factor before entering the network.
  double scale = 1.0;
  std::uint64_t seed = 21;
  std::uint64_t sample_seed = 5;
  nn::TrainConfig train{100, 4, 0.01, 0.9, 0.05, 5.0, 0, 10};
  double flag_percentile = 99.0;
};

nlohmann::json infernet_config_to_json(const InferNetConfig& c);
InferNetConfig infernet_config_from_json(const nlohmann::json& j);

/// P points drawn area-uniformly over the surface with a fixed seed, as a
/// (P, 3) tensor of scaled coordinates. Depends on the face order and vertex
/// positions only, not on the vertex numbering. Throws DomainError for a mesh
/// without area.
nn::Tensor sample_surface(const geom::TriMesh& mesh, int points, std::uint64_t seed, double scale);

struct InferPair {
  nn::Tensor human;    // (P, 3)
  nn::Tensor garment;  // (P, 3)
  Latent target;
};

struct BranchFeatures {
  nn::Tensor human;
  nn::Tensor garment;
};

/// Two point-set branches (shared per-point MLP, max over points) for the
/// posed body and the posed garment, fused by a two-layer MLP into a latent of
/// the shape space.
class InferNet {
 public:
  InferNet(const InferNetConfig& cfg, int latent_dim);

  const InferNetConfig& config() const { return cfg_; }
  int latent_dim() const { return latent_; }

  InferPair make_pair(const geom::TriMesh& garment, const geom::TriMesh& human,
                      const Latent& target) const;

  BranchFeatures features(const nn::Tensor& human, const nn::Tensor& garment) const;
  Latent predict(const nn::Tensor& human, const nn::Tensor& garment) const;

  /// Mean |z_I − z_g| over latent entries; parts = {latent_l1}.
  double sample_loss(const InferPair& p, nn::Gradients* grads, std::vector<double>& parts) const;

  std::vector<nn::Tensor*> params();
  nn::Gradients zero_gradients() const;
  nn::Network& human_branch() { return human_; }
  nn::Network& garment_branch() { return garment_; }
  nn::Network& fusion() { return fusion_; }

  /// Training targets kept for retrieval and residual flagging.
  const std::vector<Latent>& training_latents() const { return targets_; }
  double residual_threshold() const { return threshold_; }
  /// Mean-L1 distance to the closest training latent and its index.
  std::pair<double, int> nearest_training(const Latent& z) const;
  void set_training_reference(std::vector<Latent> targets, double threshold);

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static InferNet load(const std::filesystem::path& path);

 private:
  InferNet() = default;

  InferNetConfig cfg_;
  int latent_ = 0;
  nn::Network human_;
  nn::Network garment_;
  nn::Network fusion_;
  std::vector<Latent> targets_;
  double threshold_ = 0.0;
};

/// Needs ≥20 pairs whose targets match the model's latent size. Afterwards
/// records the training latents and the flag threshold (the configured
/// percentile of the training residuals).
nn::TrainLog train_infernet(InferNet& net, const std::vector<InferPair>& pairs);

struct InferenceResult {
  Latent z;
  Eigen::VectorXd s;
  BranchFeatures features;
  double residual = 0.0;
  int nearest = -1;
  bool flagged = false;
};

InferenceResult infer_shape(const InferNet& net, const ParamNet& shape,
                            const geom::TriMesh& garment, const geom::TriMesh& human);

/// Replaces s_j by the given values, maps back to a latent, decodes the shape
/// and animates it over the pose sequence. Throws DomainError for j ≥ n or an
/// empty sequence.
std::vector<AnimateResult> edit_and_animate(const InferenceResult& result,
                                            const std::vector<std::pair<int, double>>& edits,
                                            const ParamNet& shape, const AnimNet& anim,
                                            const body::BodyTemplate& tpl,
                                            const std::vector<body::BodyState>& poses);

}  // namespace uvcloth::model
