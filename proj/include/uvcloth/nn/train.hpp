#pragma once

#include <functional>

#include "json.hpp"

#include "uvcloth/nn/network.hpp"

namespace uvcloth::nn {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double learning_rate = 0.01;
  double momentum = 0.9;
  /// Cosine annealing from learning_rate down to learning_rate·min_lr_fraction
  /// at the last epoch; 1 keeps the rate constant.
  double min_lr_fraction = 0.05;
  /// Global gradient-norm clip per batch; 0 disables.
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  /// Evaluate the whole set every `eval_every` epochs and restore the best
  /// evaluated parameters at the end; 0 disables.
  int eval_every = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::vector<double> parts;  // model-specific loss terms
};

struct TrainLog {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> initial_parts;
  std::vector<double> final_parts;
  std::vector<EpochRecord> epochs;
  double seconds = 0.0;

  nlohmann::json to_json(const std::vector<std::string>& part_names) const;
};

/// Loss of sample `index`; when `grads` is non-null also adds its gradients
/// (aligned with the trained parameter list). `parts` receives the loss terms.
using SampleStep =
    std::function<double(std::size_t index, Gradients* grads, std::vector<double>& parts)>;

/// Mean loss (and parts) over all samples without updating anything.
double evaluate(std::size_t sample_count, const SampleStep& step, std::vector<double>* parts);

/// Seeded mini-batch SGD with momentum over shuffled samples, with the
/// learning rate annealed per epoch. Batch gradients
/// are averaged. Throws DomainError when the epoch loss stays above 10× the
/// initial loss for 3 consecutive epochs.
TrainLog train(std::size_t sample_count, const TrainConfig& cfg,
               const std::vector<Tensor*>& params, const SampleStep& step);

}  // namespace uvcloth::nn
