#include "uvcloth/nn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "uvcloth/error.hpp"

namespace uvcloth::nn {

using nlohmann::json;

json TrainLog::to_json(const std::vector<std::string>& names) const {
  auto named = [&](const std::vector<double>& parts) {
    json j = json::object();
    for (std::size_t i = 0; i < parts.size() && i < names.size(); ++i) j[names[i]] = parts[i];
    return j;
  };
  json ep = json::array();
  for (const EpochRecord& e : epochs) {
    ep.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"parts", named(e.parts)}});
  }
  return {{"initial_loss", initial_loss},
          {"final_loss", final_loss},
          {"initial_parts", named(initial_parts)},
          {"final_parts", named(final_parts)},
          {"seconds", seconds},
          {"epochs", ep}};
}

double evaluate(std::size_t n, const SampleStep& step, std::vector<double>* parts) {
  if (n == 0) throw DomainError("cannot evaluate an empty training set");
  double total = 0.0;
  std::vector<double> sum;
  std::vector<double> p;
  for (std::size_t i = 0; i < n; ++i) {
    p.clear();
    total += step(i, nullptr, p);
    if (sum.size() < p.size()) sum.resize(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) sum[k] += p[k];
  }
  for (double& v : sum) v /= static_cast<double>(n);
  if (parts) *parts = sum;
  return total / static_cast<double>(n);
}

TrainLog train(std::size_t n, const TrainConfig& cfg, const std::vector<Tensor*>& params,
               const SampleStep& step) {
  if (n == 0) throw DomainError("cannot train on an empty set");
  if (cfg.epochs < 0 || cfg.batch_size <= 0) throw DomainError("invalid training schedule");
  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log;
  log.initial_loss = evaluate(n, step, &log.initial_parts);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SgdState sgd;
  Gradients grads;
  for (const Tensor* p : params) grads.emplace_back(p->shape);

  double best = log.initial_loss;
  std::vector<Tensor> best_params;
  if (cfg.eval_every > 0)
    for (const Tensor* p : params) best_params.push_back(*p);

  int diverged = 0;
  std::vector<double> parts;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    const double progress = cfg.epochs > 1 ? (epoch - 1.0) / (cfg.epochs - 1.0) : 0.0;
    const double lr = cfg.learning_rate *
                      (cfg.min_lr_fraction + (1.0 - cfg.min_lr_fraction) * 0.5 *
                                                 (1.0 + std::cos(std::numbers::pi * progress)));
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      for (Tensor& g : grads) g.fill(0.0);
      for (std::size_t b = start; b < end; ++b) {
        parts.clear();
        rec.loss += step(order[b], &grads, parts);
        if (rec.parts.size() < parts.size()) rec.parts.resize(parts.size(), 0.0);
        for (std::size_t k = 0; k < parts.size(); ++k) rec.parts[k] += parts[k];
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Tensor& g : grads)
        for (double& v : g.data) v *= inv;
      if (cfg.clip_norm > 0) clip_gradients(grads, cfg.clip_norm);
      sgd_step(params, grads, lr, cfg.momentum, sgd);
    }
    rec.loss /= static_cast<double>(n);
    for (double& v : rec.parts) v /= static_cast<double>(n);
    log.epochs.push_back(rec);

    diverged = (rec.loss > 10.0 * log.initial_loss || !std::isfinite(rec.loss)) ? diverged + 1 : 0;
    if (diverged >= 3) {
      throw DomainError("training diverged: loss " + std::to_string(rec.loss) +
                        " stayed above 10x the initial " + std::to_string(log.initial_loss));
    }
    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const double val = evaluate(n, step, nullptr);
      if (val < best) {
        best = val;
        for (std::size_t k = 0; k < params.size(); ++k) best_params[k] = *params[k];
      }
    }
  }
  if (cfg.eval_every > 0) {
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] = best_params[k];
  }
  log.final_loss = evaluate(n, step, &log.final_parts);
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

}  // namespace uvcloth::nn
