#include "uvcloth/nn/network.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "uvcloth/error.hpp"

namespace uvcloth::nn {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_version{1};

}  // namespace

Network::Network(const json& spec, Shape input_shape, std::uint64_t seed)
    : spec_(spec), input_shape_(std::move(input_shape)), seed_(seed), version_(g_version++) {
  if (!spec_.is_array() || spec_.empty()) throw DomainError("network spec must be a nonempty layer list");
  Shape s = input_shape_;
  std::mt19937_64 rng(seed);
  std::size_t count = 0;
  for (const json& d : spec_) {
    auto layer = make_layer(d);
    try {
      s = layer->output_shape(s);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(layers_.size()) + " (" + d.dump() +
                           "): " + e.what());
    }
    layer->initialize(rng);
    first_param_.push_back(count);
    count += layer->params().size();
    layers_.push_back(std::move(layer));
  }
  output_shape_ = s;
}

Network::Network(const Network& o)
    : spec_(o.spec_),
      input_shape_(o.input_shape_),
      output_shape_(o.output_shape_),
      seed_(o.seed_),
      first_param_(o.first_param_),
      version_(g_version++) {
  for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& o) {
  if (this != &o) {
    Network copy(o);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Network::forward(const Tensor& x, ForwardCache* cache) const {
  if (x.shape != input_shape_) {
    throw DimensionError("network expects input " + shape_string(input_shape_) + ", got " +
                         shape_string(x.shape));
  }
  if (cache) {
    cache->owner = this;
    cache->version = version_;
    cache->layers.assign(layers_.size(), {});
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, cache ? &cache->layers[i] : nullptr);
  }
  return h;
}

Tensor Network::backward(const ForwardCache& cache, const Tensor& grad_out, Gradients& grads) const {
  if (cache.owner != this || cache.version != version_ || cache.layers.size() != layers_.size()) {
    throw DomainError("stale forward cache: it belongs to another network or predates an update");
  }
  if (grad_out.shape != output_shape_) {
    throw DimensionError("output gradient " + shape_string(grad_out.shape) + " does not match " +
                         shape_string(output_shape_));
  }
  if (grads.size() != first_param_.back() + layers_.back()->params().size()) {
    throw DimensionError("gradient list does not match the network parameters");
  }
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const std::size_t n = layers_[i]->params().size();
    g = layers_[i]->backward(cache.layers[i], g,
                             std::span<Tensor>(grads.data() + first_param_[i], n));
  }
  return g;
}

std::vector<Tensor*> Network::params() {
  version_ = g_version++;
  std::vector<Tensor*> out;
  for (auto& l : layers_)
    for (Tensor* t : l->params()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> Network::params() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_)
    for (const Tensor* t : static_cast<const Layer&>(*l).params()) out.push_back(t);
  return out;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  for (const Tensor* t : params()) g.emplace_back(t->shape);
  return g;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : params()) n += t->size();
  return n;
}

// ---------------------------------------------------------------------------

LossResult l1_masked_loss(const Tensor& pred, const Tensor& target, const Tensor* mask) {
  if (pred.shape != target.shape) {
    throw DimensionError("loss shapes differ: " + shape_string(pred.shape) + " vs " +
                         shape_string(target.shape));
  }
  const std::size_t n = pred.size();
  std::size_t plane = n;  // mask period
  if (mask) {
    if (mask->shape == pred.shape) {
      plane = n;
    } else if (pred.shape.size() == 3 && mask->shape == Shape{pred.shape[1], pred.shape[2]}) {
      plane = mask->size();
    } else {
      throw DimensionError("mask " + shape_string(mask->shape) + " does not broadcast over " +
                           shape_string(pred.shape));
    }
  }
  LossResult r;
  r.grad = Tensor(pred.shape);
  std::size_t count = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mask ? mask->data[i % plane] : 1.0;
    if (m == 0.0) continue;
    ++count;
    const double d = m * pred.data[i] - m * target.data[i];
    sum += std::abs(d);
    r.grad.data[i] = d > 0 ? m : (d < 0 ? -m : 0.0);
  }
  if (count == 0) throw DomainError("masked loss over an empty mask");
  r.value = sum / static_cast<double>(count);
  for (double& g : r.grad.data) g /= static_cast<double>(count);
  return r;
}

void sgd_step(const std::vector<Tensor*>& params, const Gradients& grads, double lr,
              double momentum, SgdState& state) {
  if (params.size() != grads.size()) throw DimensionError("parameter and gradient counts differ");
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& v = state.velocity[k];
    if (grads[k].shape != p.shape || v.shape != p.shape) {
      throw DimensionError("gradient shape " + shape_string(grads[k].shape) +
                           " does not match parameter " + shape_string(p.shape));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      v.data[i] = momentum * v.data[i] + grads[k].data[i];
      p.data[i] -= lr * v.data[i];
    }
  }
}

void clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (Tensor& g : grads)
    for (double& v : g.data) v *= s;
}

// ---------------------------------------------------------------------------

GradCheckReport check_gradients(const std::function<double()>& loss,
                                const std::vector<Tensor*>& params, const Gradients& analytic,
                                double eps, std::size_t stride, double floor) {
  if (params.size() != analytic.size()) throw DimensionError("gradient list size mismatch");
  GradCheckReport rep;
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); i += stride) {
      const double keep = p.data[i];
      p.data[i] = keep + eps;
      const double up = loss();
      p.data[i] = keep - eps;
      const double down = loss();
      p.data[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = "tensor" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

GradCheckReport check_network_gradients(Network& net, const Tensor& input, std::uint64_t seed,
                                        double eps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor r(net.output_shape());
  for (double& v : r.data) v = u(rng);
  Tensor x = input;

  auto params = net.params();
  ForwardCache cache;
  net.forward(x, &cache);
  Gradients grads = net.zero_gradients();
  const Tensor dx = net.backward(cache, r, grads);

  const auto loss = [&] {
    const Tensor y = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r.data[i] * y.data[i];
    return s;
  };
  params.push_back(&x);
  grads.push_back(dx);
  return check_gradients(loss, params, grads, eps);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("checkpoint truncated while reading " + what, 0);
  return v;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw DomainError("checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  json manifest;
  manifest["meta"] = ck.meta;
  manifest["tensors"] = json::array();
  for (const auto& [name, t] : ck.tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape}});
  }
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : ck.tensors)
    for (double v : t.data) put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a UVCK checkpoint", 0);
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw ParseError("unsupported UVCK version " + std::to_string(version), 0);
  const auto len = get<std::uint64_t>(in, "manifest length");
  if (len > (1ull << 30)) throw ParseError("implausible UVCK manifest length", 0);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("checkpoint truncated in manifest", 0);
  Checkpoint ck;
  json manifest;
  try {
    manifest = json::parse(text);
    ck.meta = manifest.at("meta");
    for (const json& e : manifest.at("tensors")) {
      Tensor t(e.at("shape").get<Shape>());
      for (double& v : t.data) v = get<float>(in, e.at("name").get<std::string>());
      ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed UVCK manifest: ") + e.what(), 0);
  }
  return ck;
}

json store_network(const Network& net, const std::string& prefix, Checkpoint& ck) {
  const auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.add(prefix + "." + std::to_string(i), *params[i]);
  }
  return {{"spec", net.spec()}, {"input_shape", net.input_shape()}, {"seed", net.seed()}};
}

Network restore_network(const json& info, const std::string& prefix, const Checkpoint& ck) {
  Network net;
  try {
    net = Network(info.at("spec"), info.at("input_shape").get<Shape>(),
                  info.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed network description: ") + e.what(), 0);
  }
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ck.tensor(prefix + "." + std::to_string(i));
    if (t.shape != params[i]->shape) {
      throw DimensionError("checkpoint tensor " + prefix + "." + std::to_string(i) + " has shape " +
                           shape_string(t.shape) + ", expected " + shape_string(params[i]->shape));
    }
    *params[i] = t;
  }
  return net;
}

}  // namespace uvcloth::nn
