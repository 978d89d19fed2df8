#include "uvcloth/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uvcloth/error.hpp"

namespace uvcloth::nn {

using nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(std::max(d, 0));
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream s;
  s << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? ", " : "") << shape[i];
  s << ')';
  return s.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != numel(shape)) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(data.size()) + " values");
  }
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

void Tensor::add(const Tensor& other) {
  if (other.shape != shape) {
    throw DimensionError("cannot add " + shape_string(other.shape) + " to " + shape_string(shape));
  }
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::vector<const Tensor*> Layer::params() const {
  auto mut = const_cast<Layer*>(this)->params();
  return {mut.begin(), mut.end()};
}

namespace {

void glorot(Tensor& w, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (double& v : w.data) v = u(rng);
}

void expect_rank(const Shape& s, std::size_t rank, const char* layer) {
  if (s.size() != rank) {
    throw DimensionError(std::string(layer) + " expects a rank-" + std::to_string(rank) +
                         " input, got " + shape_string(s));
  }
}

// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(int in, int out) : in_(in), out_(out), w_({out, in}), b_({out}) {
    if (in <= 0 || out <= 0) throw DomainError("dense layer sizes must be positive");
  }
  json descriptor() const override { return {{"type", "dense"}, {"in", in_}, {"out", out_}}; }
  Shape output_shape(const Shape& s) const override {
    if (numel(s) != static_cast<std::size_t>(in_)) {
      throw DimensionError("dense expects " + std::to_string(in_) + " inputs, got " +
                           shape_string(s));
    }
    return {out_};
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    output_shape(x.shape);
    Tensor y({out_});
    VecMap(y.data.data(), out_) = ConstMatMap(w_.data.data(), out_, in_) *
                                      ConstVecMap(x.data.data(), in_) +
                                  ConstVecMap(b_.data.data(), out_);
    if (cache) cache->input = x;
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor> grads) const override {
    const ConstVecMap gv(g.data.data(), out_);
    const ConstVecMap xv(c.input.data.data(), in_);
    MatMap(grads[0].data.data(), out_, in_) += gv * xv.transpose();
    VecMap(grads[1].data.data(), out_) += gv;
    Tensor dx(c.input.shape);
    VecMap(dx.data.data(), in_) = ConstMatMap(w_.data.data(), out_, in_).transpose() * gv;
    return dx;
  }
  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  void initialize(std::mt19937_64& rng) override {
    glorot(w_, in_, out_, rng);
    b_.fill(0.0);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_, out_;
  Tensor w_, b_;
};

// ---------------------------------------------------------------------------

// Zero-padded convolution with padding kernel/2, computed as a GEMM over an
// im2col matrix of shape (in·k·k) × (H'·W').
class Conv2D final : public Layer {
 public:
  Conv2D(int in, int out, int kernel, int stride)
      : in_(in), out_(out), k_(kernel), s_(stride), w_({out, in, kernel, kernel}), b_({out}) {
    if (in <= 0 || out <= 0 || kernel <= 0 || stride <= 0) {
      throw DomainError("conv2d sizes must be positive");
    }
  }
  json descriptor() const override {
    return {{"type", "conv2d"}, {"in", in_}, {"out", out_}, {"kernel", k_}, {"stride", s_}};
  }
  Shape output_shape(const Shape& s) const override {
    expect_rank(s, 3, "conv2d");
    if (s[0] != in_) {
      throw DimensionError("conv2d expects " + std::to_string(in_) + " channels, got " +
                           shape_string(s));
    }
    const int p = k_ / 2;
    const int h = (s[1] + 2 * p - k_) / s_ + 1;
    const int w = (s[2] + 2 * p - k_) / s_ + 1;
    if (h <= 0 || w <= 0) throw DimensionError("conv2d input too small: " + shape_string(s));
    return {out_, h, w};
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    const Shape os = output_shape(x.shape);
    Tensor col = im2col(x, os);
    const int rows = in_ * k_ * k_;
    const int n = os[1] * os[2];
    Tensor y(os);
    MatMap ym(y.data.data(), out_, n);
    ym.noalias() = ConstMatMap(w_.data.data(), out_, rows) * ConstMatMap(col.data.data(), rows, n);
    ym.colwise() += ConstVecMap(b_.data.data(), out_);
    if (cache) {
      cache->input = x;
      cache->saved = {std::move(col)};
    }
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor> grads) const override {
    const Shape& os = g.shape;
    const int rows = in_ * k_ * k_;
    const int n = os[1] * os[2];
    const ConstMatMap gm(g.data.data(), out_, n);
    const ConstMatMap col(c.saved[0].data.data(), rows, n);
    MatMap(grads[0].data.data(), out_, rows).noalias() += gm * col.transpose();
    VecMap(grads[1].data.data(), out_) += gm.rowwise().sum();
    RowMat dcol = ConstMatMap(w_.data.data(), out_, rows).transpose() * gm;
    return col2im(dcol, c.input.shape, os);
  }
  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  void initialize(std::mt19937_64& rng) override {
    glorot(w_, in_ * k_ * k_, out_ * k_ * k_, rng);
    b_.fill(0.0);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

 private:
  Tensor im2col(const Tensor& x, const Shape& os) const {
    const int H = x.shape[1], W = x.shape[2], oh = os[1], ow = os[2], p = k_ / 2;
    Tensor col({in_ * k_ * k_, oh * ow});
    std::size_t r = 0;
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, ++r) {
          double* dst = col.data.data() + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s_ + ky - p;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s_ + kx - p;
              dst[oy * ow + ox] = (iy < 0 || iy >= H || ix < 0 || ix >= W)
                                      ? 0.0
                                      : x.data[(static_cast<std::size_t>(c) * H + iy) * W + ix];
            }
          }
        }
    return col;
  }
  Tensor col2im(const RowMat& dcol, const Shape& is, const Shape& os) const {
    const int H = is[1], W = is[2], oh = os[1], ow = os[2], p = k_ / 2;
    Tensor dx(is);
    int r = 0;
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, ++r) {
          const double* src = dcol.data() + static_cast<std::size_t>(r) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s_ + ky - p;
            if (iy < 0 || iy >= H) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s_ + kx - p;
              if (ix < 0 || ix >= W) continue;
              dx.data[(static_cast<std::size_t>(c) * H + iy) * W + ix] += src[oy * ow + ox];
            }
          }
        }
    return dx;
  }

  int in_, out_, k_, s_;
  Tensor w_, b_;
};

// ---------------------------------------------------------------------------

class Upsample final : public Layer {
 public:
  explicit Upsample(int factor) : f_(factor) {
    if (factor <= 0) throw DomainError("upsample factor must be positive");
  }
  json descriptor() const override { return {{"type", "upsample"}, {"factor", f_}}; }
  Shape output_shape(const Shape& s) const override {
    expect_rank(s, 3, "upsample");
    return {s[0], s[1] * f_, s[2] * f_};
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    const Shape os = output_shape(x.shape);
    Tensor y(os);
    const int H = x.shape[1], W = x.shape[2];
    for (int c = 0; c < os[0]; ++c)
      for (int y0 = 0; y0 < os[1]; ++y0)
        for (int x0 = 0; x0 < os[2]; ++x0)
          y.data[(static_cast<std::size_t>(c) * os[1] + y0) * os[2] + x0] =
              x.data[(static_cast<std::size_t>(c) * H + y0 / f_) * W + x0 / f_];
    if (cache) cache->input.shape = x.shape;
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor>) const override {
    Tensor dx(c.input.shape);
    const int H = dx.shape[1], W = dx.shape[2];
    for (int ch = 0; ch < g.shape[0]; ++ch)
      for (int y0 = 0; y0 < g.shape[1]; ++y0)
        for (int x0 = 0; x0 < g.shape[2]; ++x0)
          dx.data[(static_cast<std::size_t>(ch) * H + y0 / f_) * W + x0 / f_] +=
              g.data[(static_cast<std::size_t>(ch) * g.shape[1] + y0) * g.shape[2] + x0];
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample>(*this); }

 private:
  int f_;
};

// ---------------------------------------------------------------------------

enum class Act { kRelu, kLeaky, kSigmoid, kTanh };

class Activation final : public Layer {
 public:
  Activation(Act a, double slope) : act_(a), slope_(slope) {}
  json descriptor() const override {
    switch (act_) {
      case Act::kRelu: return {{"type", "relu"}};
      case Act::kLeaky: return {{"type", "leaky_relu"}, {"slope", slope_}};
      case Act::kSigmoid: return {{"type", "sigmoid"}};
      case Act::kTanh: return {{"type", "tanh"}};
    }
    return {};
  }
  Shape output_shape(const Shape& s) const override { return s; }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    Tensor y = x;
    for (double& v : y.data) v = apply(v);
    if (cache) {
      cache->input = x;
      cache->saved = {y};
    }
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor>) const override {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= derivative(c.input[i], c.saved[0][i]);
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Activation>(*this); }

 private:
  double apply(double v) const {
    switch (act_) {
      case Act::kRelu: return v > 0 ? v : 0.0;
      case Act::kLeaky: return v > 0 ? v : slope_ * v;
      case Act::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
      case Act::kTanh: return std::tanh(v);
    }
    return v;
  }
  double derivative(double in, double out) const {
    switch (act_) {
      case Act::kRelu: return in > 0 ? 1.0 : 0.0;
      case Act::kLeaky: return in > 0 ? 1.0 : slope_;
      case Act::kSigmoid: return out * (1.0 - out);
      case Act::kTanh: return 1.0 - out * out;
    }
    return 1.0;
  }

  Act act_;
  double slope_;
};

// ---------------------------------------------------------------------------

// Shared per-point MLP over a (P, widths[0]) point set. Hidden layers use
// ReLU; the last layer is linear so a following max-pool sees signed features.
class PointMLP final : public Layer {
 public:
  explicit PointMLP(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw DomainError("point_mlp needs at least two widths");
    for (int w : widths_)
      if (w <= 0) throw DomainError("point_mlp widths must be positive");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      w_.emplace_back(Shape{widths_[l + 1], widths_[l]});
      b_.emplace_back(Shape{widths_[l + 1]});
    }
  }
  json descriptor() const override { return {{"type", "point_mlp"}, {"widths", widths_}}; }
  Shape output_shape(const Shape& s) const override {
    expect_rank(s, 2, "point_mlp");
    if (s[1] != widths_.front()) {
      throw DimensionError("point_mlp expects points of width " + std::to_string(widths_.front()) +
                           ", got " + shape_string(s));
    }
    return {s[0], widths_.back()};
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    output_shape(x.shape);
    const int P = x.shape[0];
    RowMat h = ConstMatMap(x.data.data(), P, widths_[0]);
    if (cache) {
      cache->input = x;
      cache->saved.clear();
    }
    const std::size_t L = w_.size();
    for (std::size_t l = 0; l < L; ++l) {
      RowMat z = h * ConstMatMap(w_[l].data.data(), widths_[l + 1], widths_[l]).transpose();
      z.rowwise() += ConstVecMap(b_[l].data.data(), widths_[l + 1]).transpose();
      if (cache) cache->saved.emplace_back(Shape{P, widths_[l + 1]}, std::vector<double>(z.data(), z.data() + z.size()));
      if (l + 1 < L) z = z.cwiseMax(0.0);
      h = std::move(z);
    }
    return Tensor({P, widths_.back()}, std::vector<double>(h.data(), h.data() + h.size()));
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor> grads) const override {
    const int P = c.input.shape[0];
    const std::size_t L = w_.size();
    RowMat d = ConstMatMap(g.data.data(), P, widths_.back());
    for (std::size_t l = L; l-- > 0;) {
      const ConstMatMap z(c.saved[l].data.data(), P, widths_[l + 1]);
      if (l + 1 < L) d = d.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      RowMat in;
      if (l == 0) {
        in = ConstMatMap(c.input.data.data(), P, widths_[0]);
      } else {
        in = ConstMatMap(c.saved[l - 1].data.data(), P, widths_[l]).cwiseMax(0.0);
      }
      MatMap(grads[2 * l].data.data(), widths_[l + 1], widths_[l]).noalias() += d.transpose() * in;
      VecMap(grads[2 * l + 1].data.data(), widths_[l + 1]) += d.colwise().sum().transpose();
      d = d * ConstMatMap(w_[l].data.data(), widths_[l + 1], widths_[l]);
    }
    return Tensor(c.input.shape, std::vector<double>(d.data(), d.data() + d.size()));
  }
  std::vector<Tensor*> params() override {
    std::vector<Tensor*> p;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      p.push_back(&w_[l]);
      p.push_back(&b_[l]);
    }
    return p;
  }
  void initialize(std::mt19937_64& rng) override {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      glorot(w_[l], widths_[l], widths_[l + 1], rng);
      b_[l].fill(0.0);
    }
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<PointMLP>(*this); }

 private:
  std::vector<int> widths_;
  std::vector<Tensor> w_, b_;
};

// ---------------------------------------------------------------------------

// Coordinate-wise max over points: (P, D) -> (D). Ties go to the lowest index.
class MaxPoolPoints final : public Layer {
 public:
  json descriptor() const override { return {{"type", "maxpool_points"}}; }
  Shape output_shape(const Shape& s) const override {
    expect_rank(s, 2, "maxpool_points");
    if (s[0] <= 0) throw DimensionError("maxpool_points needs at least one point");
    return {s[1]};
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    output_shape(x.shape);
    const int P = x.shape[0], D = x.shape[1];
    Tensor y({D});
    std::vector<int> arg(D, 0);
    for (int d = 0; d < D; ++d) {
      double best = x.data[d];
      for (int p = 1; p < P; ++p) {
        const double v = x.data[static_cast<std::size_t>(p) * D + d];
        if (v > best) {
          best = v;
          arg[d] = p;
        }
      }
      y.data[d] = best;
    }
    if (cache) {
      cache->input.shape = x.shape;
      cache->index = std::move(arg);
    }
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor>) const override {
    Tensor dx(c.input.shape);
    const int D = c.input.shape[1];
    for (int d = 0; d < D; ++d) dx.data[static_cast<std::size_t>(c.index[d]) * D + d] += g.data[d];
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolPoints>(*this); }
};

// ---------------------------------------------------------------------------

class Reshape final : public Layer {
 public:
  explicit Reshape(Shape shape) : shape_(std::move(shape)) {}
  json descriptor() const override { return {{"type", "reshape"}, {"shape", shape_}}; }
  Shape output_shape(const Shape& s) const override {
    if (numel(s) != numel(shape_)) {
      throw DimensionError("cannot reshape " + shape_string(s) + " to " + shape_string(shape_));
    }
    return shape_;
  }
  Tensor forward(const Tensor& x, LayerCache* cache) const override {
    Tensor y(output_shape(x.shape), x.data);
    if (cache) cache->input.shape = x.shape;
    return y;
  }
  Tensor backward(const LayerCache& c, const Tensor& g, std::span<Tensor>) const override {
    return Tensor(c.input.shape, g.data);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  Shape shape_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const json& d) {
  try {
    const std::string type = d.at("type").get<std::string>();
    if (type == "dense") return std::make_unique<Dense>(d.at("in").get<int>(), d.at("out").get<int>());
    if (type == "conv2d") {
      return std::make_unique<Conv2D>(d.at("in").get<int>(), d.at("out").get<int>(),
                                      d.value("kernel", 3), d.value("stride", 1));
    }
    if (type == "upsample") return std::make_unique<Upsample>(d.value("factor", 2));
    if (type == "relu") return std::make_unique<Activation>(Act::kRelu, 0.0);
    if (type == "leaky_relu") return std::make_unique<Activation>(Act::kLeaky, d.value("slope", 0.1));
    if (type == "sigmoid") return std::make_unique<Activation>(Act::kSigmoid, 0.0);
    if (type == "tanh") return std::make_unique<Activation>(Act::kTanh, 0.0);
    if (type == "point_mlp") return std::make_unique<PointMLP>(d.at("widths").get<std::vector<int>>());
    if (type == "maxpool_points") return std::make_unique<MaxPoolPoints>();
    if (type == "reshape") return std::make_unique<Reshape>(d.at("shape").get<Shape>());
    throw DomainError("unknown layer type '" + type + "'");
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed layer descriptor: ") + e.what());
  }
}

}  // namespace uvcloth::nn
