#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace uvcloth::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Images are (C, H, W), point sets (P, D) and
/// vectors (N). Values are double internally; checkpoints store float32.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  /// Throws DimensionError when data.size() != numel(s).
  Tensor(Shape s, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  void fill(double v);
  void add(const Tensor& other);  // shapes must match
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;
};

}  // namespace uvcloth::nn
