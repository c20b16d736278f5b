#include "g2p/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace g2p {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

std::size_t Tensor::slice_size() const {
  if (shape_.empty()) throw ShapeError("slice of a rank-0 tensor");
  return data_.size() / static_cast<std::size_t>(std::max(shape_[0], 1));
}

std::span<float> Tensor::slice(int i) {
  const std::size_t n = slice_size();
  return std::span<float>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

std::span<const float> Tensor::slice(int i) const {
  const std::size_t n = slice_size();
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::vector<int> shape) {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("reshape changes element count: " + shape_string());
  }
  shape_ = std::move(shape);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.data_.size() != data_.size()) {
    throw ShapeError("tensor add: " + shape_string() + " vs " + other.shape_string());
  }
  std::transform(data_.begin(), data_.end(), other.data_.begin(), data_.begin(), std::plus<>());
  return *this;
}

Tensor& Tensor::operator*=(float s) {
  for (float& v : data_) v *= s;
  return *this;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  std::vector<int> shape{static_cast<int>(items.size())};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  Tensor out(shape);
  const std::size_t n = items[0].size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].same_shape(items[0])) throw ShapeError("stack: mismatched shapes");
    std::copy_n(items[i].data(), n, out.data() + i * n);
  }
  return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: size mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](float v) { return std::isfinite(v); });
}

}  // namespace g2p
