#pragma once

// Minimal layer toolkit with hand-written backward passes. Layers hold their
// parameters; activations needed for backward are kept by the caller, which
// lets one network instance serve many forward passes at once.

#include <string>
#include <vector>

#include "g2p/rng.hpp"
#include "g2p/tensor.hpp"

namespace g2p::nn {

struct Param {
  std::string name;
  Tensor value;
  std::size_t slot = 0;  // index into the owning network's Grads
};

// Gradient buffers aligned with a network's parameter list.
class Grads {
 public:
  Grads() = default;
  explicit Grads(const std::vector<const Param*>& params);
  explicit Grads(const std::vector<Param*>& params)
      : Grads(std::vector<const Param*>(params.begin(), params.end())) {}

  Tensor& operator[](const Param& p) { return buffers_.at(p.slot); }
  const Tensor& operator[](const Param& p) const { return buffers_.at(p.slot); }
  std::vector<Tensor>& buffers() { return buffers_; }
  const std::vector<Tensor>& buffers() const { return buffers_; }
  void zero();
  Grads& operator+=(const Grads& other);
  Grads& operator*=(float s);

 private:
  std::vector<Tensor> buffers_;
};

// Assigns consecutive slots in list order.
void assign_slots(const std::vector<Param*>& params);

enum class Activation { kIdentity, kReLU, kLeakyReLU, kTanh };

constexpr float kLeakySlope = 0.2f;

Tensor activate(const Tensor& x, Activation act);
void activate_inplace(Tensor& x, Activation act);
// Gradient through an activation, expressed in terms of its output `y`.
Tensor activation_backward(const Tensor& y, const Tensor& dy, Activation act);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  // Kaiming-style fan-in scaling; biases start at zero.
  void init(Rng& rng, double gain);

  Tensor forward(const Tensor& x) const;
  // Accumulates parameter gradients into `grads` when non-null; returns dx when
  // `want_dx` (otherwise an empty tensor).
  Tensor backward(const Tensor& x, const Tensor& dy, Grads* grads, bool want_dx) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_extent(int input_extent) const {
    return (input_extent + 2 * pad_ - k_) / stride_ + 1;
  }

  Param weight;  // [out, in*k*k]
  Param bias;    // [out]

 private:
  int in_ = 0, out_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
};

// Transposed convolution with PyTorch geometry:
// out = (in - 1) * stride - 2 * padding + kernel + output_padding.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int padding, int output_padding);

  void init(Rng& rng, double gain);
  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy, Grads* grads, bool want_dx) const;

  int output_extent(int input_extent) const {
    return (input_extent - 1) * stride_ - 2 * pad_ + k_ + out_pad_;
  }

  Param weight;  // [in, out*k*k]
  Param bias;    // [out]

 private:
  int in_ = 0, out_ = 0, k_ = 0, stride_ = 1, pad_ = 0, out_pad_ = 0;
};

// Per-sample, per-channel normalization without affine parameters.
struct InstanceNormCache {
  Tensor y;
  std::vector<float> inv_std;
};
constexpr float kNormEps = 1e-5f;
Tensor instance_norm(const Tensor& x, InstanceNormCache* cache);
Tensor instance_norm_backward(const InstanceNormCache& cache, const Tensor& dy);

// 2x2 average pooling with stride 2 (spatial extents must be even).
Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& dy);

}  // namespace g2p::nn
