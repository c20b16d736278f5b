#pragma once

#include <array>
#include <vector>

#include "g2p/lineage.hpp"
#include "g2p/nn.hpp"

namespace g2p {

// out_i = sum_j Â_ij z_j over the leading (node) axis of z; with `transpose`,
// Â_ji is used instead. Elementwise over the trailing C x H x W block.
Tensor mix_nodes(const NormalizedAdjacency& adj, const Tensor& z, bool transpose = false);

// Two graph convolution layers, each σ(Â · Conv3x3(H)) with channel count preserved.
class GraphConvBlock {
 public:
  static constexpr int kLayers = 2;

  struct LayerTape {
    Tensor input;
    Tensor output;  // after the activation
  };
  using Tape = std::array<LayerTape, kLayers>;

  GraphConvBlock() = default;
  explicit GraphConvBlock(int channels, const std::string& name = "gcn");

  void init(Rng& rng);
  int channels() const { return channels_; }

  // h: N x C x H x W node feature maps; adj.size must equal N.
  Tensor layer_forward(const Tensor& h, const NormalizedAdjacency& adj, int layer,
                       LayerTape* tape = nullptr) const;
  Tensor forward(const Tensor& h, const NormalizedAdjacency& adj, Tape* tape = nullptr) const;

  Tensor layer_backward(const LayerTape& tape, const NormalizedAdjacency& adj, int layer,
                        const Tensor& dy, nn::Grads* grads, bool want_dx = true) const;
  Tensor backward(const Tape& tape, const NormalizedAdjacency& adj, const Tensor& dy,
                  nn::Grads* grads, bool want_dx = true) const;

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;

  // σ; identity is available for oracle tests.
  nn::Activation activation = nn::Activation::kReLU;
  std::array<nn::Conv2d, kLayers> convs;

 private:
  int channels_ = 0;
};

}  // namespace g2p
