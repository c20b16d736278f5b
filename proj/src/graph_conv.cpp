#include "g2p/graph_conv.hpp"

#include <cmath>
#include <string>

namespace g2p {

Tensor mix_nodes(const NormalizedAdjacency& adj, const Tensor& z, bool transpose) {
  if (z.rank() < 1 || z.dim(0) != adj.size) {
    throw ShapeError("graph conv: " + std::to_string(adj.size) + "-node adjacency vs features " +
                     z.shape_string());
  }
  const int n = adj.size;
  const std::size_t block = z.slice_size();
  Tensor out(z.shape());
  for (int i = 0; i < n; ++i) {
    float* dst = out.slice(i).data();
    for (int j = 0; j < n; ++j) {
      const auto a = static_cast<float>(transpose ? adj.hat(j, i) : adj.hat(i, j));
      if (a == 0.0f) continue;
      const float* src = z.slice(j).data();
      for (std::size_t k = 0; k < block; ++k) dst[k] += a * src[k];
    }
  }
  return out;
}

GraphConvBlock::GraphConvBlock(int channels, const std::string& name) : channels_(channels) {
  for (int l = 0; l < kLayers; ++l) {
    convs[l] = nn::Conv2d(name + ".conv" + std::to_string(l), channels, channels, 3, 1, 1);
  }
  nn::assign_slots(params());
}

void GraphConvBlock::init(Rng& rng) {
  for (auto& c : convs) c.init(rng, std::sqrt(2.0));
}

Tensor GraphConvBlock::layer_forward(const Tensor& h, const NormalizedAdjacency& adj, int layer,
                                     LayerTape* tape) const {
  if (layer < 0 || layer >= kLayers) throw std::out_of_range("graph conv layer index");
  if (h.rank() != 4 || h.dim(0) != adj.size) {
    throw ShapeError("graph conv: features " + h.shape_string() + " vs " + std::to_string(adj.size) +
                     "-node adjacency");
  }
  Tensor out = mix_nodes(adj, convs[layer].forward(h));
  nn::activate_inplace(out, activation);
  if (tape != nullptr) {
    tape->input = h;
    tape->output = out;
  }
  return out;
}

Tensor GraphConvBlock::forward(const Tensor& h, const NormalizedAdjacency& adj, Tape* tape) const {
  Tensor x = h;
  for (int l = 0; l < kLayers; ++l) x = layer_forward(x, adj, l, tape ? &(*tape)[l] : nullptr);
  return x;
}

Tensor GraphConvBlock::layer_backward(const LayerTape& tape, const NormalizedAdjacency& adj, int layer,
                                      const Tensor& dy, nn::Grads* grads, bool want_dx) const {
  const Tensor dmix = nn::activation_backward(tape.output, dy, activation);
  const Tensor dz = mix_nodes(adj, dmix, /*transpose=*/true);
  return convs[layer].backward(tape.input, dz, grads, want_dx);
}

Tensor GraphConvBlock::backward(const Tape& tape, const NormalizedAdjacency& adj, const Tensor& dy,
                                nn::Grads* grads, bool want_dx) const {
  Tensor g = layer_backward(tape[1], adj, 1, dy, grads, true);
  return layer_backward(tape[0], adj, 0, g, grads, want_dx);
}

std::vector<nn::Param*> GraphConvBlock::params() {
  std::vector<nn::Param*> out;
  for (auto& c : convs) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<const nn::Param*> GraphConvBlock::params() const {
  std::vector<const nn::Param*> out;
  for (const auto& c : convs) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

}  // namespace g2p
