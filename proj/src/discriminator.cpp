#include "g2p/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace g2p {

void DiscriminatorConfig::validate() const {
  if (n_scales < 1 || base_channels < 1 || n_layers < 2 || family_size < 1) {
    throw std::invalid_argument("discriminator config: invalid counts");
  }
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = nlohmann::json{{"n_scales", c.n_scales},
                     {"base_channels", c.base_channels},
                     {"n_layers", c.n_layers},
                     {"family_size", c.family_size}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c.n_scales = j.value("n_scales", c.n_scales);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.family_size = j.value("family_size", c.family_size);
}

Tensor concat_family(const Tensor& family_images, const Tensor& candidate) {
  if (family_images.rank() != 4 || family_images.dim(1) != 3) {
    throw ShapeError("discriminate: family images " + family_images.shape_string());
  }
  const int n = family_images.dim(0), s = family_images.dim(2), w = family_images.dim(3);
  if (candidate.size() != static_cast<std::size_t>(3) * s * w) {
    throw ShapeError("discriminate: candidate " + candidate.shape_string() + " vs family " +
                     family_images.shape_string());
  }
  Tensor out({1, 3 * (n + 1), s, w});
  std::copy(family_images.values().begin(), family_images.values().end(), out.data());
  std::copy(candidate.values().begin(), candidate.values().end(), out.data() + family_images.size());
  return out;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int s = 0; s < cfg_.n_scales; ++s) {
    std::vector<nn::Conv2d> stack;
    int channels = cfg_.input_channels();
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const bool last = l == cfg_.n_layers - 1;
      const int out = last ? 1 : cfg_.base_channels << std::min(l, 3);
      stack.emplace_back("disc" + std::to_string(s) + ".conv" + std::to_string(l), channels, out, 4, 2, 1);
      channels = out;
    }
    stacks_.push_back(std::move(stack));
  }
  nn::assign_slots(params());
}

void MultiScaleDiscriminator::init(Rng& rng) {
  const double leaky_gain = std::sqrt(2.0 / (1.0 + nn::kLeakySlope * nn::kLeakySlope));
  for (auto& stack : stacks_) {
    for (std::size_t l = 0; l < stack.size(); ++l) stack[l].init(rng, l + 1 < stack.size() ? leaky_gain : 1.0);
  }
}

std::vector<ScaleOutput> MultiScaleDiscriminator::discriminate(const Tensor& family_images,
                                                               const Tensor& candidate, Tape* tape) const {
  if (family_images.dim(0) != cfg_.family_size) {
    throw ShapeError("discriminate: expected " + std::to_string(cfg_.family_size) + " family images, got " +
                     family_images.shape_string());
  }
  return forward(concat_family(family_images, candidate), tape);
}

std::vector<ScaleOutput> MultiScaleDiscriminator::forward(const Tensor& input, Tape* tape) const {
  if (input.rank() != 4 || input.dim(1) != cfg_.input_channels()) {
    throw ShapeError("discriminator input " + input.shape_string());
  }
  std::vector<ScaleOutput> outputs;
  if (tape != nullptr) tape->scale_inputs.clear();
  Tensor x = input;
  for (int s = 0; s < cfg_.n_scales; ++s) {
    if (s > 0) x = nn::avg_pool2(x);
    if (tape != nullptr) tape->scale_inputs.push_back(x);
    ScaleOutput out;
    Tensor h = x;
    const auto& stack = stacks_[s];
    for (std::size_t l = 0; l < stack.size(); ++l) {
      h = stack[l].forward(h);
      if (l + 1 < stack.size()) {
        nn::activate_inplace(h, nn::Activation::kLeakyReLU);
        out.features.push_back(h);
      }
    }
    out.patch = std::move(h);
    outputs.push_back(std::move(out));
  }
  if (tape != nullptr) tape->outputs = outputs;
  return outputs;
}

Tensor MultiScaleDiscriminator::backward(const Tape& tape, const std::vector<ScaleOutput>& d_outputs,
                                         nn::Grads* grads, bool want_candidate_grad) const {
  if (d_outputs.size() != stacks_.size()) throw ShapeError("discriminator backward: scale count");
  Tensor d_next;  // gradient flowing into scale s from scale s + 1
  for (int s = cfg_.n_scales - 1; s >= 0; --s) {
    const auto& stack = stacks_[s];
    const ScaleOutput& fwd = tape.outputs[s];
    const ScaleOutput& dout = d_outputs[s];
    Tensor d = dout.patch.empty() ? Tensor(fwd.patch.shape()) : dout.patch;
    const bool need_input = want_candidate_grad;
    for (std::size_t l = stack.size(); l-- > 0;) {
      const Tensor& input = l == 0 ? tape.scale_inputs[s] : fwd.features[l - 1];
      d = stack[l].backward(input, d, grads, l > 0 || need_input);
      if (l == 0) break;
      if (l - 1 < dout.features.size() && !dout.features[l - 1].empty()) d += dout.features[l - 1];
      d = nn::activation_backward(fwd.features[l - 1], d, nn::Activation::kLeakyReLU);
    }
    if (!need_input) continue;
    if (!d_next.empty()) d += nn::avg_pool2_backward(d_next);
    d_next = std::move(d);
  }
  if (!want_candidate_grad) return {};
  const int s = d_next.dim(2), w = d_next.dim(3);
  Tensor d_candidate({3, s, w});
  const std::size_t plane = static_cast<std::size_t>(s) * w;
  const std::size_t offset = static_cast<std::size_t>(d_next.dim(1) - 3) * plane;
  std::copy_n(d_next.data() + offset, 3 * plane, d_candidate.data());
  return d_candidate;
}

std::vector<nn::Param*> MultiScaleDiscriminator::params() {
  std::vector<nn::Param*> out;
  for (auto& stack : stacks_) {
    for (auto& c : stack) {
      out.push_back(&c.weight);
      out.push_back(&c.bias);
    }
  }
  return out;
}

std::vector<const nn::Param*> MultiScaleDiscriminator::params() const {
  auto mut = const_cast<MultiScaleDiscriminator*>(this)->params();
  return {mut.begin(), mut.end()};
}

}  // namespace g2p
