#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "g2p/lineage.hpp"
#include "g2p/nn.hpp"

namespace g2p {

struct DiscriminatorConfig {
  int n_scales = 2;
  int base_channels = 32;
  int n_layers = 4;  // stride-2 convolutions per scale, the last emitting the patch map
  int family_size = kFamilySlots;

  void validate() const;
  int input_channels() const { return 3 * (family_size + 1); }
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

struct ScaleOutput {
  Tensor patch;                 // [1, 1, h, w]
  std::vector<Tensor> features;  // activations of every layer before the patch layer
};

// Multi-scale PatchGAN over the channel concatenation of all family images and
// the candidate target. Scale k sees the input average-pooled k times by 2x2.
class MultiScaleDiscriminator {
 public:
  struct Tape {
    std::vector<Tensor> scale_inputs;
    std::vector<ScaleOutput> outputs;
  };

  MultiScaleDiscriminator() = default;
  explicit MultiScaleDiscriminator(const DiscriminatorConfig& cfg);

  void init(Rng& rng);
  const DiscriminatorConfig& config() const { return cfg_; }

  // family_images: N x 3 x S x S; candidate: 3 x S x S.
  std::vector<ScaleOutput> discriminate(const Tensor& family_images, const Tensor& candidate,
                                        Tape* tape = nullptr) const;
  // Runs the stacks on an already concatenated [1, 3(N+1), S, S] input.
  std::vector<ScaleOutput> forward(const Tensor& input, Tape* tape = nullptr) const;

  // Gradients of a loss w.r.t. each scale's patch map and features (empty
  // feature gradients are treated as zero). Parameter gradients go to `grads`
  // when non-null. Returns d(candidate) as 3 x S x S when `want_candidate_grad`.
  Tensor backward(const Tape& tape, const std::vector<ScaleOutput>& d_outputs, nn::Grads* grads,
                  bool want_candidate_grad) const;

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<std::vector<nn::Conv2d>> stacks_;
};

Tensor concat_family(const Tensor& family_images, const Tensor& candidate);

}  // namespace g2p
