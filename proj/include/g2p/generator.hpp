#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "g2p/graph_conv.hpp"
#include "g2p/nn.hpp"

namespace g2p {

struct GeneratorConfig {
  int image_size = 64;
  int base_channels = 32;
  int n_downsample = 3;
  int n_resblocks = 4;
  int family_size = kFamilySlots;

  void validate() const;
  // Channel count of the node feature maps entering the graph convolution.
  int feature_channels() const { return base_channels << (n_downsample - 1); }
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

// conv -> instance norm -> ReLU, for either convolution flavour.
template <typename Conv>
struct ConvNormRelu {
  struct Tape {
    Tensor input;
    nn::InstanceNormCache norm;
    Tensor output;
  };

  Conv conv;

  Tensor forward(const Tensor& x, Tape* tape) const {
    nn::InstanceNormCache cache;
    Tensor y = nn::instance_norm(conv.forward(x), tape ? &cache : nullptr);
    nn::activate_inplace(y, nn::Activation::kReLU);
    if (tape != nullptr) {
      tape->input = x;
      tape->norm = std::move(cache);
      tape->output = y;
    }
    return y;
  }

  Tensor backward(const Tape& tape, const Tensor& dy, nn::Grads* grads, bool want_dx) const {
    const Tensor dn = nn::activation_backward(tape.output, dy, nn::Activation::kReLU);
    return conv.backward(tape.input, nn::instance_norm_backward(tape.norm, dn), grads, want_dx);
  }
};

// x + IN(conv_b(ReLU(IN(conv_a(x)))))
struct ResidualBlock {
  struct Tape {
    ConvNormRelu<nn::Conv2d>::Tape first;
    nn::InstanceNormCache second_norm;
  };

  ConvNormRelu<nn::Conv2d> first;
  nn::Conv2d second;

  Tensor forward(const Tensor& x, Tape* tape) const;
  Tensor backward(const Tape& tape, const Tensor& dy, nn::Grads* grads) const;
};

// Global generator: shared stride-2 front-end per node, graph convolution
// across nodes, then residual blocks and an upsampling back-end applied to the
// target node only.
class Generator {
 public:
  struct Tape {
    std::vector<ConvNormRelu<nn::Conv2d>::Tape> front;
    GraphConvBlock::Tape gcn;
    int target = 0;
    int nodes = 0;
    std::vector<ResidualBlock::Tape> res;
    std::vector<ConvNormRelu<nn::ConvTranspose2d>::Tape> back;
    Tensor head_input;
    Tensor output;  // [1, 3, S, S] after tanh
  };

  Generator() = default;
  explicit Generator(const GeneratorConfig& cfg);

  void init(Rng& rng);
  const GeneratorConfig& config() const { return cfg_; }

  // family_images: N x 3 x S x S with the target slot already noised.
  // Returns the 3 x S x S prediction for `target_index`.
  Tensor generate(const Tensor& family_images, const NormalizedAdjacency& adj, int target_index,
                  Tape* tape = nullptr) const;
  // Backpropagates d(output) (3 x S x S) into `grads`.
  void backward(const Tape& tape, const NormalizedAdjacency& adj, const Tensor& d_output,
                nn::Grads& grads) const;

  // Shared per-node encoder: N x 3 x S x S -> N x C x S/2^k x S/2^k.
  Tensor front_end(const Tensor& images, std::vector<ConvNormRelu<nn::Conv2d>::Tape>* tapes = nullptr) const;

  GraphConvBlock& gcn() { return gcn_; }
  const GraphConvBlock& gcn() const { return gcn_; }

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;

  // Parameter groups by stage, for gradient-flow diagnostics.
  enum class Group { kFrontEnd, kGraphConv, kResidual, kBackEnd };
  static Group group_of(const nn::Param& p);

 private:
  GeneratorConfig cfg_;
  std::vector<ConvNormRelu<nn::Conv2d>> front_;
  GraphConvBlock gcn_;
  std::vector<ResidualBlock> res_;
  std::vector<ConvNormRelu<nn::ConvTranspose2d>> back_;
  nn::Conv2d head_;
};

}  // namespace g2p
