#include "g2p/generator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace g2p {

namespace {

const double kReluGain = std::sqrt(2.0);

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void GeneratorConfig::validate() const {
  if (image_size < 1 || base_channels < 1 || n_downsample < 1 || n_resblocks < 1 || family_size < 1) {
    throw std::invalid_argument("generator config: all counts must be >= 1");
  }
  if (image_size % (1 << n_downsample) != 0) {
    throw std::invalid_argument("generator config: image_size must be divisible by 2^n_downsample");
  }
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size},     {"base_channels", c.base_channels},
                     {"n_downsample", c.n_downsample}, {"n_resblocks", c.n_resblocks},
                     {"family_size", c.family_size}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.image_size = j.value("image_size", c.image_size);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_downsample = j.value("n_downsample", c.n_downsample);
  c.n_resblocks = j.value("n_resblocks", c.n_resblocks);
  c.family_size = j.value("family_size", c.family_size);
}

Tensor ResidualBlock::forward(const Tensor& x, Tape* tape) const {
  const Tensor h = first.forward(x, tape ? &tape->first : nullptr);
  Tensor y = nn::instance_norm(second.forward(h), tape ? &tape->second_norm : nullptr);
  y += x;
  return y;
}

Tensor ResidualBlock::backward(const Tape& tape, const Tensor& dy, nn::Grads* grads) const {
  const Tensor dz = nn::instance_norm_backward(tape.second_norm, dy);
  const Tensor dh = second.backward(tape.first.output, dz, grads, true);
  Tensor dx = first.backward(tape.first, dh, grads, true);
  dx += dy;
  return dx;
}

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int channels = 3;
  for (int i = 0; i < cfg_.n_downsample; ++i) {
    const int out = cfg_.base_channels << i;
    front_.push_back({nn::Conv2d("front" + std::to_string(i), channels, out, 3, 2, 1)});
    channels = out;
  }
  gcn_ = GraphConvBlock(channels, "gcn");
  for (int r = 0; r < cfg_.n_resblocks; ++r) {
    const std::string name = "res" + std::to_string(r);
    res_.push_back({{nn::Conv2d(name + ".a", channels, channels, 3, 1, 1)},
                    nn::Conv2d(name + ".b", channels, channels, 3, 1, 1)});
  }
  // Mirror of the front-end; the last upsampling stage stays at base width.
  for (int i = cfg_.n_downsample - 1; i >= 0; --i) {
    const int out = i > 0 ? cfg_.base_channels << (i - 1) : cfg_.base_channels;
    back_.push_back({nn::ConvTranspose2d("back" + std::to_string(cfg_.n_downsample - 1 - i), channels,
                                         out, 3, 2, 1, 1)});
    channels = out;
  }
  head_ = nn::Conv2d("head", channels, 3, 3, 1, 1);
  nn::assign_slots(params());
}

void Generator::init(Rng& rng) {
  for (auto& f : front_) f.conv.init(rng, kReluGain);
  gcn_.init(rng);
  for (auto& r : res_) {
    r.first.conv.init(rng, kReluGain);
    r.second.init(rng, 1.0);
  }
  for (auto& b : back_) b.conv.init(rng, kReluGain);
  head_.init(rng, 1.0);
}

Tensor Generator::front_end(const Tensor& images,
                            std::vector<ConvNormRelu<nn::Conv2d>::Tape>* tapes) const {
  if (tapes != nullptr) tapes->assign(front_.size(), {});
  Tensor x = images;
  for (std::size_t i = 0; i < front_.size(); ++i) x = front_[i].forward(x, tapes ? &(*tapes)[i] : nullptr);
  return x;
}

Tensor Generator::generate(const Tensor& family_images, const NormalizedAdjacency& adj,
                           int target_index, Tape* tape) const {
  const int s = cfg_.image_size;
  if (family_images.rank() != 4 || family_images.dim(1) != 3 || family_images.dim(2) != s ||
      family_images.dim(3) != s) {
    throw ShapeError("generate: family images " + family_images.shape_string() + ", expected Nx3x" +
                     std::to_string(s) + "x" + std::to_string(s));
  }
  const int n = family_images.dim(0);
  if (adj.size != n) throw ShapeError("generate: adjacency size does not match family size");
  if (target_index < 0 || target_index >= n) throw std::out_of_range("generate: target_index out of range");

  const Tensor features = front_end(family_images, tape ? &tape->front : nullptr);
  const Tensor mixed = gcn_.forward(features, adj, tape ? &tape->gcn : nullptr);

  std::vector<int> one{1};
  one.insert(one.end(), mixed.shape().begin() + 1, mixed.shape().end());
  Tensor x(one);
  const auto src = mixed.slice(target_index);
  std::copy(src.begin(), src.end(), x.data());

  if (tape != nullptr) {
    tape->target = target_index;
    tape->nodes = n;
    tape->res.assign(res_.size(), {});
    tape->back.assign(back_.size(), {});
  }
  for (std::size_t r = 0; r < res_.size(); ++r) x = res_[r].forward(x, tape ? &tape->res[r] : nullptr);
  for (std::size_t b = 0; b < back_.size(); ++b) x = back_[b].forward(x, tape ? &tape->back[b] : nullptr);
  if (tape != nullptr) tape->head_input = x;
  Tensor out = head_.forward(x);
  nn::activate_inplace(out, nn::Activation::kTanh);
  if (tape != nullptr) tape->output = out;
  out.reshape({3, s, s});
  return out;
}

void Generator::backward(const Tape& tape, const NormalizedAdjacency& adj, const Tensor& d_output,
                         nn::Grads& grads) const {
  Tensor d = d_output;
  d.reshape(tape.output.shape());
  d = nn::activation_backward(tape.output, d, nn::Activation::kTanh);
  d = head_.backward(tape.head_input, d, &grads, true);
  for (std::size_t b = back_.size(); b-- > 0;) d = back_[b].backward(tape.back[b], d, &grads, true);
  for (std::size_t r = res_.size(); r-- > 0;) d = res_[r].backward(tape.res[r], d, &grads);

  std::vector<int> shape{tape.nodes};
  shape.insert(shape.end(), d.shape().begin() + 1, d.shape().end());
  Tensor d_mixed(shape);
  std::copy(d.values().begin(), d.values().end(), d_mixed.slice(tape.target).begin());

  d = gcn_.backward(tape.gcn, adj, d_mixed, &grads, true);
  for (std::size_t i = front_.size(); i-- > 0;) d = front_[i].backward(tape.front[i], d, &grads, i > 0);
}

std::vector<nn::Param*> Generator::params() {
  std::vector<nn::Param*> out;
  auto add = [&](auto& conv) {
    out.push_back(&conv.weight);
    out.push_back(&conv.bias);
  };
  for (auto& f : front_) add(f.conv);
  for (nn::Param* p : gcn_.params()) out.push_back(p);
  for (auto& r : res_) {
    add(r.first.conv);
    add(r.second);
  }
  for (auto& b : back_) add(b.conv);
  add(head_);
  return out;
}

std::vector<const nn::Param*> Generator::params() const {
  auto mut = const_cast<Generator*>(this)->params();
  return {mut.begin(), mut.end()};
}

Generator::Group Generator::group_of(const nn::Param& p) {
  if (starts_with(p.name, "front")) return Group::kFrontEnd;
  if (starts_with(p.name, "gcn")) return Group::kGraphConv;
  if (starts_with(p.name, "res")) return Group::kResidual;
  return Group::kBackEnd;
}

}  // namespace g2p
