#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "g2p/image_io.hpp"
#include "g2p/rng.hpp"

namespace g2p {

enum class BlendMode { kAlpha, kPerChannelAlpha };

BlendMode parse_blend_mode(const std::string& s);
std::string to_string(BlendMode m);

struct SynthConfig {
  int n_families = 8;
  int image_size = 64;
  std::uint64_t seed = 0;
  BlendMode blend_mode = BlendMode::kAlpha;

  void validate() const;
};

// Background colour plus one to three filled shapes (disc, rectangle, triangle).
RgbImage render_procedural(Rng& rng, int size);

// Per-pixel ratio * a + (1 - ratio) * b, rounded to nearest; one ratio per channel.
RgbImage blend(const RgbImage& a, const RgbImage& b, const std::array<double, 3>& ratios);

// Writes out_dir/images/*.png (seven per family) and out_dir/manifest.json.
// Blend ratios are drawn from U(0.25, 0.75) and not recorded anywhere.
std::filesystem::path generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace g2p
