#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "g2p/tensor.hpp"

namespace g2p {

// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

// Gray, palette and alpha inputs are converted to 8-bit RGB.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

RgbImage resize(const RgbImage& image, int size);
// [3, size, size] tensor in [-1, 1]; resizes as needed.
Tensor image_to_tensor(const RgbImage& image, int size);
// Inverse mapping of a [3, S, S] (or [1, 3, S, S]) tensor; values are clamped.
RgbImage tensor_to_image(const Tensor& t);
// Loads a square PNG and converts it to a [3, size, size] tensor.
Tensor load_image_tensor(const std::filesystem::path& path, int size);

}  // namespace g2p
