#include "g2p/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace g2p {

RgbImage read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
    throw std::runtime_error("cannot read image " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr) == 0) {
    png_image_free(&png);
    throw std::runtime_error("cannot decode image " + path.string() + ": " + png.message);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr) == 0) {
    throw std::runtime_error("cannot write image " + path.string() + ": " + png.message);
  }
}

RgbImage resize(const RgbImage& image, int size) {
  if (image.width == size && image.height == size) return image;
  RgbImage out(size, size);
  if (image.width % size == 0 && image.height % size == 0) {
    // Integer downscale: box average.
    const int fx = image.width / size, fy = image.height / size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        for (int c = 0; c < 3; ++c) {
          int sum = 0;
          for (int dy = 0; dy < fy; ++dy) {
            for (int dx = 0; dx < fx; ++dx) sum += image.at(x * fx + dx, y * fy + dy, c);
          }
          const int count = fx * fy;
          out.at(x, y, c) = static_cast<std::uint8_t>((sum + count / 2) / count);
        }
      }
    }
    return out;
  }
  // Bilinear with pixel-centre alignment.
  const double sx = static_cast<double>(image.width) / size;
  const double sy = static_cast<double>(image.height) / size;
  for (int y = 0; y < size; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c)) +
                         wy * ((1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Tensor image_to_tensor(const RgbImage& image, int size) {
  const RgbImage r = resize(image, size);
  Tensor t({3, size, size});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        t[(static_cast<std::size_t>(c) * size + y) * size + x] = r.at(x, y, c) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

RgbImage tensor_to_image(const Tensor& t) {
  const int off = t.rank() - 3;
  if (off < 0 || t.dim(off) != 3) throw ShapeError("tensor_to_image: expected [3,H,W], got " + t.shape_string());
  const int h = t.dim(off + 1), w = t.dim(off + 2);
  RgbImage img(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float v = std::clamp(t[(static_cast<std::size_t>(c) * h + y) * w + x], -1.0f, 1.0f);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
    }
  }
  return img;
}

Tensor load_image_tensor(const std::filesystem::path& path, int size) {
  const RgbImage img = read_png(path);
  if (img.width != img.height) {
    throw std::runtime_error(path.string() + ": image must be square, got " + std::to_string(img.width) +
                             "x" + std::to_string(img.height));
  }
  return image_to_tensor(img, size);
}

}  // namespace g2p
