#include "g2p/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "g2p/lineage.hpp"

namespace g2p {

namespace {

struct Colour {
  std::uint8_t r, g, b;
};

Colour random_colour(Rng& rng) {
  return {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
          static_cast<std::uint8_t>(rng.below(256))};
}

void put(RgbImage& img, int x, int y, Colour c) {
  img.at(x, y, 0) = c.r;
  img.at(x, y, 1) = c.g;
  img.at(x, y, 2) = c.b;
}

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

std::array<double, 3> draw_ratios(Rng& rng, BlendMode mode) {
  const double r = rng.uniform(0.25, 0.75);
  if (mode == BlendMode::kAlpha) return {r, r, r};
  return {r, rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)};
}

std::string family_prefix(int f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%04d", f);
  return buf;
}

}  // namespace

BlendMode parse_blend_mode(const std::string& s) {
  if (s == "alpha") return BlendMode::kAlpha;
  if (s == "per-channel-alpha") return BlendMode::kPerChannelAlpha;
  throw std::invalid_argument("unknown blend mode '" + s + "'");
}

std::string to_string(BlendMode m) {
  return m == BlendMode::kAlpha ? "alpha" : "per-channel-alpha";
}

void SynthConfig::validate() const {
  if (n_families < 1) throw std::invalid_argument("n_families must be >= 1");
  if (image_size != 32 && image_size != 64 && image_size != 128 && image_size != 256) {
    throw std::invalid_argument("image_size must be one of 32, 64, 128, 256");
  }
}

RgbImage render_procedural(Rng& rng, int size) {
  RgbImage img(size, size);
  const Colour bg = random_colour(rng);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) put(img, x, y, bg);
  }
  const int shapes = 1 + static_cast<int>(rng.below(3));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.below(3));
    const Colour c = random_colour(rng);
    const double cx = rng.uniform(0.15, 0.85) * size;
    const double cy = rng.uniform(0.15, 0.85) * size;
    const double scale = rng.uniform(0.1, 0.35) * size;
    const double aspect = rng.uniform(0.5, 1.5);
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    // Triangle vertices on a circle of radius `scale`.
    std::array<double, 6> tri{};
    for (int v = 0; v < 3; ++v) {
      const double a = angle + v * 2.0 * 3.14159265358979323846 / 3.0;
      tri[2 * v] = cx + scale * std::cos(a);
      tri[2 * v + 1] = cy + scale * std::sin(a);
    }
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        bool inside = false;
        if (kind == 0) {
          inside = (px - cx) * (px - cx) + (py - cy) * (py - cy) <= scale * scale;
        } else if (kind == 1) {
          inside = std::fabs(px - cx) <= scale * aspect && std::fabs(py - cy) <= scale / aspect;
        } else {
          const double e0 = edge(tri[0], tri[1], tri[2], tri[3], px, py);
          const double e1 = edge(tri[2], tri[3], tri[4], tri[5], px, py);
          const double e2 = edge(tri[4], tri[5], tri[0], tri[1], px, py);
          inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        }
        if (inside) put(img, x, y, c);
      }
    }
  }
  return img;
}

RgbImage blend(const RgbImage& a, const RgbImage& b, const std::array<double, 3>& ratios) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("blend: size mismatch");
  RgbImage out(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double r = ratios[i % 3];
    const double v = r * a.pixels[i] + (1.0 - r) * b.pixels[i];
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

std::filesystem::path generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");

  std::vector<LineageNode> nodes;
  for (int f = 0; f < cfg.n_families; ++f) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(f)));
    const std::string pre = family_prefix(f);
    auto emit = [&](const std::string& role, const RgbImage& img, std::vector<std::string> parents) {
      const std::string id = pre + "_" + role;
      const std::string rel = "images/" + id + ".png";
      write_png(out_dir / rel, img);
      nodes.push_back(LineageNode{id, rel, std::move(parents), std::string("synthetic"), std::nullopt});
    };

    const RgbImage gp11 = render_procedural(rng, cfg.image_size);
    const RgbImage gp12 = render_procedural(rng, cfg.image_size);
    const RgbImage gp21 = render_procedural(rng, cfg.image_size);
    const RgbImage gp22 = render_procedural(rng, cfg.image_size);
    const RgbImage p1 = blend(gp11, gp12, draw_ratios(rng, cfg.blend_mode));
    const RgbImage p2 = blend(gp21, gp22, draw_ratios(rng, cfg.blend_mode));
    const RgbImage child = blend(p1, p2, draw_ratios(rng, cfg.blend_mode));

    emit("gp11", gp11, {});
    emit("gp12", gp12, {});
    emit("gp21", gp21, {});
    emit("gp22", gp22, {});
    emit("p1", p1, {pre + "_gp11", pre + "_gp12"});
    emit("p2", p2, {pre + "_gp21", pre + "_gp22"});
    emit("child", child, {pre + "_p1", pre + "_p2"});
  }
  const LineageGraph graph = LineageGraph::build(std::move(nodes), out_dir);
  const fs::path manifest = out_dir / "manifest.json";
  write_manifest(graph, manifest);
  return manifest;
}

}  // namespace g2p
