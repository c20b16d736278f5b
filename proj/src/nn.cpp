#include "g2p/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace g2p::nn {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

struct Geometry {
  int channels, height, width;  // image side
  int k, stride, pad;
  int out_h, out_w;              // patch grid
};

// Unfolds image `b` of a batch into columns [b*P, (b+1)*P) of `col`, which has
// `total_cols` columns and rows ordered (channel, ky, kx).
void im2col(const float* img, const Geometry& g, float* col, std::size_t total_cols,
            std::size_t col_offset) {
  const int p = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const float* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(c) * g.k + ky) * g.k + kx;
        float* dst = col + row * total_cols + col_offset;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* line = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(line, g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            line[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
  (void)p;
}

// Adjoint of im2col: scatters-and-adds columns back into image `img`.
void col2im(const float* col, const Geometry& g, std::size_t total_cols, std::size_t col_offset,
            float* img) {
  for (int c = 0; c < g.channels; ++c) {
    float* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(c) * g.k + ky) * g.k + kx;
        const float* src = col + row * total_cols + col_offset;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const float* line = src + static_cast<std::size_t>(oy) * g.out_w;
          float* dst = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += line[ox];
          }
        }
      }
    }
  }
}

// [B, C, P] <-> [C, B*P] layout shuffles.
MatR gather_channels_major(const Tensor& x) {
  const int b = x.dim(0), c = x.dim(1);
  const std::size_t p = x.slice_size() / static_cast<std::size_t>(c);
  MatR m(c, static_cast<Eigen::Index>(b * p));
  for (int n = 0; n < b; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      std::copy_n(x.data() + (static_cast<std::size_t>(n) * c + ch) * p, p,
                  m.data() + static_cast<std::size_t>(ch) * b * p + n * p);
    }
  }
  return m;
}

void scatter_channels_major(const MatR& m, Tensor& x) {
  const int b = x.dim(0), c = x.dim(1);
  const std::size_t p = x.slice_size() / static_cast<std::size_t>(c);
  for (int n = 0; n < b; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      std::copy_n(m.data() + static_cast<std::size_t>(ch) * b * p + n * p, p,
                  x.data() + (static_cast<std::size_t>(n) * c + ch) * p);
    }
  }
}

void require_rank4(const Tensor& x, const char* who) {
  if (x.rank() != 4) throw ShapeError(std::string(who) + ": expected rank-4 input, got " + x.shape_string());
}

void init_normal(Tensor& t, Rng& rng, double stddev) {
  for (float& v : t.values()) v = static_cast<float>(rng.normal() * stddev);
}

}  // namespace

Grads::Grads(const std::vector<const Param*>& params) {
  buffers_.reserve(params.size());
  for (const Param* p : params) buffers_.emplace_back(p->value.shape());
}

void Grads::zero() {
  for (Tensor& t : buffers_) t.fill(0.0f);
}

Grads& Grads::operator+=(const Grads& other) {
  for (std::size_t i = 0; i < buffers_.size(); ++i) buffers_[i] += other.buffers_[i];
  return *this;
}

Grads& Grads::operator*=(float s) {
  for (Tensor& t : buffers_) t *= s;
  return *this;
}

void assign_slots(const std::vector<Param*>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->slot = i;
}

Tensor activate(const Tensor& x, Activation act) {
  Tensor y = x;
  activate_inplace(y, act);
  return y;
}

void activate_inplace(Tensor& x, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return;
    case Activation::kReLU:
      for (float& v : x.values()) v = v > 0.0f ? v : 0.0f;
      return;
    case Activation::kLeakyReLU:
      for (float& v : x.values()) v = v > 0.0f ? v : kLeakySlope * v;
      return;
    case Activation::kTanh:
      for (float& v : x.values()) v = std::tanh(v);
      return;
  }
}

Tensor activation_backward(const Tensor& y, const Tensor& dy, Activation act) {
  if (y.size() != dy.size()) throw ShapeError("activation_backward: size mismatch");
  Tensor dx = dy;
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kReLU:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = y[i] > 0.0f ? dx[i] : 0.0f;
      break;
    case Activation::kLeakyReLU:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = y[i] > 0.0f ? dx[i] : kLeakySlope * dx[i];
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0f - y[i] * y[i];
      break;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  weight = Param{name + ".weight", Tensor({out_, in_ * k_ * k_})};
  bias = Param{name + ".bias", Tensor({out_})};
}

void Conv2d::init(Rng& rng, double gain) {
  init_normal(weight.value, rng, gain / std::sqrt(static_cast<double>(in_ * k_ * k_)));
  bias.value.fill(0.0f);
}

Tensor Conv2d::forward(const Tensor& x) const {
  require_rank4(x, "Conv2d");
  if (x.dim(1) != in_) {
    throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " input channels, got " +
                     x.shape_string());
  }
  const int b = x.dim(0);
  const Geometry g{in_, x.dim(2), x.dim(3), k_, stride_, pad_, output_extent(x.dim(2)),
                   output_extent(x.dim(3))};
  const std::size_t p = static_cast<std::size_t>(g.out_h) * g.out_w;
  const auto kk = static_cast<Eigen::Index>(static_cast<std::size_t>(in_) * k_ * k_);
  const auto cols = static_cast<Eigen::Index>(p);
  // One product per sample, so a sample's output never depends on its batch.
  MatR col(kk, cols);
  Tensor out({b, out_, g.out_h, g.out_w});
  for (int n = 0; n < b; ++n) {
    im2col(x.slice(n).data(), g, col.data(), p, 0);
    MapR y(out.slice(n).data(), out_, cols);
    y.noalias() = CMapR(weight.value.data(), out_, kk) * col;
    for (int o = 0; o < out_; ++o) y.row(o).array() += bias.value[o];
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy, Grads* grads, bool want_dx) const {
  const int b = x.dim(0);
  const Geometry g{in_, x.dim(2), x.dim(3), k_, stride_, pad_, output_extent(x.dim(2)),
                   output_extent(x.dim(3))};
  if (dy.rank() != 4 || dy.dim(0) != b || dy.dim(1) != out_ || dy.dim(2) != g.out_h ||
      dy.dim(3) != g.out_w) {
    throw ShapeError(weight.name + ": gradient shape " + dy.shape_string());
  }
  const std::size_t p = static_cast<std::size_t>(g.out_h) * g.out_w;
  const auto kk = static_cast<Eigen::Index>(static_cast<std::size_t>(in_) * k_ * k_);
  const MatR dym = gather_channels_major(dy);

  if (grads != nullptr) {
    MatR col(kk, static_cast<Eigen::Index>(b * p));
    for (int n = 0; n < b; ++n) im2col(x.slice(n).data(), g, col.data(), b * p, n * p);
    MapR(( *grads)[weight].data(), out_, kk).noalias() += dym * col.transpose();
    Tensor& db = (*grads)[bias];
    for (int o = 0; o < out_; ++o) db[o] += dym.row(o).sum();
  }
  if (!want_dx) return {};

  MatR dcol(kk, static_cast<Eigen::Index>(b * p));
  dcol.noalias() = CMapR(weight.value.data(), out_, kk).transpose() * dym;
  Tensor dx(x.shape());
  for (int n = 0; n < b; ++n) col2im(dcol.data(), g, b * p, n * p, dx.slice(n).data());
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d
//
// Forward is the adjoint of a strided convolution whose "image" is the output
// and whose patch grid is the input.

ConvTranspose2d::ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel,
                                 int stride, int padding, int output_padding)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      out_pad_(output_padding) {
  weight = Param{name + ".weight", Tensor({in_, out_ * k_ * k_})};
  bias = Param{name + ".bias", Tensor({out_})};
}

void ConvTranspose2d::init(Rng& rng, double gain) {
  const double fan_in = static_cast<double>(in_ * k_ * k_) / (stride_ * stride_);
  init_normal(weight.value, rng, gain / std::sqrt(fan_in));
  bias.value.fill(0.0f);
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  require_rank4(x, "ConvTranspose2d");
  if (x.dim(1) != in_) throw ShapeError(weight.name + ": input " + x.shape_string());
  const int b = x.dim(0);
  const int oh = output_extent(x.dim(2)), ow = output_extent(x.dim(3));
  const Geometry g{out_, oh, ow, k_, stride_, pad_, x.dim(2), x.dim(3)};
  const std::size_t p = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const auto kk = static_cast<Eigen::Index>(static_cast<std::size_t>(out_) * k_ * k_);

  const MatR xm = gather_channels_major(x);
  MatR col(kk, static_cast<Eigen::Index>(b * p));
  col.noalias() = CMapR(weight.value.data(), in_, kk).transpose() * xm;

  Tensor out({b, out_, oh, ow});
  for (int n = 0; n < b; ++n) col2im(col.data(), g, b * p, n * p, out.slice(n).data());
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int n = 0; n < b; ++n) {
    for (int o = 0; o < out_; ++o) {
      float* dst = out.slice(n).data() + o * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += bias.value[o];
    }
  }
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& x, const Tensor& dy, Grads* grads,
                                 bool want_dx) const {
  const int b = x.dim(0);
  const int oh = output_extent(x.dim(2)), ow = output_extent(x.dim(3));
  if (dy.rank() != 4 || dy.dim(0) != b || dy.dim(1) != out_ || dy.dim(2) != oh || dy.dim(3) != ow) {
    throw ShapeError(weight.name + ": gradient shape " + dy.shape_string());
  }
  const Geometry g{out_, oh, ow, k_, stride_, pad_, x.dim(2), x.dim(3)};
  const std::size_t p = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const auto kk = static_cast<Eigen::Index>(static_cast<std::size_t>(out_) * k_ * k_);

  MatR dcol(kk, static_cast<Eigen::Index>(b * p));
  for (int n = 0; n < b; ++n) im2col(dy.slice(n).data(), g, dcol.data(), b * p, n * p);

  if (grads != nullptr) {
    const MatR xm = gather_channels_major(x);
    MapR((*grads)[weight].data(), in_, kk).noalias() += xm * dcol.transpose();
    Tensor& db = (*grads)[bias];
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int n = 0; n < b; ++n) {
      for (int o = 0; o < out_; ++o) {
        const float* src = dy.slice(n).data() + o * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
        db[o] += static_cast<float>(s);
      }
    }
  }
  if (!want_dx) return {};

  MatR dxm(in_, static_cast<Eigen::Index>(b * p));
  dxm.noalias() = CMapR(weight.value.data(), in_, kk) * dcol;
  Tensor dx(x.shape());
  scatter_channels_major(dxm, dx);
  return dx;
}

// ---------------------------------------------------------------------------

Tensor instance_norm(const Tensor& x, InstanceNormCache* cache) {
  require_rank4(x, "instance_norm");
  const int planes = x.dim(0) * x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y(x.shape());
  std::vector<float> inv_std(static_cast<std::size_t>(planes));
  for (int i = 0; i < planes; ++i) {
    const float* src = x.data() + i * hw;
    float* dst = y.data() + i * hw;
    double mean = 0.0;
    for (std::size_t j = 0; j < hw; ++j) mean += src[j];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t j = 0; j < hw; ++j) var += (src[j] - mean) * (src[j] - mean);
    var /= static_cast<double>(hw);
    const auto istd = static_cast<float>(1.0 / std::sqrt(var + kNormEps));
    for (std::size_t j = 0; j < hw; ++j) dst[j] = static_cast<float>(src[j] - mean) * istd;
    inv_std[i] = istd;
  }
  if (cache != nullptr) {
    cache->y = y;
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Tensor instance_norm_backward(const InstanceNormCache& cache, const Tensor& dy) {
  const Tensor& y = cache.y;
  if (!y.same_shape(dy)) throw ShapeError("instance_norm_backward: shape mismatch");
  const int planes = y.dim(0) * y.dim(1);
  const std::size_t hw = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  Tensor dx(y.shape());
  for (int i = 0; i < planes; ++i) {
    const float* yy = y.data() + i * hw;
    const float* g = dy.data() + i * hw;
    float* out = dx.data() + i * hw;
    double mean_g = 0.0, mean_gy = 0.0;
    for (std::size_t j = 0; j < hw; ++j) {
      mean_g += g[j];
      mean_gy += static_cast<double>(g[j]) * yy[j];
    }
    mean_g /= static_cast<double>(hw);
    mean_gy /= static_cast<double>(hw);
    const float istd = cache.inv_std[i];
    for (std::size_t j = 0; j < hw; ++j) {
      out[j] = istd * static_cast<float>(g[j] - mean_g - yy[j] * mean_gy);
    }
  }
  return dx;
}

Tensor avg_pool2(const Tensor& x) {
  require_rank4(x, "avg_pool2");
  const int h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("avg_pool2: odd extent " + x.shape_string());
  Tensor y({x.dim(0), x.dim(1), h / 2, w / 2});
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < x.dim(1); ++c) {
      for (int i = 0; i < h / 2; ++i) {
        for (int j = 0; j < w / 2; ++j) {
          y.at(n, c, i, j) = 0.25f * (x.at(n, c, 2 * i, 2 * j) + x.at(n, c, 2 * i, 2 * j + 1) +
                                      x.at(n, c, 2 * i + 1, 2 * j) + x.at(n, c, 2 * i + 1, 2 * j + 1));
        }
      }
    }
  }
  return y;
}

Tensor avg_pool2_backward(const Tensor& dy) {
  Tensor dx({dy.dim(0), dy.dim(1), dy.dim(2) * 2, dy.dim(3) * 2});
  for (int n = 0; n < dy.dim(0); ++n) {
    for (int c = 0; c < dy.dim(1); ++c) {
      for (int i = 0; i < dx.dim(2); ++i) {
        for (int j = 0; j < dx.dim(3); ++j) dx.at(n, c, i, j) = 0.25f * dy.at(n, c, i / 2, j / 2);
      }
    }
  }
  return dx;
}

}  // namespace g2p::nn
