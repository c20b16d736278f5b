#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "g2p/graph_conv.hpp"
#include "g2p/lineage.hpp"
#include "g2p/nn.hpp"
#include "g2p/rng.hpp"
#include "g2p/tensor.hpp"

namespace g2p::testing {

// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(G2P_TEST_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Direct-loop convolution, independent of the im2col path. Weight layout is
// [out, in, k, k] flattened.
inline Tensor loop_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, int k, int stride,
                        int pad) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cout = bias.dim(0);
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  Tensor y({n, cout, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < cout; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias[o];
          for (int c = 0; c < cin; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += static_cast<double>(weight[((static_cast<std::size_t>(o) * cin + c) * k + ky) * k + kx]) *
                       x.at(b, c, iy, ix);
              }
          y.at(b, o, oy, ox) = static_cast<float>(acc);
        }
  return y;
}

// Dense D^-1/2 (A + Aᵀ ∨ I) D^-1/2 straight from the definition.
inline std::vector<double> dense_normalized(int n, const std::vector<double>& links) {
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a[i * n + j] = (i == j || links[i * n + j] != 0.0 || links[j * n + i] != 0.0) ? 1.0 : 0.0;
  std::vector<double> d(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i] += a[i * n + j];
  std::vector<double> dinv(static_cast<std::size_t>(n) * n, 0.0), tmp(a.size(), 0.0), out(a.size(), 0.0);
  for (int i = 0; i < n; ++i) dinv[i * n + i] = 1.0 / std::sqrt(d[i]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) tmp[i * n + j] += dinv[i * n + k] * a[k * n + j];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out[i * n + j] += tmp[i * n + k] * dinv[k * n + j];
  return out;
}

inline NormalizedAdjacency permute_adjacency(const NormalizedAdjacency& a, const std::vector<int>& perm) {
  // Slot i of the result is slot perm[i] of the input.
  const int n = a.size;
  std::vector<double> links(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) links[i * n + j] = a.tilde(perm[i], perm[j]);
  return normalize_adjacency(n, links);
}

inline Tensor permute_nodes(const Tensor& t, const std::vector<int>& perm) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = t.slice(perm[i]);
    std::copy(src.begin(), src.end(), out.slice(static_cast<int>(i)).begin());
  }
  return out;
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return p;
}

// Random lineage DAG: every node's parents are drawn from earlier nodes.
inline std::vector<LineageNode> random_lineage(int n, Rng& rng) {
  std::vector<LineageNode> nodes;
  for (int i = 0; i < n; ++i) {
    LineageNode node;
    node.id = "n" + std::to_string(i);
    node.image = node.id + ".png";
    const int want = i == 0 ? 0 : static_cast<int>(rng.below(4));
    for (int k = 0; k < want; ++k) {
      const std::string p = "n" + std::to_string(rng.below(static_cast<std::uint64_t>(i)));
      if (std::find(node.parent_ids.begin(), node.parent_ids.end(), p) == node.parent_ids.end()) {
        node.parent_ids.push_back(p);
      }
    }
    nodes.push_back(std::move(node));
  }
  return nodes;
}

// Relative error between two gradient vectors.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

inline double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * w[i];
  return s;
}

// Smallest |pre-activation| over both graph conv layers. Central differences
// are only meaningful when no unit sits within the perturbation's reach of the
// ReLU kink.
inline float kink_margin(const GraphConvBlock& b, const Tensor& h, const NormalizedAdjacency& adj) {
  GraphConvBlock linear = b;
  linear.activation = nn::Activation::kIdentity;
  float margin = std::numeric_limits<float>::infinity();
  Tensor x = h;
  for (int l = 0; l < GraphConvBlock::kLayers; ++l) {
    const Tensor z = linear.layer_forward(x, adj, l);
    for (float v : z.values()) margin = std::min(margin, std::fabs(v));
    x = nn::activate(z, b.activation);
  }
  return margin;
}

inline constexpr float kKinkMargin = 1e-2f;

}  // namespace g2p::testing
