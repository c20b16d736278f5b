#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "g2p/nn.hpp"

namespace g2p {

struct ExtractedFeatures {
  std::vector<Tensor> stages;  // per-stage feature maps
  std::vector<double> pooled;  // global-average-pooled final stage
};

// Image embedding used by every metric. Implementations must be deterministic;
// `hash()` identifies the weights so reports from different extractors are
// never compared by accident.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  // image: 3 x S x S in [-1, 1].
  virtual ExtractedFeatures extract(const Tensor& image) const = 0;
  virtual std::string hash() const = 0;
};

// Four stride-2 3x3 conv + ReLU stages (16/32/64/128 channels) with weights
// drawn once from a named seed.
class SeededConvExtractor final : public FeatureExtractor {
 public:
  static constexpr const char* kDefaultName = "g2p-extractor-v1";
  static constexpr std::array<int, 4> kWidths{16, 32, 64, 128};

  static SeededConvExtractor from_seed(const std::string& name = kDefaultName);
  static SeededConvExtractor load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  ExtractedFeatures extract(const Tensor& image) const override;
  std::string hash() const override { return hash_; }
  const std::string& name() const { return name_; }

 private:
  std::string blob() const;

  std::string name_;
  std::array<nn::Conv2d, 4> stages_;
  std::string hash_;
};

std::string sha256_hex(const std::string& bytes);

// Mean over stages of the mean absolute feature difference.
double paired_perceptual_distance(const Tensor& a, const Tensor& b, const FeatureExtractor& f);
double paired_distance(const ExtractedFeatures& a, const ExtractedFeatures& b);

// Rows are samples. Both statistics canonicalize row order first, so they are
// bit-identical under any permutation of the samples.
using FeatureMatrix = Eigen::MatrixXd;

inline constexpr int kMinFidSamples = 8;
inline constexpr double kCovarianceRidge = 1e-6;
inline constexpr int kKidBlock = 256;

// Fréchet distance between Gaussian fits; needs >= 8 samples per side.
double fid(const FeatureMatrix& real, const FeatureMatrix& fake);
// Unbiased MMD² with k(x, y) = (x·y / d + 1)^3, averaged over blocks of <= 256.
double kid(const FeatureMatrix& real, const FeatureMatrix& fake);
double polynomial_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct MetricsReport {
  double ppd = 0.0;
  std::optional<double> fid;  // absent when fewer than 8 pairs
  std::optional<double> kid;  // absent when fewer than 2 pairs
  int n_pairs = 0;
  std::string extractor_hash;
  nlohmann::ordered_json config;

  nlohmann::ordered_json to_json() const;
};

// Metrics for paired generated/real images (same order).
MetricsReport evaluate_pairs(const std::vector<Tensor>& generated, const std::vector<Tensor>& real,
                             const FeatureExtractor& f);

struct EvalOptions {
  std::uint64_t seed = 0;
};

// Noises the child slot of every held-out family (all families when the
// checkpoint was trained without a hold-out), generates, and compares with the
// true child. Ablation checkpoints are evaluated with random adjacencies.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& manifest, const FeatureExtractor& f,
                                  const EvalOptions& options = {});

}  // namespace g2p
