#include "g2p/evaluation.hpp"

#include <openssl/evp.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "g2p/serialize.hpp"
#include "g2p/training.hpp"

namespace g2p {

namespace {

constexpr const char* kExtractorTag = "G2P-FEXT-1";

// Lexicographically sorted copy of the rows.
Eigen::MatrixXd canonical_rows(const FeatureMatrix& m) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(a, c) != m(b, c)) return m(a, c) < m(b, c);
    }
    return false;
  });
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centred = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  cov.diagonal().array() += kCovarianceRidge;
  return cov;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

double unbiased_mmd2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index m = x.rows(), n = y.rows();
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j) kxx += polynomial_kernel(x.row(i), x.row(j));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) kyy += polynomial_kernel(y.row(i), y.row(j));
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) kxy += polynomial_kernel(x.row(i), y.row(j));
  }
  return kxx / static_cast<double>(m * (m - 1)) + kyy / static_cast<double>(n * (n - 1)) -
         2.0 * kxy / static_cast<double>(m * n);
}

FeatureMatrix pooled_matrix(const std::vector<ExtractedFeatures>& feats) {
  FeatureMatrix m(static_cast<Eigen::Index>(feats.size()),
                  feats.empty() ? 0 : static_cast<Eigen::Index>(feats[0].pooled.size()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t c = 0; c < feats[i].pooled.size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = feats[i].pooled[c];
  }
  return m;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------

SeededConvExtractor SeededConvExtractor::from_seed(const std::string& name) {
  SeededConvExtractor f;
  f.name_ = name;
  Rng rng(seed_from_name(name));
  int channels = 3;
  for (std::size_t s = 0; s < f.stages_.size(); ++s) {
    f.stages_[s] = nn::Conv2d("fext" + std::to_string(s), channels, kWidths[s], 3, 2, 1);
    f.stages_[s].init(rng, std::sqrt(2.0));
    channels = kWidths[s];
  }
  f.hash_ = sha256_hex(f.blob());
  return f;
}

std::string SeededConvExtractor::blob() const {
  std::ostringstream os(std::ios::binary);
  BinaryWriter w(os);
  w.raw(kExtractorTag, std::strlen(kExtractorTag));
  w.str(name_);
  std::vector<const nn::Param*> ps;
  for (const auto& s : stages_) {
    ps.push_back(&s.weight);
    ps.push_back(&s.bias);
  }
  w.params(ps);
  return os.str();
}

void SeededConvExtractor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string b = blob();
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("cannot write extractor " + path.string());
}

SeededConvExtractor SeededConvExtractor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open extractor " + path.string());
  BinaryReader r(in);
  std::string tag(std::strlen(kExtractorTag), '\0');
  r.raw(tag.data(), tag.size());
  if (tag != kExtractorTag) throw FormatError(path.string() + ": not a feature extractor blob");
  SeededConvExtractor f = from_seed(r.str());
  std::vector<nn::Param*> ps;
  for (auto& s : f.stages_) {
    ps.push_back(&s.weight);
    ps.push_back(&s.bias);
  }
  r.params(ps);
  f.hash_ = sha256_hex(f.blob());
  return f;
}

ExtractedFeatures SeededConvExtractor::extract(const Tensor& image) const {
  if (image.size() % 3 != 0) throw ShapeError("extract: image " + image.shape_string());
  const int s = image.dim(image.rank() - 1);
  Tensor x = image;
  x.reshape({1, 3, image.dim(image.rank() - 2), s});
  ExtractedFeatures out;
  for (const auto& stage : stages_) {
    x = stage.forward(x);
    nn::activate_inplace(x, nn::Activation::kReLU);
    out.stages.push_back(x);
  }
  const int c = x.dim(1);
  const std::size_t hw = x.slice_size() / static_cast<std::size_t>(c);
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) sum += x[static_cast<std::size_t>(ch) * hw + i];
    out.pooled.push_back(sum / static_cast<double>(hw));
  }
  return out;
}

// ---------------------------------------------------------------------------

double paired_distance(const ExtractedFeatures& a, const ExtractedFeatures& b) {
  if (a.stages.size() != b.stages.size() || a.stages.empty()) {
    throw ShapeError("paired distance: stage count mismatch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    if (!a.stages[s].same_shape(b.stages[s])) {
      throw ShapeError("paired distance: resolution mismatch at stage " + std::to_string(s));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.stages[s].size(); ++i) {
      sum += std::fabs(static_cast<double>(a.stages[s][i]) - b.stages[s][i]);
    }
    total += sum / static_cast<double>(a.stages[s].size());
  }
  return total / static_cast<double>(a.stages.size());
}

double paired_perceptual_distance(const Tensor& a, const Tensor& b, const FeatureExtractor& f) {
  if (!a.same_shape(b)) {
    throw ShapeError("paired perceptual distance: " + a.shape_string() + " vs " + b.shape_string());
  }
  return paired_distance(f.extract(a), f.extract(b));
}

double polynomial_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double t = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return t * t * t;
}

double fid(const FeatureMatrix& real, const FeatureMatrix& fake) {
  if (real.rows() < kMinFidSamples || fake.rows() < kMinFidSamples) {
    throw std::invalid_argument("fid needs at least " + std::to_string(kMinFidSamples) + " samples per side");
  }
  if (real.cols() != fake.cols()) throw ShapeError("fid: feature dimension mismatch");
  const Eigen::MatrixXd r = canonical_rows(real), f = canonical_rows(fake);
  const Eigen::VectorXd mu_r = r.colwise().mean(), mu_f = f.colwise().mean();
  const Eigen::MatrixXd cov_r = covariance(r, mu_r), cov_f = covariance(f, mu_f);
  // Tr((Σr Σf)^1/2) = Tr((Σr^1/2 Σf Σr^1/2)^1/2), the latter symmetric PSD.
  const Eigen::MatrixXd root_r = psd_sqrt(cov_r);
  const Eigen::MatrixXd inner = root_r * cov_f * root_r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mu_r - mu_f).squaredNorm() + cov_r.trace() + cov_f.trace() - 2.0 * tr_root;
  return std::max(d, 0.0);
}

double kid(const FeatureMatrix& real, const FeatureMatrix& fake) {
  if (real.rows() < 2 || fake.rows() < 2) throw std::invalid_argument("kid needs at least 2 samples per side");
  if (real.cols() != fake.cols()) throw ShapeError("kid: feature dimension mismatch");
  const Eigen::MatrixXd r = canonical_rows(real), f = canonical_rows(fake);
  const Eigen::Index longest = std::max(r.rows(), f.rows());
  Eigen::Index blocks = (longest + kKidBlock - 1) / kKidBlock;
  blocks = std::clamp<Eigen::Index>(blocks, 1, std::min(r.rows(), f.rows()) / 2);
  double total = 0.0;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index r0 = b * r.rows() / blocks, r1 = (b + 1) * r.rows() / blocks;
    const Eigen::Index f0 = b * f.rows() / blocks, f1 = (b + 1) * f.rows() / blocks;
    total += unbiased_mmd2(r.middleRows(r0, r1 - r0), f.middleRows(f0, f1 - f0));
  }
  return total / static_cast<double>(blocks);
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["ppd"] = ppd;
  j["fid"] = fid ? nlohmann::ordered_json(*fid) : nlohmann::ordered_json(nullptr);
  j["kid"] = kid ? nlohmann::ordered_json(*kid) : nlohmann::ordered_json(nullptr);
  j["n_pairs"] = n_pairs;
  j["extractor_hash"] = extractor_hash;
  j["config"] = config;
  return j;
}

MetricsReport evaluate_pairs(const std::vector<Tensor>& generated, const std::vector<Tensor>& real,
                             const FeatureExtractor& f) {
  if (generated.size() != real.size()) throw std::invalid_argument("evaluate_pairs: unpaired inputs");
  if (generated.empty()) throw std::invalid_argument("evaluate_pairs: no pairs");
  std::vector<ExtractedFeatures> gen_feats, real_feats;
  MetricsReport report;
  double ppd = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    gen_feats.push_back(f.extract(generated[i]));
    real_feats.push_back(f.extract(real[i]));
    ppd += paired_distance(gen_feats.back(), real_feats.back());
  }
  report.n_pairs = static_cast<int>(generated.size());
  report.ppd = ppd / report.n_pairs;
  const FeatureMatrix g = pooled_matrix(gen_feats), r = pooled_matrix(real_feats);
  if (report.n_pairs >= kMinFidSamples) report.fid = fid(r, g);
  if (report.n_pairs >= 2) report.kid = kid(r, g);
  report.extractor_hash = f.hash();
  return report;
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                                  const FeatureExtractor& f, const EvalOptions& options) {
  const TrainState state = TrainState::load(checkpoint);
  const TrainConfig& cfg = state.config;
  const Corpus corpus = Corpus::load(manifest, cfg.generator.image_size);
  const Split split = split_families(static_cast<int>(corpus.families.size()), cfg.holdout_fraction);
  const bool heldout = !split.heldout.empty();
  const std::vector<int>& chosen = heldout ? split.heldout : split.train;
  if (chosen.empty()) throw std::runtime_error("corpus has no eligible families to evaluate");

  std::vector<Tensor> generated, real;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const FamilyData& fam = corpus.families[chosen[i]];
    if (fam.images.dim(0) != cfg.generator.family_size) {
      throw ShapeError("family " + fam.family.child() + " does not match the checkpoint's family size");
    }
    Rng rng(derive_seed(options.seed, i, 0xE7A1));
    const FamilySample s = make_child_sample(fam, rng, cfg.ablation_random_adjacency);
    generated.push_back(state.generator.generate(s.images, s.adjacency, 0));
    real.push_back(s.target_original);
  }
  MetricsReport report = evaluate_pairs(generated, real, f);
  report.config = nlohmann::ordered_json{{"eval_seed", options.seed},
                                         {"split", heldout ? "heldout" : "all"},
                                         {"families", chosen.size()},
                                         {"checkpoint_step", state.step},
                                         {"train_config", nlohmann::json(cfg)}};
  return report;
}

}  // namespace g2p
