#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "g2p/discriminator.hpp"
#include "g2p/generator.hpp"
#include "g2p/lineage.hpp"
#include "g2p/serialize.hpp"

namespace g2p {

inline constexpr const char* kCheckpointTag = "G2P-CKPT-1";

struct TrainConfig {
  int epochs = 50;
  std::int64_t max_steps = 0;  // 0: bounded by epochs only
  int batch_size = 8;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_fm = 10.0;
  double lambda_l1 = 0.0;  // optional pixel reconstruction term, off by default
  double p_random_target = 0.3;
  std::uint64_t seed = 0;
  bool ablation_random_adjacency = false;
  double holdout_fraction = 0.0;     // tail of the child-id-sorted families kept out of training
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// One eligible family with its images resident in memory.
struct FamilyData {
  FamilyTemplate family;
  Tensor images;  // N x 3 x S x S in [-1, 1]
  NormalizedAdjacency lineage_adjacency;
};

struct Corpus {
  LineageGraph graph;
  std::vector<FamilyData> families;  // sorted by child id

  // Loads every eligible family; images are decoded by `workers` threads.
  static Corpus load(const std::filesystem::path& manifest, int image_size, int workers = 0);
};

// Number of loader threads from G2P_NUM_WORKERS (default 1).
int num_workers_from_env();

struct Split {
  std::vector<int> train;
  std::vector<int> heldout;
};
// The last round(n * fraction) families are held out; both sides stay non-empty
// when fraction > 0 and n >= 2.
Split split_families(int n, double holdout_fraction);

struct FamilySample {
  Tensor images;  // target slot replaced by U(-1, 1) noise
  int target_index = 0;
  Tensor target_original;  // 3 x S x S
  NormalizedAdjacency adjacency;
};

// Picks the target (the child with probability 1 - p_random_target, otherwise
// a uniformly chosen non-child slot), noises it, and attaches either the
// lineage adjacency or, under the ablation, a fresh random one.
FamilySample make_sample(const FamilyData& family, Rng& rng, const TrainConfig& cfg);
// Child-slot sample used for evaluation and inference.
FamilySample make_child_sample(const FamilyData& family, Rng& rng, bool random_adjacency);
// Random self-looped symmetric adjacency guaranteed to differ from `lineage`.
NormalizedAdjacency ablation_adjacency(const NormalizedAdjacency& lineage, Rng& rng);

struct GanLosses {
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_g_fm = 0.0;
};

// Least-squares adversarial losses plus weighted feature matching, summed over scales.
GanLosses gan_losses(const std::vector<ScaleOutput>& real, const std::vector<ScaleOutput>& fake,
                     double lambda_fm);
// d(loss_D)/d(patch) for the real and the fake pass.
std::vector<ScaleOutput> d_loss_grad(const std::vector<ScaleOutput>& outputs, bool real);
// d(loss_G_adv + loss_G_fm)/d(fake outputs); real features are constants.
std::vector<ScaleOutput> g_loss_grad(const std::vector<ScaleOutput>& real,
                                     const std::vector<ScaleOutput>& fake, double lambda_fm);

class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<const nn::Param*>& params, double lr, double beta1, double beta2);

  void step(const std::vector<nn::Param*>& params, const nn::Grads& grads);
  std::int64_t steps() const { return t_; }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  double lr_ = 0.0, beta1_ = 0.0, beta2_ = 0.0;
  static constexpr double kEps = 1e-8;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct StepMetrics {
  std::int64_t step = 0;
  int epoch = 0;
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_g_fm = 0.0;
  double loss_g_l1 = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct TrainState {
  TrainConfig config;
  Generator generator;
  MultiScaleDiscriminator discriminator;
  Adam opt_g;
  Adam opt_d;
  std::int64_t step = 0;
  int epoch = 0;
  std::size_t cursor = 0;  // position inside `order`
  std::vector<int> order;  // current epoch's permutation of training families
  Rng order_rng;

  static TrainState fresh(const TrainConfig& cfg);
  void save(const std::filesystem::path& path) const;
  static TrainState load(const std::filesystem::path& path);
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& msg, StepMetrics m) : std::runtime_error(msg), metrics(m) {}
  StepMetrics metrics;
};

class Trainer {
 public:
  // `training_set` must outlive the trainer.
  Trainer(TrainState state, std::vector<const FamilyData*> training_set);

  // Samples and generator outputs for one batch.
  struct Batch {
    std::vector<FamilySample> samples;
    std::vector<Generator::Tape> tapes;
    std::vector<Tensor> fakes;
  };

  // One D-step followed by one G-step on the next batch. Throws
  // NonFiniteLossError if any loss is NaN or infinite.
  StepMetrics step();

  // The phases of step(), exposed for inspection.
  Batch prepare_batch();
  void discriminator_step(const Batch& batch, StepMetrics& m);
  void generator_step(const Batch& batch, StepMetrics& m);
  bool done() const;
  std::int64_t total_steps() const;

  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

 private:
  std::vector<int> next_batch();

  TrainState state_;
  std::vector<const FamilyData*> data_;
};

struct TrainResult {
  TrainState state;
  std::vector<StepMetrics> log;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_log;
};

// Full run: loads the corpus, trains on the training split, writes
// out_dir/metrics.jsonl and out_dir/checkpoint.g2p (also every
// checkpoint_every steps). On a non-finite loss a diagnostic snapshot is
// written to out_dir/nonfinite.g2p and the error is rethrown.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& manifest,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const StepMetrics&)>& on_step = {});

// Mean absolute error of the child reconstruction (child slot noised) over
// `families`, with per-family noise streams derived from `seed`.
double reconstruction_l1(const Generator& gen, std::span<const FamilyData* const> families,
                         std::uint64_t seed, bool random_adjacency);

// FNV-1a over parameter bytes, for mutation checks.
std::uint64_t parameter_hash(const std::vector<const nn::Param*>& params);

}  // namespace g2p
