#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "g2p/evaluation.hpp"
#include "g2p/lineage.hpp"
#include "g2p/synthetic.hpp"
#include "g2p/training.hpp"

namespace g2p::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kBadManifest = 3,
  kNonFinite = 4,
};

// Resolved settings for every subcommand, loaded from one JSON file with
// sections "dataset", "train" and "eval".
struct RunConfig {
  SynthConfig dataset;
  TrainConfig train;
  EvalOptions eval;
  std::string extractor;  // optional path to a saved extractor blob

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> image_size;
  bool ablation = false;
};

// --seed applies to every stage; --image-size to both the corpus and the model.
void apply_overrides(RunConfig& cfg, const Overrides& o);
// Writes dir/config.lock.json.
void write_lock(const RunConfig& cfg, const std::filesystem::path& dir);

struct Histograms {
  static constexpr int kBins = 11;  // 0..9 and "10+"
  std::array<int, kBins> parents{};
  std::array<int, kBins> ancestors{};
};
Histograms lineage_histograms(const LineageGraph& graph);
std::string histograms_text(const Histograms& h);
std::string histograms_csv(const Histograms& h);

// Each returns an ExitCode; failures print one line "error: <kind>: <detail>" to `err`.
int cmd_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_validate(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& out_dir,
                 std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err);
int cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
              const std::string& family_id, const std::filesystem::path& out_png, std::uint64_t seed,
              std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
             const std::optional<std::filesystem::path>& out_dir, std::ostream& out, std::ostream& err);

}  // namespace g2p::cli
