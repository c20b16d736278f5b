// g2p: dataset generation, lineage validation, training, inference and
// evaluation for graph-conditioned image reconstruction.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "g2p/cli.hpp"

int main(int argc, char** argv) {
  using namespace g2p::cli;
  namespace fs = std::filesystem;

  CLI::App app{"Graph-conditioned image-to-image translation over lineage graphs"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> image_size;
  bool ablation = false;
  std::string out_dir;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Seed for every stage");
    cmd->add_option("--image-size", image_size, "Image resolution");
  };

  auto* dataset = app.add_subcommand("dataset", "Generate a synthetic lineage corpus");
  common(dataset);
  std::optional<int> families;
  std::string blend_mode;
  dataset->add_option("--out", out_dir, "Output directory")->required();
  dataset->add_option("--families", families, "Number of families");
  dataset->add_option("--blend-mode", blend_mode, "alpha | per-channel-alpha");

  auto* validate = app.add_subcommand("validate", "Validate a manifest and print lineage histograms");
  std::string manifest;
  validate->add_option("manifest", manifest, "Manifest JSON")->required();
  validate->add_option("--out", out_dir, "Directory for the histogram CSV");

  auto* train = app.add_subcommand("train", "Train a generator/discriminator pair");
  common(train);
  train->add_option("--corpus", manifest, "Manifest JSON")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--steps", steps, "Maximum training steps");
  train->add_flag("--ablation", ablation, "Replace lineage adjacency with random adjacency");

  auto* infer = app.add_subcommand("infer", "Reconstruct one family's child image");
  std::string checkpoint, family_id, output;
  infer->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer->add_option("--corpus", manifest, "Manifest JSON")->required();
  infer->add_option("--family", family_id, "Child node id of the family")->required();
  infer->add_option("--output", output, "Output PNG")->required();
  infer->add_option("--seed", seed, "Noise seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out families");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--corpus", manifest, "Manifest JSON")->required();
  eval->add_option("--out", out_dir, "Directory for metrics_report.json");
  std::string extractor_path;
  eval->add_option("--extractor", extractor_path, "Saved feature extractor blob")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kUsage;
  }
  apply_overrides(cfg, Overrides{seed, steps, image_size, ablation});
  if (families) cfg.dataset.n_families = *families;
  if (!extractor_path.empty()) cfg.extractor = extractor_path;
  const std::optional<fs::path> out_opt = out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);

  if (*dataset) {
    if (!blend_mode.empty()) {
      try {
        cfg.dataset.blend_mode = g2p::parse_blend_mode(blend_mode);
      } catch (const std::exception& e) {
        std::cerr << "error: invalid: " << e.what() << '\n';
        return kUsage;
      }
    }
    return cmd_dataset(cfg, out_dir, std::cout, std::cerr);
  }
  if (*validate) return cmd_validate(manifest, out_opt, std::cout, std::cerr);
  if (*train) return cmd_train(cfg, manifest, out_dir, std::cout, std::cerr);
  if (*infer) return cmd_infer(checkpoint, manifest, family_id, output, seed.value_or(0), std::cout, std::cerr);
  return cmd_eval(cfg, checkpoint, manifest, out_opt, std::cout, std::cerr);
}
