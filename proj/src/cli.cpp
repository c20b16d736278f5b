#include "g2p/cli.hpp"

#include <algorithm>
#include <numeric>
#include <fstream>
#include <iostream>
#include <sstream>

#include "g2p/image_io.hpp"

namespace g2p::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Runs `body`, mapping exceptions to one-line diagnostics and exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ManifestError& e) {
    err << "error: manifest: " << e.what() << '\n';
    return kBadManifest;
  } catch (const NonFiniteLossError& e) {
    err << "error: training: " << e.what() << '\n';
    return kNonFinite;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: runtime: " << e.what() << '\n';
    return kFailure;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int bin_of(std::size_t v) { return static_cast<int>(std::min<std::size_t>(v, Histograms::kBins - 1)); }

}  // namespace

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["dataset"] = {{"n_families", dataset.n_families},
                  {"image_size", dataset.image_size},
                  {"seed", dataset.seed},
                  {"blend_mode", to_string(dataset.blend_mode)}};
  j["train"] = json(train);
  j["eval"] = {{"seed", eval.seed}, {"extractor", extractor}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    c.dataset.n_families = d.value("n_families", c.dataset.n_families);
    c.dataset.image_size = d.value("image_size", c.dataset.image_size);
    c.dataset.seed = d.value("seed", c.dataset.seed);
    if (d.contains("blend_mode")) c.dataset.blend_mode = parse_blend_mode(d.at("blend_mode").get<std::string>());
  }
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    c.eval.seed = e.value("seed", c.eval.seed);
    c.extractor = e.value("extractor", c.extractor);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return from_json(json::parse(in));
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) {
    cfg.dataset.seed = *o.seed;
    cfg.train.seed = *o.seed;
    cfg.eval.seed = *o.seed;
  }
  if (o.steps) cfg.train.max_steps = *o.steps;
  if (o.image_size) {
    cfg.dataset.image_size = *o.image_size;
    cfg.train.generator.image_size = *o.image_size;
  }
  if (o.ablation) cfg.train.ablation_random_adjacency = true;
}

void write_lock(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.lock.json", cfg.to_json().dump(2) + "\n");
}

Histograms lineage_histograms(const LineageGraph& graph) {
  Histograms h;
  for (const LineageNode& n : graph.nodes()) {
    ++h.parents[bin_of(n.parent_ids.size())];
    ++h.ancestors[bin_of(graph.ancestor_count(n.id))];
  }
  return h;
}

std::string histograms_text(const Histograms& h) {
  std::ostringstream os;
  const int total = std::max(1, std::accumulate(h.parents.begin(), h.parents.end(), 0));
  auto block = [&](const char* title, const std::array<int, Histograms::kBins>& bins) {
    os << title << '\n';
    for (int i = 0; i < Histograms::kBins; ++i) {
      const std::string label = i + 1 == Histograms::kBins ? "10+" : std::to_string(i);
      os << "  " << std::string(3 - label.size(), ' ') << label << " | ";
      const int width = static_cast<int>(40.0 * bins[i] / total + 0.5);
      os << std::string(static_cast<std::size_t>(width), '#') << ' ' << bins[i] << '\n';
    }
  };
  block("parents per node", h.parents);
  block("ancestors per node", h.ancestors);
  return os.str();
}

std::string histograms_csv(const Histograms& h) {
  std::ostringstream os;
  os << "kind,count,nodes\n";
  for (int i = 0; i < Histograms::kBins; ++i) {
    os << "parents," << (i + 1 == Histograms::kBins ? "10+" : std::to_string(i)) << ',' << h.parents[i] << '\n';
  }
  for (int i = 0; i < Histograms::kBins; ++i) {
    os << "ancestors," << (i + 1 == Histograms::kBins ? "10+" : std::to_string(i)) << ',' << h.ancestors[i] << '\n';
  }
  return os.str();
}

int cmd_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto manifest = generate_corpus(cfg.dataset, out_dir);
    write_lock(cfg, out_dir);
    out << "wrote " << cfg.dataset.n_families * kFamilySlots << " images and " << manifest.string() << '\n';
    return kOk;
  });
}

int cmd_validate(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& out_dir,
                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LineageGraph graph = ingest_manifest(manifest);
    const auto families = eligible_families(graph);
    const Histograms h = lineage_histograms(graph);
    out << "nodes: " << graph.size() << "\nedges: " << graph.edges().size()
        << "\neligible families: " << families.size() << "\n\n"
        << histograms_text(h);
    if (out_dir) {
      std::filesystem::create_directories(*out_dir);
      write_text(*out_dir / "lineage_histograms.csv", histograms_csv(h));
    } else {
      out << '\n' << histograms_csv(h);
    }
    return kOk;
  });
}

int cmd_train(const RunConfig& cfg, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    write_lock(cfg, out_dir);
    const TrainResult r = train(cfg.train, manifest, out_dir, [&](const StepMetrics& m) {
      if (m.step % 25 == 0) out << m.to_json().dump() << '\n' << std::flush;
    });
    out << "trained " << r.state.step << " steps; checkpoint " << r.checkpoint.string() << '\n';
    return kOk;
  });
}

int cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
              const std::string& family_id, const std::filesystem::path& out_png, std::uint64_t seed,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrainState state = TrainState::load(checkpoint);
    const Corpus corpus = Corpus::load(manifest, state.config.generator.image_size);
    const auto it = std::find_if(corpus.families.begin(), corpus.families.end(),
                                 [&](const FamilyData& f) { return f.family.child() == family_id; });
    if (it == corpus.families.end()) {
      throw std::invalid_argument("'" + family_id + "' is not the child of an eligible family");
    }
    Rng rng(derive_seed(seed, 0x1F3E));
    const FamilySample s = make_child_sample(*it, rng, state.config.ablation_random_adjacency);
    const Tensor image = state.generator.generate(s.images, s.adjacency, 0);
    if (out_png.has_parent_path()) std::filesystem::create_directories(out_png.parent_path());
    write_png(out_png, tensor_to_image(image));
    out << "wrote " << out_png.string() << '\n';
    return kOk;
  });
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
             const std::optional<std::filesystem::path>& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SeededConvExtractor extractor = cfg.extractor.empty() ? SeededConvExtractor::from_seed()
                                                                : SeededConvExtractor::load(cfg.extractor);
    const MetricsReport report = evaluate_checkpoint(checkpoint, manifest, extractor, cfg.eval);
    const std::string text = report.to_json().dump(2) + "\n";
    if (out_dir) {
      write_lock(cfg, *out_dir);
      write_text(*out_dir / "metrics_report.json", text);
      extractor.save(*out_dir / "extractor.bin");
    }
    out << text;
    return kOk;
  });
}

}  // namespace g2p::cli
