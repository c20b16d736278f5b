#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "g2p/rng.hpp"

namespace g2p {

// Raised for any manifest that cannot become a valid LineageGraph. `kind` is a
// short stable tag ("parse error", "cycle detected", ...); `line` is the
// 1-based line where the offending record starts, or 0 when unknown.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::string kind, std::string node_id, int line, const std::string& detail);

  const std::string& kind() const { return kind_; }
  const std::string& node_id() const { return node_id_; }
  int line() const { return line_; }

 private:
  std::string kind_;
  std::string node_id_;
  int line_;
};

struct LineageNode {
  std::string id;
  std::string image;  // as written in the manifest; relative paths resolve against the manifest dir
  std::vector<std::string> parent_ids;
  std::optional<std::string> creator;
  std::optional<std::string> created_at;

  bool operator==(const LineageNode&) const = default;
};

// Validated, immutable corpus of lineage records.
class LineageGraph {
 public:
  // Validates ids, parent references and acyclicity. `record_lines` optionally
  // maps each record to its manifest line for error messages.
  static LineageGraph build(std::vector<LineageNode> nodes, std::filesystem::path base_dir = {},
                            std::span<const int> record_lines = {});

  const std::vector<LineageNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  const LineageNode& node(const std::string& id) const;
  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::filesystem::path image_path(const std::string& id) const;

  // Directed parent -> child pairs, in manifest order of the child.
  std::vector<std::pair<std::string, std::string>> edges() const;
  bool is_parent_of(const std::string& parent, const std::string& child) const;
  std::size_t ancestor_count(const std::string& id) const;

 private:
  std::vector<LineageNode> nodes_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path base_dir_;
};

LineageGraph parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
LineageGraph ingest_manifest(const std::filesystem::path& path);
std::string manifest_json(const LineageGraph& graph);
void write_manifest(const LineageGraph& graph, const std::filesystem::path& path);

// Slot layout: child, parent1, parent2, then the grandparents of each parent.
enum class Slot : int { kChild = 0, kParent1, kParent2, kGp11, kGp12, kGp21, kGp22 };
inline constexpr int kFamilySlots = 7;

struct FamilyTemplate {
  std::vector<std::string> slot_ids;  // repetition allowed for padding

  int node_count() const { return static_cast<int>(slot_ids.size()); }
  const std::string& child() const { return slot_ids.front(); }
  const std::string& at(Slot s) const { return slot_ids.at(static_cast<std::size_t>(s)); }
  bool operator==(const FamilyTemplate&) const = default;
};

// One template per child with two distinct parents that each have at least one
// parent of their own; sorted by child id.
std::vector<FamilyTemplate> eligible_families(const LineageGraph& graph);

// Â = D̃^(-1/2) Ã D̃^(-1/2) where Ã is the symmetrized link matrix plus self-loops.
struct NormalizedAdjacency {
  int size = 0;
  std::vector<double> a_tilde;  // size x size, entries 0/1
  std::vector<double> degree;   // diagonal of D̃
  std::vector<double> a_hat;    // size x size

  double hat(int i, int j) const { return a_hat[static_cast<std::size_t>(i) * size + j]; }
  double tilde(int i, int j) const { return a_tilde[static_cast<std::size_t>(i) * size + j]; }
};

// `links` is a row-major n x n matrix; any nonzero entry counts as an edge.
NormalizedAdjacency normalize_adjacency(int n, std::span<const double> links);
NormalizedAdjacency build_adjacency(const LineageGraph& graph, const FamilyTemplate& family);
// Random symmetric graph with i.i.d. Bernoulli(density) off-diagonal links.
NormalizedAdjacency random_adjacency(int n, Rng& rng, double density = 0.5);

}  // namespace g2p
