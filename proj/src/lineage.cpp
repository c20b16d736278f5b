#include "g2p/lineage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace g2p {

namespace {

using nlohmann::json;

std::string format_error(const std::string& kind, const std::string& node_id, int line,
                         const std::string& detail) {
  std::string msg = kind;
  if (!node_id.empty()) msg += " at node '" + node_id + "'";
  if (line > 0) msg += " (line " + std::to_string(line) + ")";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

// 1-based start line of every top-level array element.
std::vector<int> record_start_lines(std::string_view text) {
  std::vector<int> lines;
  int line = 1, depth = 0;
  bool in_string = false, escaped = false, awaiting_element = false;
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (depth == 1 && ch == ',') {
      awaiting_element = true;
      continue;
    }
    if (depth == 1 && awaiting_element && ch != ']') {
      lines.push_back(line);
      awaiting_element = false;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '[' || ch == '{') {
      if (++depth == 1) awaiting_element = true;
    } else if (ch == ']' || ch == '}') {
      --depth;
    }
  }
  return lines;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::optional<std::string> optional_string(const json& rec, const char* key, const std::string& id,
                                           int line) {
  const auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ManifestError("parse error", id, line, std::string("field '") + key + "' must be a string or null");
  }
  return it->get<std::string>();
}

}  // namespace

ManifestError::ManifestError(std::string kind, std::string node_id, int line,
                             const std::string& detail)
    : std::runtime_error(format_error(kind, node_id, line, detail)),
      kind_(std::move(kind)),
      node_id_(std::move(node_id)),
      line_(line) {}

LineageGraph LineageGraph::build(std::vector<LineageNode> nodes, std::filesystem::path base_dir,
                                 std::span<const int> record_lines) {
  auto line_of = [&](std::size_t i) {
    return i < record_lines.size() ? record_lines[i] : 0;
  };
  LineageGraph g;
  g.base_dir_ = std::move(base_dir);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const LineageNode& n = nodes[i];
    if (n.id.empty()) throw ManifestError("parse error", "", line_of(i), "empty id");
    if (!g.index_.emplace(n.id, i).second) {
      throw ManifestError("duplicate id", n.id, line_of(i), "id already defined");
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const LineageNode& n = nodes[i];
    std::set<std::string> seen;
    for (const std::string& p : n.parent_ids) {
      if (p == n.id) throw ManifestError("self-parent", n.id, line_of(i), "node lists itself as parent");
      if (!seen.insert(p).second) {
        throw ManifestError("duplicate parent", n.id, line_of(i), "parent '" + p + "' listed twice");
      }
      if (!g.index_.contains(p)) {
        throw ManifestError("dangling parent", n.id, line_of(i), "parent '" + p + "' is not in the manifest");
      }
    }
  }

  // Iterative three-colour DFS along parent links.
  enum : char { kWhite, kGrey, kBlack };
  std::vector<char> colour(nodes.size(), kWhite);
  for (std::size_t root = 0; root < nodes.size(); ++root) {
    if (colour[root] != kWhite) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = kGrey;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& parents = nodes[node].parent_ids;
      if (next == parents.size()) {
        colour[node] = kBlack;
        stack.pop_back();
        continue;
      }
      const std::size_t p = g.index_.at(parents[next++]);
      if (colour[p] == kGrey) {
        throw ManifestError("cycle detected", nodes[p].id, line_of(p),
                            "node is its own ancestor via '" + nodes[node].id + "'");
      }
      if (colour[p] == kWhite) {
        colour[p] = kGrey;
        stack.emplace_back(p, 0);
      }
    }
  }
  g.nodes_ = std::move(nodes);
  return g;
}

const LineageNode& LineageGraph::node(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown lineage node '" + id + "'");
  return nodes_[it->second];
}

std::filesystem::path LineageGraph::image_path(const std::string& id) const {
  const std::filesystem::path p(node(id).image);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::vector<std::pair<std::string, std::string>> LineageGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const LineageNode& n : nodes_) {
    for (const std::string& p : n.parent_ids) out.emplace_back(p, n.id);
  }
  return out;
}

bool LineageGraph::is_parent_of(const std::string& parent, const std::string& child) const {
  const auto& ps = node(child).parent_ids;
  return std::find(ps.begin(), ps.end(), parent) != ps.end();
}

std::size_t LineageGraph::ancestor_count(const std::string& id) const {
  std::set<std::string> seen;
  std::vector<std::string> frontier = node(id).parent_ids;
  while (!frontier.empty()) {
    std::string cur = std::move(frontier.back());
    frontier.pop_back();
    if (!seen.insert(cur).second) continue;
    for (const std::string& p : node(cur).parent_ids) frontier.push_back(p);
  }
  return seen.size();
}

LineageGraph parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError("parse error", "", line_of_offset(text, e.byte), e.what());
  }
  if (!doc.is_array()) throw ManifestError("parse error", "", 1, "manifest must be a JSON array");
  const std::vector<int> lines = record_start_lines(text);
  auto line_of = [&](std::size_t i) { return i < lines.size() ? lines[i] : 0; };

  std::vector<LineageNode> nodes;
  nodes.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    if (!rec.is_object()) throw ManifestError("parse error", "", line_of(i), "record is not an object");
    // Absent fields and fields of the wrong type are reported separately.
    auto field = [&](const char* key, bool (json::*is_kind)() const noexcept, const char* what,
                     const std::string& node) -> const json& {
      const auto it = rec.find(key);
      if (it == rec.end()) throw ManifestError("missing field", node, line_of(i), std::string("no '") + key + "'");
      if (!((*it).*is_kind)()) {
        throw ManifestError("parse error", node, line_of(i), std::string("'") + key + "' must be " + what);
      }
      return *it;
    };
    LineageNode n;
    n.id = field("id", &json::is_string, "a string", "").get<std::string>();
    n.image = field("image", &json::is_string, "a string", n.id).get<std::string>();
    const json& parents = field("parents", &json::is_array, "an array", n.id);
    for (const json& p : parents) {
      if (!p.is_string()) throw ManifestError("parse error", n.id, line_of(i), "parent ids must be strings");
      n.parent_ids.push_back(p.get<std::string>());
    }
    n.creator = optional_string(rec, "creator", n.id, line_of(i));
    n.created_at = optional_string(rec, "created_at", n.id, line_of(i));
    nodes.push_back(std::move(n));
  }
  return LineageGraph::build(std::move(nodes), base_dir, lines);
}

LineageGraph ingest_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("io error", "", 0, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::string manifest_json(const LineageGraph& graph) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const LineageNode& n : graph.nodes()) {
    nlohmann::ordered_json rec;
    rec["id"] = n.id;
    rec["image"] = n.image;
    rec["parents"] = n.parent_ids;
    rec["creator"] = n.creator ? nlohmann::ordered_json(*n.creator) : nlohmann::ordered_json(nullptr);
    rec["created_at"] = n.created_at ? nlohmann::ordered_json(*n.created_at) : nlohmann::ordered_json(nullptr);
    doc.push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const LineageGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << manifest_json(graph);
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

std::vector<FamilyTemplate> eligible_families(const LineageGraph& graph) {
  std::vector<FamilyTemplate> out;
  for (const LineageNode& child : graph.nodes()) {
    if (child.parent_ids.size() < 2) continue;
    const std::string& p1 = child.parent_ids[0];
    const std::string& p2 = child.parent_ids[1];
    const auto& g1 = graph.node(p1).parent_ids;
    const auto& g2 = graph.node(p2).parent_ids;
    if (g1.empty() || g2.empty()) continue;
    // A parent with a single grandparent fills both of its slots with it.
    FamilyTemplate t;
    t.slot_ids = {child.id, p1, p2, g1[0], g1.size() > 1 ? g1[1] : g1[0],
                  g2[0], g2.size() > 1 ? g2[1] : g2[0]};
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(),
            [](const FamilyTemplate& a, const FamilyTemplate& b) { return a.child() < b.child(); });
  return out;
}

NormalizedAdjacency normalize_adjacency(int n, std::span<const double> links) {
  if (n < 1 || links.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("normalize_adjacency: expected an n x n link matrix");
  }
  NormalizedAdjacency adj;
  adj.size = n;
  adj.a_tilde.assign(links.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool linked = i == j || links[i * n + j] != 0.0 || links[j * n + i] != 0.0;
      adj.a_tilde[i * n + j] = linked ? 1.0 : 0.0;
    }
  }
  adj.degree.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) adj.degree[i] += adj.a_tilde[i * n + j];
  }
  adj.a_hat.assign(links.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      adj.a_hat[i * n + j] = adj.a_tilde[i * n + j] / std::sqrt(adj.degree[i] * adj.degree[j]);
    }
  }
  return adj;
}

NormalizedAdjacency build_adjacency(const LineageGraph& graph, const FamilyTemplate& family) {
  const int n = family.node_count();
  std::vector<double> links(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (graph.is_parent_of(family.slot_ids[i], family.slot_ids[j])) links[i * n + j] = 1.0;
    }
  }
  return normalize_adjacency(n, links);
}

NormalizedAdjacency random_adjacency(int n, Rng& rng, double density) {
  std::vector<double> links(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(density)) links[i * n + j] = 1.0;
    }
  }
  return normalize_adjacency(n, links);
}

}  // namespace g2p
