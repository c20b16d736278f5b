#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "g2p/lineage.hpp"
#include "support.hpp"

using namespace g2p;
using namespace g2p::testing;

namespace {

LineageNode rec(std::string id, std::vector<std::string> parents) {
  LineageNode n;
  n.id = id;
  n.image = "images/" + id + ".png";
  n.parent_ids = std::move(parents);
  return n;
}

ManifestError expect_error(const std::string& text) {
  try {
    parse_manifest(text);
  } catch (const ManifestError& e) {
    return e;
  }
  FAIL("manifest was accepted");
  throw std::logic_error("unreachable");
}

// Grandparents of `child` through each of its first two parents, by direct
// edge enumeration rather than the node records.
bool has_grandparents_via_both(const LineageGraph& g, const std::string& child) {
  std::vector<std::string> parents;
  for (const auto& [p, c] : g.edges())
    if (c == child) parents.push_back(p);
  if (parents.size() < 2) return false;
  for (int k = 0; k < 2; ++k) {
    bool found = false;
    for (const auto& [gp, p] : g.edges()) found = found || p == parents[k];
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("minimal manifest becomes a three-node graph") {
  const auto g = parse_manifest(R"([
    {"id": "p1", "image": "p1.png", "parents": [], "creator": null, "created_at": null},
    {"id": "p2", "image": "p2.png", "parents": []},
    {"id": "c", "image": "c.png", "parents": ["p1", "p2"], "creator": "alice", "created_at": "2020-01-01"}
  ])");
  CHECK(g.size() == 3);
  CHECK(g.edges().size() == 2);
  CHECK(g.is_parent_of("p1", "c"));
  CHECK_FALSE(g.is_parent_of("c", "p1"));
  CHECK(g.node("c").creator == "alice");
  CHECK_FALSE(g.node("p1").creator.has_value());
  CHECK(g.ancestor_count("c") == 2);
}

TEST_CASE("manifest errors carry kind, node and line") {
  SUBCASE("self-parent") {
    const auto e = expect_error(R"([
{"id": "x", "image": "x.png", "parents": ["x"]}
])");
    CHECK(e.kind() == "self-parent");
    CHECK(e.node_id() == "x");
    CHECK(e.line() == 2);
  }
  SUBCASE("cycle") {
    const auto e = expect_error(R"([
{"id": "a", "image": "a.png", "parents": ["b"]},
{"id": "b", "image": "b.png", "parents": ["a"]}
])");
    CHECK(e.kind() == "cycle detected");
    CHECK(std::string(e.what()).find("cycle detected") != std::string::npos);
    CHECK((e.node_id() == "a" || e.node_id() == "b"));
    CHECK(e.line() > 0);
  }
  SUBCASE("longer cycle behind an acyclic prefix") {
    const auto e = expect_error(R"([
{"id": "r", "image": "r.png", "parents": []},
{"id": "a", "image": "a.png", "parents": ["r", "c"]},
{"id": "b", "image": "b.png", "parents": ["a"]},
{"id": "c", "image": "c.png", "parents": ["b"]}
])");
    CHECK(e.kind() == "cycle detected");
  }
  SUBCASE("duplicate id") {
    const auto e = expect_error(R"([
{"id": "a", "image": "a.png", "parents": []},
{"id": "a", "image": "b.png", "parents": []}
])");
    CHECK(e.kind() == "duplicate id");
    CHECK(e.line() == 3);
  }
  SUBCASE("dangling parent") {
    const auto e = expect_error(R"([{"id": "a", "image": "a.png", "parents": ["ghost"]}])");
    CHECK(e.kind() == "dangling parent");
    CHECK(e.node_id() == "a");
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
  SUBCASE("duplicate parent") {
    const auto e = expect_error(R"([
{"id": "p", "image": "p.png", "parents": []},
{"id": "a", "image": "a.png", "parents": ["p", "p"]}
])");
    CHECK(e.kind() == "duplicate parent");
  }
  SUBCASE("missing field") {
    const auto e = expect_error(R"([{"id": "a", "parents": []}])");
    CHECK(e.kind() == "missing field");
    CHECK(e.node_id() == "a");
    CHECK(expect_error(R"([{"image": "a.png", "parents": []}])").kind() == "missing field");
  }
  SUBCASE("malformed json") {
    CHECK(expect_error(R"([{"id": "a", )").kind() == "parse error");
    CHECK(expect_error(R"({"id": "a"})").kind() == "parse error");
  }
  SUBCASE("wrong field type") {
    CHECK(expect_error(R"([{"id": "a", "image": "a.png", "parents": "p"}])").kind() == "parse error");
  }
}

TEST_CASE("ingest reports io errors and resolves images next to the manifest") {
  const auto dir = scratch_dir("lineage_ingest");
  CHECK_THROWS_AS(ingest_manifest(dir / "absent.json"), ManifestError);
  std::ofstream(dir / "manifest.json") << R"([{"id": "a", "image": "img/a.png", "parents": []}])";
  const auto g = ingest_manifest(dir / "manifest.json");
  CHECK(g.image_path("a") == dir / "img/a.png");
}

TEST_CASE("eligible families follow the padding rule") {
  SUBCASE("five-node hand trace") {
    const auto g = LineageGraph::build(
        {rec("g1", {}), rec("g2", {}), rec("p1", {"g1"}), rec("p2", {"g2"}), rec("c", {"p1", "p2"})});
    const auto fams = eligible_families(g);
    REQUIRE(fams.size() == 1);
    CHECK(fams[0].slot_ids == std::vector<std::string>{"c", "p1", "p2", "g1", "g1", "g2", "g2"});
  }
  SUBCASE("child with one parent is excluded") {
    const auto g = LineageGraph::build({rec("g", {}), rec("p", {"g"}), rec("c", {"p"})});
    CHECK(eligible_families(g).empty());
  }
  SUBCASE("grandparent through only one parent is excluded") {
    const auto g = LineageGraph::build({rec("g1", {}), rec("p1", {"g1"}), rec("p2", {}), rec("c", {"p1", "p2"})});
    CHECK(eligible_families(g).empty());
    CHECK_FALSE(has_grandparents_via_both(g, "c"));
  }
  SUBCASE("full template and truncation to the first two by manifest order") {
    const auto g = LineageGraph::build({rec("a", {}), rec("b", {}), rec("d", {}), rec("e", {}), rec("f", {}),
                                        rec("p1", {"a", "b", "f"}), rec("p2", {"d", "e"}), rec("p3", {"a"}),
                                        rec("c", {"p1", "p2", "p3"})});
    const auto fams = eligible_families(g);
    REQUIRE(fams.size() == 1);
    CHECK(fams[0].slot_ids == std::vector<std::string>{"c", "p1", "p2", "a", "b", "d", "e"});
  }
  SUBCASE("empty graph") { CHECK(eligible_families(LineageGraph::build({})).empty()); }
}

TEST_CASE("eligibility agrees with brute-force ancestry on random graphs") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = LineageGraph::build(random_lineage(25, rng));
    std::set<std::string> expected;
    for (const auto& n : g.nodes())
      if (has_grandparents_via_both(g, n.id)) expected.insert(n.id);
    std::set<std::string> got;
    for (const auto& t : eligible_families(g)) got.insert(t.child());
    CHECK(got == expected);
  }
}

TEST_CASE("eligible families are invariant to record order") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto nodes = random_lineage(20, rng);
    const auto reference = eligible_families(LineageGraph::build(nodes));
    const auto perm = random_permutation(static_cast<int>(nodes.size()), rng);
    std::vector<LineageNode> shuffled;
    for (int i : perm) shuffled.push_back(nodes[i]);
    CHECK(eligible_families(LineageGraph::build(shuffled)) == reference);
  }
}

TEST_CASE("adjacency examples") {
  SUBCASE("single node") {
    const auto a = normalize_adjacency(1, std::vector<double>{0.0});
    CHECK(a.hat(0, 0) == 1.0);
  }
  SUBCASE("two linked nodes") {
    const auto a = normalize_adjacency(2, std::vector<double>{0, 1, 0, 0});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(a.hat(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("seven-slot template against the dense oracle") {
    const auto g = LineageGraph::build(
        {rec("g1", {}), rec("g2", {}), rec("p1", {"g1"}), rec("p2", {"g2"}), rec("c", {"p1", "p2"})});
    const auto t = eligible_families(g).at(0);
    const auto a = build_adjacency(g, t);
    std::vector<double> links(49, 0.0);
    // c-p1, c-p2, p1-g1 (both copies), p2-g2 (both copies)
    for (auto [i, j] : std::vector<std::pair<int, int>>{{1, 0}, {2, 0}, {3, 1}, {4, 1}, {5, 2}, {6, 2}}) links[i * 7 + j] = 1;
    const auto oracle = dense_normalized(7, links);
    for (int i = 0; i < 49; ++i) CHECK(std::fabs(a.a_hat[i] - oracle[i]) < 1e-12);
    CHECK(a.tilde(3, 4) == 0.0);
    CHECK(a.degree[1] == 4.0);
  }
  SUBCASE("rejects malformed link matrices") {
    CHECK_THROWS(normalize_adjacency(0, std::vector<double>{}));
    CHECK_THROWS(normalize_adjacency(2, std::vector<double>{0, 1, 0}));
  }
}

TEST_CASE("normalized adjacency invariants hold for lineage and random graphs") {
  Rng rng(21);
  auto check = [](const NormalizedAdjacency& a) {
    for (int i = 0; i < a.size; ++i) {
      CHECK(a.hat(i, i) == doctest::Approx(1.0 / a.degree[i]).epsilon(1e-14));
      for (int j = 0; j < a.size; ++j) {
        CHECK(std::fabs(a.hat(i, j) - a.hat(j, i)) < 1e-12);
        CHECK(a.hat(i, j) >= 0.0);
      }
    }
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = LineageGraph::build(random_lineage(30, rng));
    for (const auto& t : eligible_families(g)) check(build_adjacency(g, t));
    check(random_adjacency(1 + static_cast<int>(rng.below(7)), rng));
  }
}

TEST_CASE("adjacency is permutation-consistent") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(6));
    std::vector<double> links(static_cast<std::size_t>(n) * n, 0.0);
    for (auto& v : links) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    const auto a = normalize_adjacency(n, links);
    const auto perm = random_permutation(n, rng);
    std::vector<double> permuted(links.size(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) permuted[i * n + j] = links[perm[i] * n + perm[j]];
    const auto b = normalize_adjacency(n, permuted);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(std::fabs(b.hat(i, j) - a.hat(perm[i], perm[j])) < 1e-15);
  }
}

TEST_CASE("write then ingest is the identity") {
  const auto dir = scratch_dir("lineage_roundtrip");
  Rng rng(3);
  auto nodes = random_lineage(15, rng);
  nodes[2].creator = "bob";
  nodes[4].created_at = "2019-05-05T10:00:00Z";
  nodes[6].id = "ünïcode \"quoted\"";
  for (auto& n : nodes)
    for (auto& p : n.parent_ids)
      if (p == "n6") p = nodes[6].id;
  const auto g = LineageGraph::build(nodes, dir);
  write_manifest(g, dir / "manifest.json");
  const auto back = ingest_manifest(dir / "manifest.json");
  CHECK(back.nodes() == g.nodes());
  CHECK(manifest_json(back) == manifest_json(g));
}
