#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cana/graph.hpp"
#include "cana/rng.hpp"

using namespace cana::graph;
using cana::num::Rng;
using cana::num::Tensor;

namespace {

AttributedGraph make_graph(std::size_t n, std::vector<Edge> edges,
                           std::size_t dim = 2) {
  AttributedGraph g;
  g.num_nodes = n;
  g.edges = std::move(edges);
  g.attributes = Tensor(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      g.attributes.at(i, j) = static_cast<double>(i) + 0.1 * j;
  g.labels.assign(n, 0);
  g.num_classes = 1;
  g.finalize();
  return g;
}

AttributedGraph random_graph(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < p) edges.emplace_back(u, v);
  return make_graph(n, std::move(edges));
}

std::vector<int> bfs_distances(const AttributedGraph& g, NodeId src) {
  std::vector<int> dist(g.num_nodes, -1);
  std::queue<NodeId> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId v : g.adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "cana_graph_test";
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    auto p = (path / name).string();
    std::ofstream(p) << content;
    return p;
  }
};

}  // namespace

TEST_CASE("finalize deduplicates edges and sorts adjacency") {
  AttributedGraph g;
  g.num_nodes = 4;
  g.edges = {{2, 0}, {0, 2}, {3, 1}, {0, 2}, {0, 1}};
  // Edges are stored first < second by callers; finalize dedups exact pairs.
  g.edges = {{0, 2}, {0, 2}, {1, 3}, {0, 1}};
  g.attributes = Tensor(4, 1);
  g.labels = {0, 0, 0, 0};
  g.num_classes = 1;
  g.finalize();
  CHECK(g.edges == std::vector<Edge>{{0, 1}, {0, 2}, {1, 3}});
  CHECK(g.adj[0] == std::vector<NodeId>{1, 2});
  CHECK(g.degree(0) == 2);
  CHECK(g.degree(3) == 1);
}

TEST_CASE("finalize rejects invalid graphs") {
  AttributedGraph g;
  g.num_nodes = 2;
  g.attributes = Tensor(2, 1);
  g.labels = {0, 0};
  g.num_classes = 1;

  SUBCASE("self-loop") {
    g.edges = {{1, 1}};
    CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  }
  SUBCASE("endpoint out of range") {
    g.edges = {{0, 5}};
    CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  }
  SUBCASE("label count mismatch") {
    g.labels = {0};
    CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  }
  SUBCASE("label out of class range") {
    g.labels = {0, 7};
    CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  }
  SUBCASE("attribute row mismatch") {
    g.attributes = Tensor(3, 1);
    CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  }
  SUBCASE("-1 sentinel labels are allowed") {
    g.labels = {0, -1};
    CHECK_NOTHROW(g.finalize());
  }
}

TEST_CASE("budget validation") {
  AttackBudget b;
  CHECK_NOTHROW(b.validate());
  SUBCASE("zero node budget") {
    b.node_budget = 0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  }
  SUBCASE("zero edge budget") {
    b.edge_budget = 0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  }
  SUBCASE("empty feature range") {
    b.feature_lo = 1.0;
    b.feature_hi = 1.0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  }
}

TEST_CASE("perturbation validation enforces all budget rules") {
  AttributedGraph base = make_graph(3, {{0, 1}, {1, 2}});
  PerturbedGraph p;
  p.base = &base;
  p.budget = {2, 2, -10.0, 10.0};
  p.injected_count = 1;
  p.injected_attributes = Tensor(1, 2);
  p.injected_edges = {{3, 0}};
  CHECK_NOTHROW(p.validate());

  SUBCASE("node budget exceeded") {
    p.budget.node_budget = 0;
    p.budget.node_budget = 1;
    p.injected_count = 2;
    p.injected_attributes = Tensor(2, 2);
    p.injected_edges = {{3, 0}, {4, 1}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("attribute out of feature range") {
    p.injected_attributes.at(0, 1) = 11.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("attribute shape mismatch") {
    p.injected_attributes = Tensor(1, 3);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("edge between two original nodes") {
    p.injected_edges = {{3, 0}, {0, 1}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("isolated injected node") {
    p.injected_count = 2;
    p.injected_attributes = Tensor(2, 2);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("per-node edge budget exceeded") {
    p.injected_edges = {{3, 0}, {3, 1}, {3, 2}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("self-loop on injected node") {
    p.injected_edges = {{3, 3}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("injected edge endpoint out of range") {
    p.injected_edges = {{3, 9}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("materialize merges base and injection") {
  AttributedGraph base = make_graph(3, {{0, 1}, {1, 2}});
  PerturbedGraph p;
  p.base = &base;
  p.budget = {2, 2, -10.0, 10.0};
  p.injected_count = 2;
  p.injected_attributes = Tensor(2, 2);
  p.injected_attributes.at(0, 0) = 5.0;
  p.injected_attributes.at(1, 1) = -5.0;
  p.injected_edges = {{3, 0}, {4, 3}};
  CHECK(p.injected_global_id(0) == 3);

  AttributedGraph merged = materialize(p);
  CHECK(merged.num_nodes == 5);
  CHECK(merged.edges ==
        std::vector<Edge>{{0, 1}, {0, 3}, {1, 2}, {3, 4}});
  CHECK(merged.labels == std::vector<int>{0, 0, 0, -1, -1});
  CHECK(merged.num_classes == base.num_classes);
  // Base rows copied verbatim, injected rows appended in order.
  CHECK(merged.attributes.at(2, 0) == base.attributes.at(2, 0));
  CHECK(merged.attributes.at(3, 0) == 5.0);
  CHECK(merged.attributes.at(4, 1) == -5.0);
  // The base graph itself is untouched.
  CHECK(base.num_nodes == 3);
  CHECK(base.edges.size() == 2);
}

TEST_CASE("ego network matches a shortest-path oracle on random graphs") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    Rng sub = rng.split(trial);
    std::size_t n = 2 + sub.uniform_index(49);
    AttributedGraph g = random_graph(n, 0.15, sub);
    NodeId center = static_cast<NodeId>(sub.uniform_index(n));
    std::size_t hops = 1 + sub.uniform_index(3);
    EgoNetwork ego = build_ego_network(g, center, hops);

    auto dist = bfs_distances(g, center);
    std::set<NodeId> expected;
    for (NodeId v = 0; v < n; ++v)
      if (dist[v] >= 0 && dist[v] <= static_cast<int>(hops))
        expected.insert(v);
    CHECK(std::set<NodeId>(ego.nodes.begin(), ego.nodes.end()) == expected);
    CHECK(ego.nodes.front() == center);
    CHECK(ego.center == center);

    // Edge set equals the induced subgraph in local indices.
    std::set<Edge> expected_edges;
    std::vector<std::size_t> local(n, SIZE_MAX);
    for (std::size_t i = 0; i < ego.nodes.size(); ++i) local[ego.nodes[i]] = i;
    for (const auto& [u, v] : g.edges)
      if (local[u] != SIZE_MAX && local[v] != SIZE_MAX) {
        NodeId a = static_cast<NodeId>(std::min(local[u], local[v]));
        NodeId b = static_cast<NodeId>(std::max(local[u], local[v]));
        expected_edges.insert({a, b});
      }
    CHECK(std::set<Edge>(ego.edges.begin(), ego.edges.end()) ==
          expected_edges);

    // Attributes are the gathered rows.
    for (std::size_t i = 0; i < ego.nodes.size(); ++i)
      for (std::size_t j = 0; j < g.feature_dim(); ++j)
        CHECK(ego.attributes.at(i, j) == g.attributes.at(ego.nodes[i], j));
  }
}

TEST_CASE("ego network cap limits fan-out deterministically") {
  // Star: center 0 with 20 leaves.
  std::vector<Edge> edges;
  for (NodeId v = 1; v <= 20; ++v) edges.emplace_back(0, v);
  AttributedGraph g = make_graph(21, std::move(edges));

  EgoNetwork capped = build_ego_network(g, 0, 1, 5, 42);
  CHECK(capped.nodes.size() == 6);  // center + cap
  EgoNetwork again = build_ego_network(g, 0, 1, 5, 42);
  CHECK(capped.nodes == again.nodes);
  EgoNetwork other = build_ego_network(g, 0, 1, 5, 43);
  CHECK(other.nodes.size() == 6);

  EgoNetwork uncapped = build_ego_network(g, 0, 1);
  CHECK(uncapped.nodes.size() == 21);
}

TEST_CASE("ego network rejects bad arguments") {
  AttributedGraph g = make_graph(3, {{0, 1}});
  CHECK_THROWS_AS(build_ego_network(g, 9, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_ego_network(g, 0, 0), std::invalid_argument);
}

TEST_CASE("graph file round trip") {
  TempDir dir;
  Rng rng(5);
  AttributedGraph g = random_graph(12, 0.3, rng);
  g.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  g.num_classes = 3;
  g.finalize();

  auto e = (dir.path / "e.tsv").string();
  auto a = (dir.path / "a.csv").string();
  auto l = (dir.path / "l.txt").string();
  save_graph(g, e, a, l);
  AttributedGraph back = load_graph(e, a, l);

  CHECK(back.num_nodes == g.num_nodes);
  CHECK(back.edges == g.edges);
  CHECK(back.labels == g.labels);
  CHECK(back.num_classes == 3);
  REQUIRE(back.attributes.size() == g.attributes.size());
  for (std::size_t i = 0; i < g.attributes.size(); ++i)
    CHECK(back.attributes[i] == g.attributes[i]);  // 17 digits round-trip
}

TEST_CASE("loader reports malformed input with line numbers") {
  TempDir dir;
  auto attrs = dir.file("a.csv", "1.0,2.0\n3.0,4.0\n");
  auto labels = dir.file("l.txt", "0\n1\n");
  auto edges = dir.file("e.tsv", "0\t1\n");

  SUBCASE("valid baseline") {
    AttributedGraph g = load_graph(edges, attrs, labels);
    CHECK(g.num_nodes == 2);
    CHECK(g.edges == std::vector<Edge>{{0, 1}});
  }
  SUBCASE("duplicate and reversed edges deduplicate") {
    auto dup = dir.file("dup.tsv", "0\t1\n1\t0\n0\t1\n");
    CHECK(load_graph(dup, attrs, labels).edges ==
          std::vector<Edge>{{0, 1}});
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_graph(dir.file("x", "") + ".nope", attrs, labels),
                    std::invalid_argument);
  }
  SUBCASE("malformed edge id carries file and line") {
    auto bad = dir.file("bad.tsv", "0\t1\nzero\t1\n");
    CHECK_THROWS_WITH_AS(load_graph(bad, attrs, labels),
                         doctest::Contains("bad.tsv:2"),
                         std::invalid_argument);
  }
  SUBCASE("edge line without a tab") {
    auto bad = dir.file("notab.tsv", "0 1\n");
    CHECK_THROWS_WITH_AS(load_graph(bad, attrs, labels),
                         doctest::Contains("notab.tsv:1"),
                         std::invalid_argument);
  }
  SUBCASE("self-loop edge") {
    auto bad = dir.file("loop.tsv", "1\t1\n");
    CHECK_THROWS_WITH_AS(load_graph(bad, attrs, labels),
                         doctest::Contains("self-loop"),
                         std::invalid_argument);
  }
  SUBCASE("edge id out of range") {
    auto bad = dir.file("oor.tsv", "0\t7\n");
    CHECK_THROWS_WITH_AS(load_graph(bad, attrs, labels),
                         doctest::Contains("out of range"),
                         std::invalid_argument);
  }
  SUBCASE("malformed attribute value") {
    auto bad = dir.file("bad.csv", "1.0,2.0\n3.0,oops\n");
    CHECK_THROWS_WITH_AS(load_graph(edges, bad, labels),
                         doctest::Contains("bad.csv:2"),
                         std::invalid_argument);
  }
  SUBCASE("inconsistent attribute columns") {
    auto bad = dir.file("ragged.csv", "1.0,2.0\n3.0\n");
    CHECK_THROWS_WITH_AS(load_graph(edges, bad, labels),
                         doctest::Contains("ragged.csv:2"),
                         std::invalid_argument);
  }
  SUBCASE("label and attribute counts disagree") {
    auto bad = dir.file("short.txt", "0\n");
    CHECK_THROWS_AS(load_graph(edges, attrs, bad), std::invalid_argument);
  }
  SUBCASE("negative label") {
    auto bad = dir.file("neg.txt", "0\n-2\n");
    CHECK_THROWS_WITH_AS(load_graph(edges, attrs, bad),
                         doctest::Contains("negative label"),
                         std::invalid_argument);
  }
}
