#include "cana/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cana::graph {
namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

Edge make_edge(NodeId a, NodeId b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

}  // namespace

void AttributedGraph::finalize() {
  if (attributes.rows() != num_nodes)
    fail("graph: attribute row count != num_nodes");
  if (labels.size() != num_nodes) fail("graph: label count != num_nodes");
  for (int y : labels) {
    if (y != -1 && (y < 0 || y >= num_classes))
      fail("graph: label out of range");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  adj.assign(num_nodes, {});
  for (const auto& [u, v] : edges) {
    if (u == v) fail("graph: self-loop");
    if (u >= num_nodes || v >= num_nodes) fail("graph: edge endpoint out of range");
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
}

void AttackBudget::validate() const {
  if (node_budget < 1) fail("budget: node_budget must be >= 1");
  if (edge_budget < 1) fail("budget: edge_budget must be >= 1");
  if (!(feature_lo < feature_hi)) fail("budget: feature range lo >= hi");
}

void PerturbedGraph::validate() const {
  if (!base) fail("perturbation: missing base graph");
  budget.validate();
  if (injected_count > budget.node_budget)
    fail("perturbation: node budget exceeded");
  if (injected_attributes.rows() != injected_count ||
      (injected_count > 0 &&
       injected_attributes.cols() != base->feature_dim()))
    fail("perturbation: attribute shape mismatch");
  for (double x : injected_attributes.v) {
    if (!(x >= budget.feature_lo && x <= budget.feature_hi))
      fail("perturbation: injected attribute outside feature range");
  }
  const std::size_t total = base->num_nodes + injected_count;
  std::vector<std::size_t> degree(injected_count, 0);
  for (const auto& [u, v] : injected_edges) {
    if (u == v) fail("perturbation: self-loop on injected edge");
    if (u >= total || v >= total)
      fail("perturbation: injected edge endpoint out of range");
    if (u < base->num_nodes && v < base->num_nodes)
      fail("perturbation: injected edge must touch an injected node");
    if (u >= base->num_nodes) ++degree[u - base->num_nodes];
    if (v >= base->num_nodes) ++degree[v - base->num_nodes];
  }
  for (std::size_t i = 0; i < injected_count; ++i) {
    if (degree[i] < 1) fail("perturbation: injected node with degree 0");
    if (degree[i] > budget.edge_budget)
      fail("perturbation: edge budget exceeded");
  }
}

AttributedGraph materialize(const PerturbedGraph& perturbed) {
  perturbed.validate();
  const AttributedGraph& base = *perturbed.base;
  AttributedGraph out;
  out.num_nodes = base.num_nodes + perturbed.injected_count;
  out.num_classes = base.num_classes;
  out.edges = base.edges;
  for (const auto& [u, v] : perturbed.injected_edges)
    out.edges.push_back(make_edge(u, v));
  out.attributes = num::Tensor(out.num_nodes, base.feature_dim());
  std::copy(base.attributes.v.begin(), base.attributes.v.end(),
            out.attributes.v.begin());
  std::copy(perturbed.injected_attributes.v.begin(),
            perturbed.injected_attributes.v.end(),
            out.attributes.v.begin() + base.attributes.size());
  out.labels = base.labels;
  out.labels.resize(out.num_nodes, -1);
  out.finalize();
  return out;
}

EgoNetwork build_ego_network(const AttributedGraph& g, NodeId center,
                             std::size_t hops,
                             std::optional<std::size_t> cap,
                             std::uint64_t seed) {
  if (center >= g.num_nodes) fail("ego: center out of range");
  if (hops < 1) fail("ego: hops must be >= 1");

  std::vector<bool> visited(g.num_nodes, false);
  std::vector<NodeId> order{center};
  visited[center] = true;
  num::Rng rng = num::Rng(seed).split("ego").split(center);

  std::size_t frontier_begin = 0;
  for (std::size_t hop = 0; hop < hops; ++hop) {
    const std::size_t frontier_end = order.size();
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      std::vector<NodeId> fresh;
      for (NodeId u : g.adj[order[i]]) {
        if (!visited[u]) fresh.push_back(u);
      }
      if (cap && fresh.size() > *cap) {
        auto pick = rng.sample_without_replacement(fresh.size(), *cap);
        std::sort(pick.begin(), pick.end());
        std::vector<NodeId> kept;
        kept.reserve(*cap);
        for (std::size_t p : pick) kept.push_back(fresh[p]);
        fresh = std::move(kept);
      }
      for (NodeId u : fresh) {
        visited[u] = true;
        order.push_back(u);
      }
    }
    frontier_begin = frontier_end;
  }

  EgoNetwork ego;
  ego.center = center;
  ego.nodes = std::move(order);
  std::vector<std::uint32_t> local(g.num_nodes, UINT32_MAX);
  for (std::size_t i = 0; i < ego.nodes.size(); ++i)
    local[ego.nodes[i]] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < ego.nodes.size(); ++i) {
    for (NodeId u : g.adj[ego.nodes[i]]) {
      if (local[u] != UINT32_MAX && local[u] > i)
        ego.edges.emplace_back(static_cast<NodeId>(i), local[u]);
    }
  }
  std::sort(ego.edges.begin(), ego.edges.end());
  ego.attributes = num::Tensor(ego.nodes.size(), g.feature_dim());
  for (std::size_t i = 0; i < ego.nodes.size(); ++i)
    for (std::size_t j = 0; j < g.feature_dim(); ++j)
      ego.attributes.at(i, j) = g.attributes.at(ego.nodes[i], j);
  return ego;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

long parse_int(const std::string& tok, const std::string& path,
               std::size_t lineno) {
  long out = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    fail(path + ":" + std::to_string(lineno) + ": malformed integer '" + tok +
         "'");
  return out;
}

}  // namespace

AttributedGraph load_graph(const std::string& edge_path,
                           const std::string& attr_path,
                           const std::string& label_path) {
  AttributedGraph g;

  // Attributes: CSV, one node per row.
  std::vector<std::vector<double>> rows;
  {
    auto lines = read_lines(attr_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      std::vector<double> row;
      std::stringstream ss(lines[i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          std::size_t pos = 0;
          row.push_back(std::stod(tok, &pos));
          if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          fail(attr_path + ":" + std::to_string(i + 1) +
               ": malformed value '" + tok + "'");
        }
      }
      if (!rows.empty() && row.size() != rows.front().size())
        fail(attr_path + ":" + std::to_string(i + 1) +
             ": inconsistent column count");
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) fail(attr_path + ": no attribute rows");
  g.num_nodes = rows.size();
  g.attributes = num::Tensor(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      g.attributes.at(i, j) = rows[i][j];

  // Labels: one integer per line.
  {
    auto lines = read_lines(label_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      g.labels.push_back(
          static_cast<int>(parse_int(lines[i], label_path, i + 1)));
    }
  }
  if (g.labels.size() != g.num_nodes)
    fail("label count (" + std::to_string(g.labels.size()) +
         ") != attribute row count (" + std::to_string(g.num_nodes) + ")");
  int max_label = 0;
  for (int y : g.labels) {
    if (y < 0) fail(label_path + ": negative label");
    max_label = std::max(max_label, y);
  }
  g.num_classes = max_label + 1;

  // Edges: tab-separated pairs, symmetric dedup.
  {
    auto lines = read_lines(edge_path);
    std::set<Edge> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto tab = lines[i].find('\t');
      if (tab == std::string::npos)
        fail(edge_path + ":" + std::to_string(i + 1) + ": expected two ids");
      const long a = parse_int(lines[i].substr(0, tab), edge_path, i + 1);
      const long b = parse_int(lines[i].substr(tab + 1), edge_path, i + 1);
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= g.num_nodes ||
          static_cast<std::size_t>(b) >= g.num_nodes)
        fail(edge_path + ":" + std::to_string(i + 1) + ": id out of range");
      if (a == b)
        fail(edge_path + ":" + std::to_string(i + 1) + ": self-loop");
      seen.insert(make_edge(static_cast<NodeId>(a), static_cast<NodeId>(b)));
    }
    g.edges.assign(seen.begin(), seen.end());
  }

  g.finalize();
  return g;
}

void save_graph(const AttributedGraph& g, const std::string& edge_path,
                const std::string& attr_path, const std::string& label_path) {
  std::ofstream e(edge_path), a(attr_path), l(label_path);
  if (!e || !a || !l) fail("cannot open output file for graph");
  for (const auto& [u, v] : g.edges) e << u << '\t' << v << '\n';
  a.precision(17);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (std::size_t j = 0; j < g.feature_dim(); ++j) {
      if (j) a << ',';
      a << g.attributes.at(i, j);
    }
    a << '\n';
  }
  for (int y : g.labels) l << y << '\n';
}

}  // namespace cana::graph
