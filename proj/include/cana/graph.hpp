#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cana/rng.hpp"
#include "cana/tensor.hpp"

namespace cana::graph {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;  // stored with first < second

/// Undirected attributed graph G = (V, E, X) with per-node class labels.
/// Immutable after construction; adjacency lists are built once.
struct AttributedGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;            // unordered pairs, stored once, sorted
  num::Tensor attributes;             // num_nodes x d
  std::vector<int> labels;            // -1 marks injected (sentinel) nodes
  int num_classes = 0;
  std::vector<std::vector<NodeId>> adj;

  std::size_t feature_dim() const { return attributes.cols(); }
  std::size_t degree(NodeId v) const { return adj[v].size(); }

  /// Validates invariants and builds adjacency. Throws std::invalid_argument
  /// on self-loops, out-of-range endpoints, or dimension mismatches.
  void finalize();
};

struct AttackBudget {
  std::size_t node_budget = 1;
  std::size_t edge_budget = 1;   // per injected node
  double feature_lo = -1.0;
  double feature_hi = 1.0;

  void validate() const;
};

/// Base graph plus injected nodes. Injected node i has global id
/// base->num_nodes + i.
struct PerturbedGraph {
  const AttributedGraph* base = nullptr;
  std::size_t injected_count = 0;
  num::Tensor injected_attributes;    // injected_count x d
  std::vector<Edge> injected_edges;   // (injected global id, endpoint)
  AttackBudget budget;

  NodeId injected_global_id(std::size_t i) const {
    return static_cast<NodeId>(base->num_nodes + i);
  }

  /// Checks budgets: per-node degree in [1, edge_budget], attributes inside
  /// the feature range, injected_count within the node budget.
  void validate() const;
};

/// Merged view of a PerturbedGraph as a plain AttributedGraph. Injected
/// nodes get label -1. Validates the perturbation first.
AttributedGraph materialize(const PerturbedGraph& perturbed);

/// Induced subgraph on a center node and its <= L hop neighborhood.
/// Node 0 of `nodes` is the center; `edges` use local indices.
struct EgoNetwork {
  NodeId center = 0;
  std::vector<NodeId> nodes;          // global ids, BFS order, center first
  std::vector<Edge> edges;            // local indices into `nodes`
  num::Tensor attributes;             // |nodes| x d
};

/// BFS out to `hops` levels. When `cap` is set, at most `cap` unvisited
/// neighbors are kept per expanded node, sampled with `seed` (deterministic).
/// Ties and orderings follow ascending node id.
EgoNetwork build_ego_network(const AttributedGraph& g, NodeId center,
                             std::size_t hops,
                             std::optional<std::size_t> cap = std::nullopt,
                             std::uint64_t seed = 0);

/// Loads the three-file on-disk format: tab-separated edge list, CSV
/// attribute matrix, one label per line. Duplicate and reversed edges are
/// deduplicated; self-loops and malformed lines are errors (with line
/// numbers).
AttributedGraph load_graph(const std::string& edge_path,
                           const std::string& attr_path,
                           const std::string& label_path);

void save_graph(const AttributedGraph& g, const std::string& edge_path,
                const std::string& attr_path, const std::string& label_path);

}  // namespace cana::graph
