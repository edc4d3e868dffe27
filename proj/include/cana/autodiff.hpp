#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "cana/tensor.hpp"

namespace cana::num {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Each operation records its forward value and a
/// closure that scatters the node's adjoint into its parents. backward()
/// walks the tape in reverse creation order, which is a valid topological
/// order by construction.
class Tape {
 public:
  Var input(Tensor t);
  Var input(const Tensor& t, bool copy) = delete;

  const Tensor& value(Var x) const { return nodes_[x.id].value; }
  const Tensor& grad(Var x) const { return nodes_[x.id].grad; }

  /// Seeds d(loss)/d(loss) = 1 and accumulates adjoints for every node.
  /// `loss` must be a scalar (shape {1} or {1,1}).
  void backward(Var loss);

  // -- elementwise / shape ops -------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var log(Var a);
  Var sqrt_safe(Var a);  // d/dx at x<=eps is 0
  Var softplus(Var a);   // log(1 + exp(x)), overflow-safe
  Var reciprocal(Var a); // 1 / x elementwise
  Var clamp(Var a, double lo, double hi);

  // -- linear algebra ----------------------------------------------------
  Var matmul(Var a, Var b);
  Var add_rowvec(Var a, Var bias);       // bias {1,c} broadcast over rows
  Var scale_by_scalar(Var a, Var s);     // s is a 1-element var
  Var softmax_rows(Var a);
  Var rowsum(Var a);                     // {r,c} -> {r,1}
  Var colsum(Var a);                     // {r,c} -> {1,c}
  Var sum(Var a);                        // scalar
  Var mean(Var a);                       // scalar
  Var concat_rows(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var gather_rows(Var a, std::vector<std::size_t> idx);

  /// out[v] = sum of h[u] over undirected edges {u,v} in `edges`
  /// (local indices into h's rows).
  Var neighbor_sum(Var h,
                   std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);

  /// Mean over `rows` of logsumexp(logits[r]) - logits[r][labels[r]].
  Var cross_entropy(Var logits, const std::vector<int>& labels,
                    std::vector<std::size_t> rows);

  /// Mean over targets of probs[t][y_t] - max_{j != y_t} probs[t][j].
  Var cw_margin_mean(Var probs, std::vector<std::size_t> targets,
                     const std::vector<int>& labels);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, const Tensor&)> back;  // adjoint scatter
  };

  Var emplace(Tensor value, std::function<void(Tape&, const Tensor&)> back);
  Tensor& grad_buf(int id);

  std::vector<Node> nodes_;
};

}  // namespace cana::num
