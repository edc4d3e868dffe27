#include "cana/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cana::models {
namespace {

Tensor glorot(std::size_t rows, std::size_t cols, num::Rng& rng) {
  Tensor t(rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Tensor normalized_adjacency(const AttributedGraph& g) {
  const std::size_t n = g.num_nodes;
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i)
    dinv[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) = dinv[i] * dinv[i];
  for (const auto& [u, v] : g.edges) {
    a.at(u, v) = dinv[u] * dinv[v];
    a.at(v, u) = dinv[u] * dinv[v];
  }
  return a;
}

SurrogateModel SurrogateModel::init(std::size_t in_dim, std::size_t hidden,
                                    int num_classes, num::Rng& rng) {
  SurrogateModel m;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.num_classes = num_classes;
  m.params.add("W1", glorot(in_dim, hidden, rng));
  m.params.add("W2",
               glorot(hidden, static_cast<std::size_t>(num_classes), rng));
  return m;
}

Var gcn_forward(Tape& tape, SurrogateModel& model, Var a_hat, Var x,
                Bindings& bind) {
  num::require(tape.value(x).cols() == model.in_dim,
               "gcn_forward: feature width mismatch");
  Var w1 = bind.bind(tape, model.params.get("W1"));
  Var w2 = bind.bind(tape, model.params.get("W2"));
  Var h = tape.relu(tape.matmul(tape.matmul(a_hat, x), w1));
  return tape.matmul(tape.matmul(a_hat, h), w2);
}

Tensor gcn_logits(SurrogateModel& model, const AttributedGraph& g) {
  Tape tape;
  Bindings bind;
  Var a = tape.input(normalized_adjacency(g));
  Var x = tape.input(g.attributes);
  return tape.value(gcn_forward(tape, model, a, x, bind));
}

std::vector<int> predict_classes(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits.at(r, j) > logits.at(r, best)) best = j;
    out[r] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Tensor& logits, const std::vector<std::size_t>& nodes,
                const std::vector<int>& labels) {
  num::require(!nodes.empty(), "accuracy: empty node set");
  auto pred = predict_classes(logits);
  std::size_t correct = 0;
  for (std::size_t v : nodes)
    if (pred[v] == labels[v]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

SurrogateModel train_surrogate(const AttributedGraph& g,
                               const std::vector<std::size_t>& train_mask,
                               const TrainOptions& opt) {
  num::require(!train_mask.empty(), "train_surrogate: empty train mask");
  num::Rng rng = num::Rng(opt.seed).split("surrogate");
  SurrogateModel model =
      SurrogateModel::init(g.feature_dim(), opt.hidden, g.num_classes, rng);
  const Tensor a_hat = normalized_adjacency(g);

  double last_loss = 0.0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Tensor x_in = g.attributes;
    if (opt.ascent_steps > 0) {
      // FLAG: accumulate a sign-gradient perturbation on the inputs.
      Tensor delta(g.attributes.shape);
      for (std::size_t step = 0; step < opt.ascent_steps; ++step) {
        Tape tape;
        Bindings bind;
        Var a = tape.input(a_hat);
        Tensor perturbed = g.attributes;
        for (std::size_t i = 0; i < perturbed.size(); ++i)
          perturbed[i] += delta[i];
        Var x = tape.input(std::move(perturbed));
        Var logits = gcn_forward(tape, model, a, x, bind);
        Var loss = tape.cross_entropy(logits, g.labels, train_mask);
        tape.backward(loss);
        const Tensor& gx = tape.grad(x);
        for (std::size_t i = 0; i < delta.size(); ++i) {
          if (gx[i] > 0.0)
            delta[i] += opt.ascent_step_size;
          else if (gx[i] < 0.0)
            delta[i] -= opt.ascent_step_size;
        }
      }
      for (std::size_t i = 0; i < x_in.size(); ++i) x_in[i] += delta[i];
    }

    Tape tape;
    Bindings bind;
    Var a = tape.input(a_hat);
    Var x = tape.input(std::move(x_in));
    Var logits = gcn_forward(tape, model, a, x, bind);
    Var loss = tape.cross_entropy(logits, g.labels, train_mask);
    tape.backward(loss);
    last_loss = tape.value(loss)[0];
    if (!std::isfinite(last_loss))
      throw std::runtime_error("train_surrogate: loss diverged");
    bind.accumulate(tape);
    model.params.adam_step(opt.lr);
  }
  (void)last_loss;
  return model;
}

GinModel GinModel::init(GinMode mode, std::size_t in_dim, std::size_t hidden,
                        int num_classes, num::Rng& rng) {
  GinModel m;
  m.mode = mode;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.num_classes = num_classes;
  for (int l = 0; l < 2; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    const std::size_t in = l == 0 ? in_dim : hidden;
    m.params.add(p + "W1", glorot(in, hidden, rng));
    m.params.add(p + "b1", Tensor(1, hidden));
    m.params.add(p + "W2", glorot(hidden, hidden, rng));
    m.params.add(p + "b2", Tensor(1, hidden));
    m.params.add(p + "eps", Tensor::scalar(0.0));
  }
  const std::size_t emb = 2 * hidden;
  if (mode == GinMode::discriminator) {
    m.params.add("head.W1", glorot(emb, hidden, rng));
    m.params.add("head.b1", Tensor(1, hidden));
    m.params.add("head.W2", glorot(hidden, 1, rng));
    m.params.add("head.b2", Tensor(1, 1));
  } else {
    m.params.add("head.W",
                 glorot(emb, static_cast<std::size_t>(num_classes), rng));
    m.params.add("head.b", Tensor(1, static_cast<std::size_t>(num_classes)));
  }
  return m;
}

GinOutput gin_forward(Tape& tape, GinModel& model, Var node_feats,
                      const std::vector<graph::Edge>& local_edges,
                      Bindings& bind) {
  num::require(tape.value(node_feats).rows() > 0, "gin_forward: empty ego");
  num::require(tape.value(node_feats).cols() == model.in_dim,
               "gin_forward: feature width mismatch");
  GinOutput out;
  Var h = node_feats;
  for (int l = 0; l < 2; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    Var w1 = bind.bind(tape, model.params.get(p + "W1"));
    Var b1 = bind.bind(tape, model.params.get(p + "b1"));
    Var w2 = bind.bind(tape, model.params.get(p + "W2"));
    Var b2 = bind.bind(tape, model.params.get(p + "b2"));
    Var eps = bind.bind(tape, model.params.get(p + "eps"));
    // (1 + eps) h + sum of neighbor features
    Var agg = tape.add(tape.add(h, tape.scale_by_scalar(h, eps)),
                       tape.neighbor_sum(h, local_edges));
    Var z = tape.relu(tape.add_rowvec(tape.matmul(agg, w1), b1));
    h = tape.relu(tape.add_rowvec(tape.matmul(z, w2), b2));
    out.pooled.push_back(tape.colsum(h));
  }
  out.embedding = tape.concat_cols(out.pooled[0], out.pooled[1]);
  if (model.mode == GinMode::discriminator) {
    Var w1 = bind.bind(tape, model.params.get("head.W1"));
    Var b1 = bind.bind(tape, model.params.get("head.b1"));
    Var w2 = bind.bind(tape, model.params.get("head.W2"));
    Var b2 = bind.bind(tape, model.params.get("head.b2"));
    Var z = tape.relu(tape.add_rowvec(tape.matmul(out.embedding, w1), b1));
    out.head_logit = tape.add_rowvec(tape.matmul(z, w2), b2);
    out.head = tape.sigmoid(out.head_logit);
  } else {
    Var w = bind.bind(tape, model.params.get("head.W"));
    Var b = bind.bind(tape, model.params.get("head.b"));
    out.head = tape.add_rowvec(tape.matmul(out.embedding, w), b);
  }
  return out;
}

GinOutput gin_forward(Tape& tape, GinModel& model, const EgoNetwork& ego,
                      Bindings& bind) {
  Var x = tape.input(ego.attributes);
  return gin_forward(tape, model, x, ego.edges, bind);
}

Tensor gin_embed(GinModel& model, const EgoNetwork& ego) {
  Tape tape;
  Bindings bind;
  return tape.value(gin_forward(tape, model, ego, bind).embedding);
}

GinModel pretrain_representation(const AttributedGraph& g, std::size_t epochs,
                                 double lr, std::uint64_t seed,
                                 std::size_t hidden,
                                 const EgoOptions& ego_opt) {
  num::Rng init_rng = num::Rng(seed).split("representation");
  GinModel model = GinModel::init(GinMode::representation, g.feature_dim(),
                                  hidden, g.num_classes, init_rng);
  std::vector<EgoNetwork> egos;
  egos.reserve(g.num_nodes);
  for (graph::NodeId v = 0; v < g.num_nodes; ++v)
    egos.push_back(build_ego_network(g, v, ego_opt.hops, ego_opt.cap,
                                     ego_opt.seed));

  constexpr std::size_t kBatch = 32;
  num::Rng shuffle_rng = init_rng.split("shuffle");
  const std::vector<int> zero{0};
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto order = shuffle_rng.permutation(g.num_nodes);
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const std::size_t end = std::min(start + kBatch, order.size());
      Tape tape;
      Bindings bind;
      Var total{};
      for (std::size_t i = start; i < end; ++i) {
        const EgoNetwork& ego = egos[order[i]];
        GinOutput out = gin_forward(tape, model, ego, bind);
        std::vector<int> label{g.labels[ego.center]};
        Var nll = tape.cross_entropy(out.head, label, {0});
        total = total.valid() ? tape.add(total, nll) : nll;
      }
      Var loss = tape.scale(total, 1.0 / static_cast<double>(end - start));
      tape.backward(loss);
      if (!std::isfinite(tape.value(loss)[0]))
        throw std::runtime_error("pretrain_representation: loss diverged");
      bind.accumulate(tape);
      model.params.adam_step(lr);
    }
  }
  return model;
}

}  // namespace cana::models
