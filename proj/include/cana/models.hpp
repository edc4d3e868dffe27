#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cana/autodiff.hpp"
#include "cana/graph.hpp"
#include "cana/optim.hpp"
#include "cana/rng.hpp"

namespace cana::models {

using graph::AttributedGraph;
using graph::EgoNetwork;
using num::Bindings;
using num::ParamStore;
using num::Tape;
using num::Tensor;
using num::Var;

/// Symmetrically normalized adjacency with self loops,
/// D^{-1/2} (A + I) D^{-1/2}, as a dense matrix.
Tensor normalized_adjacency(const AttributedGraph& g);

/// Two-layer GCN node classifier: logits = A_hat relu(A_hat X W1) W2.
struct SurrogateModel {
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  int num_classes = 0;
  ParamStore params;  // W1, W2

  static SurrogateModel init(std::size_t in_dim, std::size_t hidden,
                             int num_classes, num::Rng& rng);
};

/// Tape forward through the GCN; `a_hat` and `x` are tape vars so gradients
/// can flow to injected attribute rows. Returns the n x k logits var.
Var gcn_forward(Tape& tape, SurrogateModel& model, Var a_hat, Var x,
                Bindings& bind);

/// Convenience eval-only forward on a plain graph.
Tensor gcn_logits(SurrogateModel& model, const AttributedGraph& g);

std::vector<int> predict_classes(const Tensor& logits);

/// Fraction of `nodes` whose argmax logit matches its label.
double accuracy(const Tensor& logits, const std::vector<std::size_t>& nodes,
                const std::vector<int>& labels);

struct TrainOptions {
  std::size_t epochs = 200;
  double lr = 1e-2;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;
  // FLAG-style adversarial training; ascent_steps == 0 is plain training.
  std::size_t ascent_steps = 0;
  double ascent_step_size = 0.0;
};

/// Cross-entropy training on the clean graph. With ascent_steps > 0, each
/// epoch first accumulates a sign-gradient attribute perturbation over the
/// train rows (per-entry magnitude <= ascent_steps * step_size) and descends
/// on the perturbed attributes.
SurrogateModel train_surrogate(const AttributedGraph& g,
                               const std::vector<std::size_t>& train_mask,
                               const TrainOptions& opt);

inline SurrogateModel pretrain_surrogate(
    const AttributedGraph& g, const std::vector<std::size_t>& train_mask,
    std::size_t epochs, double lr, std::uint64_t seed,
    std::size_t hidden = 64) {
  TrainOptions opt;
  opt.epochs = epochs;
  opt.lr = lr;
  opt.seed = seed;
  opt.hidden = hidden;
  return train_surrogate(g, train_mask, opt);
}

enum class GinMode { discriminator, representation };

/// Two GIN layers (each a 2-layer MLP with a trainable epsilon) with sum
/// readout per layer. The discriminator head is an MLP + sigmoid over the
/// concatenated pooled vectors; the representation head is a linear
/// classifier over the same.
struct GinModel {
  GinMode mode = GinMode::representation;
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  int num_classes = 0;  // representation mode only
  ParamStore params;

  static GinModel init(GinMode mode, std::size_t in_dim, std::size_t hidden,
                       int num_classes, num::Rng& rng);

  std::size_t embedding_dim() const { return 2 * hidden; }
};

struct GinOutput {
  std::vector<Var> pooled;  // one 1 x hidden row per layer
  Var embedding;            // concatenated pooled rows, 1 x 2*hidden
  Var head;                 // disc: 1x1 sigmoid; rep: 1 x k logits
  Var head_logit;           // disc only: pre-sigmoid 1x1 logit
};

/// Forward over one ego network given its node feature var (|nodes| x d)
/// and local edge list.
GinOutput gin_forward(Tape& tape, GinModel& model, Var node_feats,
                      const std::vector<graph::Edge>& local_edges,
                      Bindings& bind);

GinOutput gin_forward(Tape& tape, GinModel& model, const EgoNetwork& ego,
                      Bindings& bind);

/// Eval-only embedding (concatenated per-layer pooled vectors) of one ego.
Tensor gin_embed(GinModel& model, const EgoNetwork& ego);

struct EgoOptions {
  std::size_t hops = 2;
  std::optional<std::size_t> cap = 32;  // per-hop neighbor cap
  std::uint64_t seed = 0;
};

/// Trains a representation-mode GIN to classify each ego network by its
/// center node's label. Returns the trained model.
GinModel pretrain_representation(const AttributedGraph& g, std::size_t epochs,
                                 double lr, std::uint64_t seed,
                                 std::size_t hidden = 64,
                                 const EgoOptions& ego_opt = {});

}  // namespace cana::models
