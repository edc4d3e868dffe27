#pragma once

#include <cstdint>
#include <vector>

#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::attack {

using graph::AttackBudget;
using graph::AttributedGraph;
using graph::NodeId;
using graph::PerturbedGraph;
using models::SurrogateModel;
using num::Bindings;
using num::Tape;
using num::Tensor;
using num::Var;

enum class EdgeStrategy { direct, defective };

/// Edge endpoints per injected node, chosen before feature optimization.
struct InjectionPlan {
  std::vector<std::vector<NodeId>> endpoints;  // one list per injected node

  std::size_t injected_count() const { return endpoints.size(); }
};

/// Builds one injected node per unit of node budget. Targets are assigned
/// round-robin; each injected node connects to its first assigned target
/// plus (edge_budget - 1) extra endpoints from that target's 2-hop
/// neighborhood: sampled uniformly (`direct`) or lowest-degree-first
/// (`defective`, ties by ascending id).
InjectionPlan select_edges(const AttributedGraph& g,
                           const std::vector<NodeId>& targets,
                           const AttackBudget& budget, EdgeStrategy strategy,
                           std::uint64_t seed);

/// Injected attributes start at the mean of each node's endpoints plus
/// seeded Gaussian noise (sigma = 0.01 * range width), clamped into range.
PerturbedGraph init_injection(const AttributedGraph& g,
                              const AttackBudget& budget,
                              const InjectionPlan& plan, std::uint64_t seed);

/// CW-margin attack loss on the tape: mean over targets of
/// p_true - max_other, probabilities from the surrogate's softmax on the
/// materialized graph. `x_inj` are the trainable injected attribute rows.
Var attack_loss_var(Tape& tape, SurrogateModel& surrogate, Bindings& bind,
                    const Tensor& a_hat, const Tensor& base_attrs, Var x_inj,
                    const std::vector<std::size_t>& targets,
                    const std::vector<int>& labels);

/// Eval-only attack loss for a perturbation (a_hat from its materialization).
double attack_loss(SurrogateModel& surrogate, const PerturbedGraph& perturbed,
                   const std::vector<std::size_t>& targets);

/// Projected descent on the injected attributes (Adam steps, clamped into
/// the feature box); edges fixed by `plan`. steps = 0 or lr = 0 returns the
/// initialization unchanged.
PerturbedGraph pgd_attack(const AttributedGraph& g,
                          const std::vector<NodeId>& targets,
                          const AttackBudget& budget,
                          SurrogateModel& surrogate, std::size_t steps,
                          double lr, const InjectionPlan& plan,
                          std::uint64_t seed);

/// Mean over targets of 1(argmax logit != label); argmax ties break to the
/// lowest class id.
double misclassification_rate(const Tensor& logits,
                              const std::vector<std::size_t>& targets,
                              const std::vector<int>& labels);

}  // namespace cana::attack
