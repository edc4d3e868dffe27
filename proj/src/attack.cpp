#include "cana/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cana::attack {
namespace {

std::vector<NodeId> two_hop_neighborhood(const AttributedGraph& g,
                                         NodeId center) {
  std::set<NodeId> seen;
  for (NodeId u : g.adj[center]) {
    seen.insert(u);
    for (NodeId w : g.adj[u]) {
      if (w != center) seen.insert(w);
    }
  }
  return {seen.begin(), seen.end()};
}

}  // namespace

InjectionPlan select_edges(const AttributedGraph& g,
                           const std::vector<NodeId>& targets,
                           const AttackBudget& budget, EdgeStrategy strategy,
                           std::uint64_t seed) {
  num::require(!targets.empty(), "select_edges: empty target set");
  budget.validate();
  num::Rng rng = num::Rng(seed).split("select_edges");

  InjectionPlan plan;
  plan.endpoints.resize(budget.node_budget);
  for (std::size_t j = 0; j < budget.node_budget; ++j) {
    const NodeId target = targets[j % targets.size()];
    auto& eps = plan.endpoints[j];
    eps.push_back(target);

    std::vector<NodeId> candidates = two_hop_neighborhood(g, target);
    std::erase(candidates, target);
    while (eps.size() < budget.edge_budget && !candidates.empty()) {
      std::size_t pick = 0;
      if (strategy == EdgeStrategy::direct) {
        pick = rng.uniform_index(candidates.size());
      } else {
        // Defective: highest 1/deg first, ties by ascending id. Candidates
        // are sorted by id, so the first strict-minimum-degree hit wins.
        for (std::size_t i = 1; i < candidates.size(); ++i)
          if (g.degree(candidates[i]) < g.degree(candidates[pick])) pick = i;
      }
      eps.push_back(candidates[pick]);
      candidates.erase(candidates.begin() +
                       static_cast<std::ptrdiff_t>(pick));
    }
  }
  return plan;
}

PerturbedGraph init_injection(const AttributedGraph& g,
                              const AttackBudget& budget,
                              const InjectionPlan& plan, std::uint64_t seed) {
  num::require(plan.injected_count() >= 1, "init_injection: empty plan");
  num::require(plan.injected_count() <= budget.node_budget,
               "init_injection: plan exceeds node budget");
  num::Rng rng = num::Rng(seed).split("init_injection");
  const std::size_t d = g.feature_dim();
  const double sigma = 0.01 * (budget.feature_hi - budget.feature_lo);

  PerturbedGraph pert;
  pert.base = &g;
  pert.budget = budget;
  pert.injected_count = plan.injected_count();
  pert.injected_attributes = Tensor(pert.injected_count, d);
  for (std::size_t i = 0; i < plan.endpoints.size(); ++i) {
    const auto& eps = plan.endpoints[i];
    num::require(!eps.empty(), "init_injection: injected node with no edges");
    const NodeId inj = pert.injected_global_id(i);
    for (NodeId e : eps) pert.injected_edges.emplace_back(inj, e);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (NodeId e : eps) mean += g.attributes.at(e, j);
      mean /= static_cast<double>(eps.size());
      const double x = mean + sigma * rng.normal();
      pert.injected_attributes.at(i, j) =
          std::clamp(x, budget.feature_lo, budget.feature_hi);
    }
  }
  pert.validate();
  return pert;
}

Var attack_loss_var(Tape& tape, SurrogateModel& surrogate, Bindings& bind,
                    const Tensor& a_hat, const Tensor& base_attrs, Var x_inj,
                    const std::vector<std::size_t>& targets,
                    const std::vector<int>& labels) {
  Var x_base = tape.input(base_attrs);
  Var x = tape.concat_rows(x_base, x_inj);
  Var a = tape.input(a_hat);
  Var logits = gcn_forward(tape, surrogate, a, x, bind);
  Var probs = tape.softmax_rows(logits);
  return tape.cw_margin_mean(probs, targets, labels);
}

double attack_loss(SurrogateModel& surrogate, const PerturbedGraph& perturbed,
                   const std::vector<std::size_t>& targets) {
  AttributedGraph merged = materialize(perturbed);
  Tape tape;
  Bindings bind;
  Var x_inj = tape.input(perturbed.injected_attributes);
  Var loss = attack_loss_var(tape, surrogate, bind,
                             models::normalized_adjacency(merged),
                             perturbed.base->attributes, x_inj, targets,
                             perturbed.base->labels);
  return tape.value(loss)[0];
}

PerturbedGraph pgd_attack(const AttributedGraph& g,
                          const std::vector<NodeId>& targets,
                          const AttackBudget& budget,
                          SurrogateModel& surrogate, std::size_t steps,
                          double lr, const InjectionPlan& plan,
                          std::uint64_t seed) {
  PerturbedGraph pert = init_injection(g, budget, plan, seed);
  // Edges are fixed by the plan, so the normalized adjacency is constant.
  const Tensor a_hat = models::normalized_adjacency(materialize(pert));
  std::vector<std::size_t> target_rows(targets.begin(), targets.end());

  // Adam-driven projected descent: per-coordinate normalization keeps the
  // step size meaningful even when the margin's softmax gradients vanish.
  num::ParamStore opt;
  num::Param& xp = opt.add("x_inj", pert.injected_attributes);
  for (std::size_t step = 0; step < steps; ++step) {
    Tape tape;
    Bindings bind_sur;  // surrogate grads are discarded; only x_inj steps
    Bindings bind_x;
    Var x_inj = bind_x.bind(tape, xp);
    Var loss = attack_loss_var(tape, surrogate, bind_sur, a_hat, g.attributes,
                               x_inj, target_rows, g.labels);
    tape.backward(loss);
    if (!tape.grad(x_inj).all_finite())
      throw std::runtime_error("pgd_attack: non-finite gradient");
    bind_x.accumulate(tape);
    opt.adam_step(lr);
    for (double& x : xp.value.v)
      x = std::clamp(x, budget.feature_lo, budget.feature_hi);
  }
  pert.injected_attributes = xp.value;
  pert.validate();
  return pert;
}

double misclassification_rate(const Tensor& logits,
                              const std::vector<std::size_t>& targets,
                              const std::vector<int>& labels) {
  num::require(!targets.empty(), "misclassification_rate: empty targets");
  auto pred = models::predict_classes(logits);
  std::size_t wrong = 0;
  for (std::size_t t : targets)
    if (pred[t] != labels[t]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(targets.size());
}

}  // namespace cana::attack
