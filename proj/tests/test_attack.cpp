#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cana/attack.hpp"
#include "cana/harness.hpp"
#include "cana/models.hpp"

using namespace cana::attack;
using cana::graph::AttributedGraph;
using cana::graph::EgoNetwork;
using cana::num::Bindings;
using cana::num::Rng;
using cana::num::Tape;
using cana::num::Tensor;
using cana::num::Var;
using cana::models::SurrogateModel;

namespace {

struct Fixture {
  AttributedGraph g;
  SurrogateModel surrogate;
  std::vector<NodeId> targets;
  AttackBudget budget;

  Fixture() {
    cana::harness::SbmParams sp;
    sp.blocks = 2;
    sp.block_size = 12;
    sp.p_in = 0.35;
    sp.p_out = 0.04;
    sp.dim = 4;
    sp.seed = 17;
    g = cana::harness::generate_sbm(sp);
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < g.num_nodes; ++i) train.push_back(i);
    surrogate = cana::models::pretrain_surrogate(g, train, 80, 0.01, 3);
    targets = {1, 5, 14, 20};
    budget.node_budget = targets.size();
    budget.edge_budget = 3;
    const auto [lo, hi] =
        std::minmax_element(g.attributes.v.begin(), g.attributes.v.end());
    budget.feature_lo = *lo;
    budget.feature_hi = *hi;
  }

  std::set<NodeId> two_hop(NodeId t) const {
    std::set<NodeId> out{t};
    for (NodeId u : g.adj[t]) {
      out.insert(u);
      for (NodeId v : g.adj[u]) out.insert(v);
    }
    return out;
  }
};

}  // namespace

TEST_CASE("select_edges respects budget, round-robin, and 2-hop candidates") {
  Fixture f;
  for (EdgeStrategy s : {EdgeStrategy::direct, EdgeStrategy::defective}) {
    InjectionPlan plan = select_edges(f.g, f.targets, f.budget, s, 7);
    REQUIRE(plan.injected_count() == f.budget.node_budget);
    for (std::size_t i = 0; i < plan.endpoints.size(); ++i) {
      const auto& eps = plan.endpoints[i];
      REQUIRE(!eps.empty());
      CHECK(eps.size() <= f.budget.edge_budget);
      // Round-robin: injected node i's first endpoint is target i mod |T|.
      CHECK(eps.front() == f.targets[i % f.targets.size()]);
      std::set<NodeId> uniq(eps.begin(), eps.end());
      CHECK(uniq.size() == eps.size());
      auto hood = f.two_hop(eps.front());
      for (NodeId u : eps) CHECK(hood.count(u) == 1);
    }
  }
}

TEST_CASE("select_edges is deterministic and defective prefers low degree") {
  Fixture f;
  InjectionPlan a = select_edges(f.g, f.targets, f.budget,
                                 EdgeStrategy::direct, 7);
  InjectionPlan b = select_edges(f.g, f.targets, f.budget,
                                 EdgeStrategy::direct, 7);
  CHECK(a.endpoints == b.endpoints);

  InjectionPlan d = select_edges(f.g, f.targets, f.budget,
                                 EdgeStrategy::defective, 7);
  for (std::size_t i = 0; i < d.endpoints.size(); ++i) {
    const auto& eps = d.endpoints[i];
    // Extras are the lowest-degree candidates: no unpicked candidate may
    // have strictly smaller degree than a picked extra.
    auto hood = f.two_hop(eps.front());
    hood.erase(eps.front());
    std::set<NodeId> picked(eps.begin() + 1, eps.end());
    std::size_t worst_picked = 0;
    for (NodeId u : picked)
      worst_picked = std::max(worst_picked, f.g.degree(u));
    for (NodeId u : hood)
      if (!picked.count(u)) CHECK(f.g.degree(u) >= worst_picked);
  }

  SUBCASE("edge_budget 1 links each injected node only to its target") {
    AttackBudget one = f.budget;
    one.edge_budget = 1;
    InjectionPlan p = select_edges(f.g, f.targets, one,
                                   EdgeStrategy::direct, 7);
    for (std::size_t i = 0; i < p.endpoints.size(); ++i)
      CHECK(p.endpoints[i] ==
            std::vector<NodeId>{f.targets[i % f.targets.size()]});
  }
}

TEST_CASE("init_injection starts near endpoint means inside the range") {
  Fixture f;
  InjectionPlan plan = select_edges(f.g, f.targets, f.budget,
                                    EdgeStrategy::direct, 7);
  PerturbedGraph p = init_injection(f.g, f.budget, plan, 7);
  CHECK_NOTHROW(p.validate());
  CHECK(p.injected_count == plan.injected_count());
  CHECK(p.base == &f.g);

  const double width = f.budget.feature_hi - f.budget.feature_lo;
  for (std::size_t i = 0; i < p.injected_count; ++i) {
    for (std::size_t j = 0; j < f.g.feature_dim(); ++j) {
      double mean = 0.0;
      for (NodeId u : plan.endpoints[i]) mean += f.g.attributes.at(u, j);
      mean /= static_cast<double>(plan.endpoints[i].size());
      const double clamped =
          std::clamp(mean, f.budget.feature_lo, f.budget.feature_hi);
      // Within a few noise sigmas (sigma = 0.01 * width) of the clamped mean.
      CHECK(std::abs(p.injected_attributes.at(i, j) - clamped) <=
            0.06 * width);
    }
  }

  PerturbedGraph q = init_injection(f.g, f.budget, plan, 7);
  CHECK(p.injected_attributes.v == q.injected_attributes.v);
  PerturbedGraph r = init_injection(f.g, f.budget, plan, 8);
  CHECK(p.injected_attributes.v != r.injected_attributes.v);
}

TEST_CASE("attack loss: tape and eval versions agree, FD gradient holds") {
  Fixture f;
  InjectionPlan plan = select_edges(f.g, f.targets, f.budget,
                                    EdgeStrategy::direct, 7);
  PerturbedGraph p = init_injection(f.g, f.budget, plan, 7);
  const std::vector<std::size_t> rows(f.targets.begin(), f.targets.end());
  const Tensor a_hat =
      cana::models::normalized_adjacency(cana::graph::materialize(p));

  auto eval = [&]() {
    Tape tape;
    Bindings bind;
    Var x = tape.input(p.injected_attributes);
    return tape.value(attack_loss_var(tape, f.surrogate, bind, a_hat,
                                      f.g.attributes, x, rows, f.g.labels))[0];
  };
  CHECK(eval() == doctest::Approx(attack_loss(f.surrogate, p, rows))
                      .epsilon(1e-12));

  Tape tape;
  Bindings bind;
  Var x = tape.input(p.injected_attributes);
  tape.backward(attack_loss_var(tape, f.surrogate, bind, a_hat,
                                f.g.attributes, x, rows, f.g.labels));
  const Tensor& grad = tape.grad(x);
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.injected_attributes.size(); ++i) {
    const double keep = p.injected_attributes[i];
    p.injected_attributes[i] = keep + h;
    const double up = eval();
    p.injected_attributes[i] = keep - h;
    const double dn = eval();
    p.injected_attributes[i] = keep;
    const double fd = (up - dn) / (2.0 * h);
    CHECK(std::abs(fd - grad[i]) <=
          1e-4 * std::max({1e-6, std::abs(fd), std::abs(grad[i])}));
  }
}

TEST_CASE("pgd_attack basics") {
  Fixture f;
  InjectionPlan plan = select_edges(f.g, f.targets, f.budget,
                                    EdgeStrategy::direct, 7);
  PerturbedGraph init = init_injection(f.g, f.budget, plan, 7);
  const std::vector<std::size_t> rows(f.targets.begin(), f.targets.end());

  SUBCASE("steps = 0 and lr = 0 both return the initialization") {
    PerturbedGraph a = pgd_attack(f.g, f.targets, f.budget, f.surrogate, 0,
                                  0.5, plan, 7);
    CHECK(a.injected_attributes.v == init.injected_attributes.v);
    PerturbedGraph b = pgd_attack(f.g, f.targets, f.budget, f.surrogate, 25,
                                  0.0, plan, 7);
    CHECK(b.injected_attributes.v == init.injected_attributes.v);
  }

  SUBCASE("attack runs: in range, deterministic, base untouched, loss falls") {
    const Tensor before = f.g.attributes;
    PerturbedGraph a = pgd_attack(f.g, f.targets, f.budget, f.surrogate, 50,
                                  50.0, plan, 7);
    CHECK_NOTHROW(a.validate());
    CHECK(f.g.attributes.v == before.v);
    for (double v : a.injected_attributes.v) {
      CHECK(v >= f.budget.feature_lo);
      CHECK(v <= f.budget.feature_hi);
    }
    PerturbedGraph b = pgd_attack(f.g, f.targets, f.budget, f.surrogate, 50,
                                  50.0, plan, 7);
    CHECK(a.injected_attributes.v == b.injected_attributes.v);
    CHECK(a.injected_edges == b.injected_edges);
    CHECK(attack_loss(f.surrogate, a, rows) <
          attack_loss(f.surrogate, init, rows));
  }
}

TEST_CASE("misclassification_rate with argmax tie-breaking") {
  Tensor logits(3, 3);
  logits.at(0, 0) = 2.0;                         // pred 0
  logits.at(1, 1) = 1.0;                         // pred 1
  logits.at(2, 0) = 4.0; logits.at(2, 2) = 4.0;  // tie -> pred 0
  std::vector<int> labels{0, 0, 2};
  CHECK(misclassification_rate(logits, {0, 1, 2}, labels) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(misclassification_rate(logits, {0}, labels) == doctest::Approx(0.0));
}
