#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cana/attack.hpp"
#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::engine {

using attack::EdgeStrategy;
using attack::InjectionPlan;
using graph::AttackBudget;
using graph::AttributedGraph;
using graph::EgoNetwork;
using graph::NodeId;
using graph::PerturbedGraph;
using models::GinModel;
using models::SurrogateModel;
using num::Tensor;

struct CanaConfig {
  double alpha = 0.5;        // camouflage weight
  double beta = 0.01;        // diversity weight
  std::size_t disc_steps = 4;
  std::size_t iterations = 200;
  double disc_lr = 1e-3;
  double gen_lr = 1e-1;      // projected gradient step on injected attrs
  std::size_t real_batch = 16;
  std::size_t fake_batch = 16;
  std::size_t disc_hidden = 64;
  models::EgoOptions ego;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossReport {
  double atk = 0.0;
  double gan_g = 0.0;
  double div = 0.0;
  double total = 0.0;
  std::vector<double> gan_d;  // one per discriminator step this iteration
};

struct CanaResult {
  PerturbedGraph perturbed;
  GinModel discriminator;
  std::vector<LossReport> trace;
};

/// Eq. 4: -mean(log D(real)) - mean(log(1 - D(fake))), outputs clamped to
/// [1e-7, 1 - 1e-7]. Eval-only helper over precomputed discriminator
/// outputs; the training loop builds the same expression on a tape.
double discriminator_loss(GinModel& disc, const std::vector<EgoNetwork>& real,
                          const std::vector<EgoNetwork>& fake);

/// Eq. 5: -mean(log D(fake)), same clamping.
double generator_gan_loss(GinModel& disc, const std::vector<EgoNetwork>& fake);

/// Negative mean over unordered pairs of summed per-layer euclidean
/// distances between pooled vectors. Fewer than 2 egos yields 0.
double diversity_loss(GinModel& rep, const std::vector<EgoNetwork>& fake);

/// Algorithm-1 alternation around a PGD-style base attack. The base attack
/// provides the edge plan and feature initialization; each generator update
/// is one projected Adam step on Eq. 8 w.r.t. the injected attributes,
/// so alpha = beta = 0 reproduces pgd_attack(steps = iterations,
/// lr = gen_lr) exactly.
CanaResult cana_train(const AttributedGraph& g,
                      const std::vector<NodeId>& targets,
                      const AttackBudget& budget, SurrogateModel& surrogate,
                      GinModel& rep, const CanaConfig& config,
                      const InjectionPlan& plan);

}  // namespace cana::engine
