#include "cana/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cana::engine {
namespace {

constexpr double kLogClamp = 1e-7;

using models::GinOutput;
using num::Bindings;
using num::Rng;
using num::Tape;
using num::Var;

// -log D as a function of the pre-sigmoid logit: softplus(-z). Equal to
// -log(clamp(sigmoid(z))) wherever the clamp is inactive, but the gradient
// never saturates, which keeps the generator trainable once the
// discriminator separates the batches.
Var neg_log_d(Tape& tape, Var logit) {
  return tape.sum(tape.softplus(tape.scale(logit, -1.0)));
}

// -log(1 - D) as a function of the logit: softplus(z).
Var neg_log_one_minus_d(Tape& tape, Var logit) {
  return tape.sum(tape.softplus(logit));
}

// Sum over layers of ||pooled_l(a) - pooled_l(b)||_2.
Var layer_distance(Tape& tape, const GinOutput& a, const GinOutput& b) {
  Var total{};
  for (std::size_t l = 0; l < a.pooled.size(); ++l) {
    Var diff = tape.sub(a.pooled[l], b.pooled[l]);
    Var dist = tape.sqrt_safe(tape.sum(tape.mul(diff, diff)));
    total = total.valid() ? tape.add(total, dist) : dist;
  }
  return total;
}

std::vector<EgoNetwork> sample_egos(const AttributedGraph& merged,
                                    const std::vector<NodeId>& pool,
                                    std::size_t batch, Rng& rng,
                                    const models::EgoOptions& opt) {
  auto idx = rng.sample_without_replacement(pool.size(),
                                            std::min(batch, pool.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<EgoNetwork> egos;
  egos.reserve(idx.size());
  for (std::size_t i : idx)
    egos.push_back(
        build_ego_network(merged, pool[i], opt.hops, opt.cap, opt.seed));
  return egos;
}

}  // namespace

void CanaConfig::validate() const {
  num::require(alpha >= 0.0 && std::isfinite(alpha), "cana: bad alpha");
  num::require(beta >= 0.0 && std::isfinite(beta), "cana: bad beta");
  num::require(disc_steps >= 1, "cana: disc_steps must be >= 1");
  num::require(real_batch >= 1 && fake_batch >= 1, "cana: bad batch size");
}

double discriminator_loss(GinModel& disc, const std::vector<EgoNetwork>& real,
                          const std::vector<EgoNetwork>& fake) {
  num::require(!real.empty() && !fake.empty(),
               "discriminator_loss: empty batch");
  double loss = 0.0;
  for (const auto& ego : real) {
    Tape tape;
    Bindings bind;
    double d = tape.value(gin_forward(tape, disc, ego, bind).head)[0];
    loss -= std::log(std::clamp(d, kLogClamp, 1.0 - kLogClamp)) /
            static_cast<double>(real.size());
  }
  for (const auto& ego : fake) {
    Tape tape;
    Bindings bind;
    double d = tape.value(gin_forward(tape, disc, ego, bind).head)[0];
    loss -= std::log(1.0 - std::clamp(d, kLogClamp, 1.0 - kLogClamp)) /
            static_cast<double>(fake.size());
  }
  return loss;
}

double generator_gan_loss(GinModel& disc,
                          const std::vector<EgoNetwork>& fake) {
  num::require(!fake.empty(), "generator_gan_loss: empty batch");
  double loss = 0.0;
  for (const auto& ego : fake) {
    Tape tape;
    Bindings bind;
    double d = tape.value(gin_forward(tape, disc, ego, bind).head)[0];
    loss -= std::log(std::clamp(d, kLogClamp, 1.0 - kLogClamp)) /
            static_cast<double>(fake.size());
  }
  return loss;
}

double diversity_loss(GinModel& rep, const std::vector<EgoNetwork>& fake) {
  if (fake.size() < 2) return 0.0;
  Tape tape;
  Bindings bind;
  std::vector<GinOutput> outs;
  outs.reserve(fake.size());
  for (const auto& ego : fake)
    outs.push_back(gin_forward(tape, rep, ego, bind));
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < outs.size(); ++i)
    for (std::size_t j = i + 1; j < outs.size(); ++j) {
      total += tape.value(layer_distance(tape, outs[i], outs[j]))[0];
      ++pairs;
    }
  return -total / static_cast<double>(pairs);
}

CanaResult cana_train(const AttributedGraph& g,
                      const std::vector<NodeId>& targets,
                      const AttackBudget& budget, SurrogateModel& surrogate,
                      GinModel& rep, const CanaConfig& config,
                      const InjectionPlan& plan) {
  config.validate();
  num::require(!targets.empty(), "cana_train: empty target set");

  CanaResult result;
  // Same init as pgd_attack so alpha = beta = 0 reproduces it bit-for-bit.
  result.perturbed = attack::init_injection(g, budget, plan, config.seed);
  PerturbedGraph& pert = result.perturbed;
  const Tensor a_hat = models::normalized_adjacency(materialize(pert));
  const std::vector<std::size_t> target_rows(targets.begin(), targets.end());

  Rng disc_init_rng = Rng(config.seed).split("disc_init");
  result.discriminator =
      GinModel::init(models::GinMode::discriminator, g.feature_dim(),
                     config.disc_hidden, 0, disc_init_rng);
  GinModel& disc = result.discriminator;
  Rng sample_rng = Rng(config.seed).split("disc_sample");

  // Generator optimizer over the injected attributes; same projected-Adam
  // scheme as pgd_attack so alpha = beta = 0 reproduces it bit-for-bit.
  num::ParamStore gen_opt;
  num::Param& xp = gen_opt.add("x_inj", pert.injected_attributes);

  std::vector<NodeId> original_pool(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    original_pool[i] = static_cast<NodeId>(i);
  std::vector<NodeId> injected_pool(pert.injected_count);
  for (std::size_t i = 0; i < pert.injected_count; ++i)
    injected_pool[i] = pert.injected_global_id(i);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    LossReport report;

    // Discriminator phase: injected attributes are frozen here, so the
    // merged graph is materialized once per iteration.
    AttributedGraph merged = materialize(pert);
    for (std::size_t step = 0; step < config.disc_steps; ++step) {
      auto real_egos = sample_egos(merged, original_pool, config.real_batch,
                                   sample_rng, config.ego);
      auto fake_egos = sample_egos(merged, injected_pool, config.fake_batch,
                                   sample_rng, config.ego);
      Tape tape;
      Bindings bind;
      Var acc{};
      for (const auto& ego : real_egos) {
        Var z = gin_forward(tape, disc, ego, bind).head_logit;
        Var term = tape.scale(neg_log_d(tape, z),
                              1.0 / static_cast<double>(real_egos.size()));
        acc = acc.valid() ? tape.add(acc, term) : term;
      }
      for (const auto& ego : fake_egos) {
        Var z = gin_forward(tape, disc, ego, bind).head_logit;
        Var term = tape.scale(neg_log_one_minus_d(tape, z),
                              1.0 / static_cast<double>(fake_egos.size()));
        acc = tape.add(acc, term);
      }
      tape.backward(acc);
      const double loss_d = tape.value(acc)[0];
      if (!std::isfinite(loss_d)) {
        result.trace.push_back(report);
        throw std::runtime_error("cana_train: discriminator loss diverged");
      }
      bind.accumulate(tape);
      disc.params.adam_step(config.disc_lr);
      report.gan_d.push_back(loss_d);
    }

    // Generator phase: one projected gradient step on Eq. 8 w.r.t. the
    // injected attributes. The fake minibatch is resampled per Algorithm 1.
    auto fake_egos = sample_egos(merged, injected_pool, config.fake_batch,
                                 sample_rng, config.ego);
    Tape tape;
    Bindings bind_sur;
    Bindings bind_x;
    Var x_inj = bind_x.bind(tape, xp);
    Var atk = attack::attack_loss_var(tape, surrogate, bind_sur, a_hat,
                                      g.attributes,
                              x_inj, target_rows, g.labels);
    Var total = atk;

    Var x_full{};
    if (config.alpha > 0.0 || config.beta > 0.0) {
      x_full = tape.concat_rows(tape.input(g.attributes), x_inj);
    }
    auto ego_feats = [&](const EgoNetwork& ego) {
      std::vector<std::size_t> rows(ego.nodes.begin(), ego.nodes.end());
      return tape.gather_rows(x_full, std::move(rows));
    };

    if (config.alpha > 0.0) {
      Bindings bind_disc;  // discriminator grads are discarded this phase
      Var acc{};
      for (const auto& ego : fake_egos) {
        Var z = gin_forward(tape, disc, ego_feats(ego), ego.edges, bind_disc)
                    .head_logit;
        Var term = tape.scale(neg_log_d(tape, z),
                              1.0 / static_cast<double>(fake_egos.size()));
        acc = acc.valid() ? tape.add(acc, term) : term;
      }
      report.gan_g = tape.value(acc)[0];
      total = tape.add(total, tape.scale(acc, config.alpha));
    } else {
      report.gan_g = generator_gan_loss(disc, fake_egos);
    }

    if (config.beta > 0.0 && fake_egos.size() >= 2) {
      Bindings bind_rep;
      std::vector<GinOutput> outs;
      outs.reserve(fake_egos.size());
      for (const auto& ego : fake_egos)
        outs.push_back(
            gin_forward(tape, rep, ego_feats(ego), ego.edges, bind_rep));
      Var acc{};
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < outs.size(); ++i)
        for (std::size_t j = i + 1; j < outs.size(); ++j) {
          Var dv = layer_distance(tape, outs[i], outs[j]);
          acc = acc.valid() ? tape.add(acc, dv) : dv;
          ++pairs;
        }
      acc = tape.scale(acc, -1.0 / static_cast<double>(pairs));
      report.div = tape.value(acc)[0];
      total = tape.add(total, tape.scale(acc, config.beta));
    } else {
      report.div = diversity_loss(rep, fake_egos);
    }

    tape.backward(total);
    report.atk = tape.value(atk)[0];
    report.total =
        report.atk + config.alpha * report.gan_g + config.beta * report.div;
    if (!std::isfinite(report.total)) {
      result.trace.push_back(report);
      throw std::runtime_error("cana_train: generator loss diverged");
    }
    if (!tape.grad(x_inj).all_finite()) {
      result.trace.push_back(report);
      throw std::runtime_error("cana_train: non-finite generator gradient");
    }
    bind_x.accumulate(tape);
    gen_opt.adam_step(config.gen_lr);
    for (double& x : xp.value.v)
      x = std::clamp(x, budget.feature_lo, budget.feature_hi);
    pert.injected_attributes = xp.value;
    result.trace.push_back(std::move(report));
  }

  pert.validate();
  return result;
}

}  // namespace cana::engine
