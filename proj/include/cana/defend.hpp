#pragma once

#include <cstdint>
#include <vector>

#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::defend {

using graph::AttributedGraph;
using models::SurrogateModel;

/// FLAG-style adversarial training: m sign-gradient ascent steps on the
/// input attributes per epoch (per-entry magnitude <= m * step_size), then
/// one parameter descent step on the perturbed inputs. m = 0 is bit-identical
/// to plain pretraining with the same seed.
SurrogateModel flag_train(const AttributedGraph& g,
                          const std::vector<std::size_t>& train_mask,
                          std::size_t ascent_steps, double step_size,
                          std::size_t epochs, double lr, std::uint64_t seed,
                          std::size_t hidden = 64);

/// "guard-lite": removes every edge whose endpoint attribute cosine
/// similarity falls below `threshold`. Zero-norm rows count as similarity 0.
AttributedGraph guard_prune(const AttributedGraph& g, double threshold);

}  // namespace cana::defend
