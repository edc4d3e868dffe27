#pragma once

#include <string>

#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::io {

inline constexpr const char* kFormatVersion = "1";

/// Perturbation file: JSON with injected_count, edges as
/// [injected_index, endpoint] pairs (injected index 0-based in injection
/// order), attribute rows, budget and seed.
void save_perturbation(const graph::PerturbedGraph& pert,
                       std::uint64_t seed, const std::string& path);

/// Loads a perturbation against `base`; validates budgets.
graph::PerturbedGraph load_perturbation(const graph::AttributedGraph& base,
                                        const std::string& path,
                                        std::uint64_t* seed_out = nullptr);

/// Model checkpoints: versioned JSON of named tensors plus architecture
/// metadata.
void save_surrogate(const models::SurrogateModel& model,
                    const std::string& path);
models::SurrogateModel load_surrogate(const std::string& path);

void save_gin(const models::GinModel& model, const std::string& path);
models::GinModel load_gin(const std::string& path);

}  // namespace cana::io
