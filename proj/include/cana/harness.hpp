#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "cana/graph.hpp"

namespace cana::harness {

inline constexpr const char* kVersion = "0.1.0";

struct SbmParams {
  std::size_t blocks = 4;
  std::size_t block_size = 100;
  double p_in = 0.10;
  double p_out = 0.01;
  std::size_t dim = 16;
  double signal = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model with Gaussian block-prototype features
/// N(signal * e_b, I) and labels = block ids.
graph::AttributedGraph generate_sbm(const SbmParams& params);

/// Dataset reference shared by all subcommands: either explicit files
/// {"edges", "attrs", "labels"} or {"sbm": {...}}.
graph::AttributedGraph load_dataset(const nlohmann::ordered_json& spec);

/// Dispatch for the CLI / C API subcommands: pretrain, attack, cana-train,
/// metrics, detect, defend, pipeline. Options and results are JSON.
/// Throws std::invalid_argument for bad options, std::runtime_error for
/// stage failures (message is stage-tagged).
nlohmann::ordered_json run_command(const std::string& command,
                                   const nlohmann::ordered_json& options);

}  // namespace cana::harness
