#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::detect {

using graph::AttributedGraph;
using graph::NodeId;
using graph::PerturbedGraph;
using models::SurrogateModel;
using num::Tensor;

enum class DetectorKind { copod, pca, hbos, iforest, ae };

const std::vector<DetectorKind>& all_detectors();
std::string detector_name(DetectorKind kind);
DetectorKind detector_from_name(const std::string& name);

/// Per-row anomaly scores (higher = more anomalous). Requires >= 10 rows.
/// copod: max over {left, right, skewness-selected} tails of the sum over
///   dims of -log empirical tail probability; constant dims skipped.
/// pca: squared projections onto the principal axes weighted by inverse
///   eigenvalue (Mahalanobis distance in the PCA basis); fitted on the 70%
///   of rows ranked safest by a median/MAD score so clustered outliers
///   cannot mask themselves.
/// hbos: sum over dims of -log histogram density (10 bins).
/// iforest: 100 trees, subsample 256, standard path-length score.
/// ae: reconstruction error of a 2-layer autoencoder (bottleneck m/4),
///   trained on the same median/MAD-trimmed subset as pca.
std::vector<double> fit_score(DetectorKind kind, const Tensor& data,
                              std::uint64_t seed);

/// Flags the round(contamination * N) highest scores; ties break to the
/// lowest row id. Returns sorted row ids.
std::vector<std::size_t> flag(const std::vector<double>& scores,
                              double contamination);

/// Recall of injected nodes: |flagged AND injected| / |injected|.
double detection_accuracy(const std::vector<std::size_t>& flagged,
                          const std::vector<std::size_t>& injected);

struct FilterOutcome {
  double misclassification = 0.0;  // over surviving targets
  std::size_t surviving_targets = 0;
  std::size_t flagged_targets = 0;
};

/// Removes flagged nodes (and incident edges) from the materialized graph,
/// runs the victim model on the residual, and measures misclassification
/// over targets that survived the filter.
FilterOutcome filter_and_classify(const PerturbedGraph& perturbed,
                                  const std::vector<std::size_t>& flagged,
                                  SurrogateModel& victim,
                                  const std::vector<NodeId>& targets);

}  // namespace cana::detect
