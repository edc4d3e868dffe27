#pragma once

#include <vector>

#include "cana/graph.hpp"
#include "cana/models.hpp"

namespace cana::metrics {

using graph::AttributedGraph;
using graph::NodeId;
using graph::PerturbedGraph;
using models::GinModel;
using num::Tensor;

/// One row per node: the representation model's concatenated per-layer
/// pooled vectors of that node's ego network. With a per-hop neighbor cap
/// the sum readout's norm reflects attribute magnitude rather than ego
/// size, which is the signal the detectors and GraphFD consume.
Tensor embed_egos(GinModel& rep, const AttributedGraph& g,
                  const std::vector<NodeId>& nodes,
                  const models::EgoOptions& ego_opt = {});

struct GaussianSummary {
  Tensor mean;        // 1 x m
  Tensor cov;         // m x m, regularized by +1e-6 I
  std::size_t sample_count = 0;

  std::size_t dim() const { return mean.cols(); }
};

/// Sample mean and unbiased covariance of the rows, plus 1e-6 I.
GaussianSummary fit_gaussian(const Tensor& embeddings);

/// Frechet distance between two Gaussians, computed via the symmetric form
/// Tr(Sr) + Tr(Sm) - 2 Tr((Sr^{1/2} Sm Sr^{1/2})^{1/2}) + ||mu_r - mu_m||^2.
/// Negative eigenvalues are floored at zero; the result is floored at zero.
double graph_fd(const GaussianSummary& real, const GaussianSummary& injected);

struct PerNodeStat {
  std::vector<double> values;
  double mean = 0.0;
};

/// Closest Attribute Distance: per injected node, the minimum euclidean
/// distance from its attribute row to any ORIGINAL node's row.
PerNodeStat cad(const AttributedGraph& base, const PerturbedGraph& perturbed);

/// Smoothness: per node, mean euclidean attribute distance to its direct
/// neighbors. Isolated nodes are excluded from the mean; their count is
/// reported.
struct SmoothResult {
  std::vector<double> values;  // NaN for isolated nodes
  double mean = 0.0;
  std::size_t isolated_count = 0;
};
SmoothResult smooth(const AttributedGraph& g, const std::vector<NodeId>& nodes);

struct CamouflageReport {
  double graph_fd = 0.0;
  double cad_mean = 0.0;
  double smooth_mean = 0.0;
  std::vector<double> cad_values;
  std::vector<double> smooth_values;
  std::size_t smooth_isolated = 0;
};

/// Full report for a perturbation: GraphFD between ego embeddings of the
/// original nodes (clean graph) and the injected nodes (perturbed graph),
/// plus CAD and Smooth over the injected nodes.
CamouflageReport camouflage_report(const AttributedGraph& base,
                                   const PerturbedGraph& perturbed,
                                   GinModel& rep,
                                   const models::EgoOptions& ego_opt = {});

}  // namespace cana::metrics
