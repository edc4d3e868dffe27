#include "cana/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cana::metrics {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

EMat to_eigen(const Tensor& t) {
  return Eigen::Map<const EMat>(t.v.data(),
                                static_cast<Eigen::Index>(t.rows()),
                                static_cast<Eigen::Index>(t.cols()));
}

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// floored at zero.
EMat psd_sqrt(const EMat& m) {
  Eigen::SelfAdjointEigenSolver<EMat> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("graph_fd: eigensolver failed");
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double row_distance(const Tensor& a, std::size_t i, const Tensor& b,
                    std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a.at(i, c) - b.at(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

Tensor embed_egos(GinModel& rep, const AttributedGraph& g,
                  const std::vector<NodeId>& nodes,
                  const models::EgoOptions& ego_opt) {
  num::require(!nodes.empty(), "embed_egos: empty node set");
  Tensor out(nodes.size(), rep.embedding_dim());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto ego = build_ego_network(g, nodes[i], ego_opt.hops, ego_opt.cap,
                                 ego_opt.seed);
    Tensor e = gin_embed(rep, ego);
    for (std::size_t j = 0; j < e.size(); ++j) out.at(i, j) = e[j];
  }
  return out;
}

GaussianSummary fit_gaussian(const Tensor& embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t m = embeddings.cols();
  num::require(n >= 2, "fit_gaussian: need at least 2 rows");
  GaussianSummary s;
  s.sample_count = n;
  s.mean = Tensor(1, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) s.mean[j] += embeddings.at(i, j);
  for (std::size_t j = 0; j < m; ++j) s.mean[j] /= static_cast<double>(n);
  s.cov = Tensor(m, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < m; ++a) {
      const double da = embeddings.at(i, a) - s.mean[a];
      for (std::size_t b = a; b < m; ++b)
        s.cov.at(a, b) += da * (embeddings.at(i, b) - s.mean[b]);
    }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      s.cov.at(a, b) *= inv;
      s.cov.at(b, a) = s.cov.at(a, b);
    }
  for (std::size_t a = 0; a < m; ++a) s.cov.at(a, a) += 1e-6;
  return s;
}

double graph_fd(const GaussianSummary& real, const GaussianSummary& injected) {
  num::require(real.dim() == injected.dim(), "graph_fd: dimension mismatch");
  const EMat sr = to_eigen(real.cov);
  const EMat sm = to_eigen(injected.cov);
  const EMat sr_half = psd_sqrt(sr);
  const EMat inner = psd_sqrt(sr_half * sm * sr_half);

  double mean_term = 0.0;
  for (std::size_t j = 0; j < real.dim(); ++j) {
    const double d = real.mean[j] - injected.mean[j];
    mean_term += d * d;
  }
  const double fd = mean_term + sr.trace() + sm.trace() - 2.0 * inner.trace();
  return std::max(fd, 0.0);
}

PerNodeStat cad(const AttributedGraph& base, const PerturbedGraph& perturbed) {
  num::require(perturbed.injected_count >= 1, "cad: no injected nodes");
  PerNodeStat out;
  out.values.resize(perturbed.injected_count);
  for (std::size_t i = 0; i < perturbed.injected_count; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < base.num_nodes; ++j)
      best = std::min(
          best, row_distance(perturbed.injected_attributes, i,
                             base.attributes, j));
    out.values[i] = best;
    out.mean += best;
  }
  out.mean /= static_cast<double>(out.values.size());
  return out;
}

SmoothResult smooth(const AttributedGraph& g,
                    const std::vector<NodeId>& nodes) {
  SmoothResult out;
  out.values.resize(nodes.size(),
                    std::numeric_limits<double>::quiet_NaN());
  std::size_t counted = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId v = nodes[i];
    if (g.adj[v].empty()) {
      ++out.isolated_count;
      continue;
    }
    double s = 0.0;
    for (NodeId u : g.adj[v])
      s += row_distance(g.attributes, v, g.attributes, u);
    out.values[i] = s / static_cast<double>(g.adj[v].size());
    out.mean += out.values[i];
    ++counted;
  }
  if (counted > 0) out.mean /= static_cast<double>(counted);
  return out;
}

CamouflageReport camouflage_report(const AttributedGraph& base,
                                   const PerturbedGraph& perturbed,
                                   GinModel& rep,
                                   const models::EgoOptions& ego_opt) {
  CamouflageReport rep_out;
  AttributedGraph merged = materialize(perturbed);

  std::vector<NodeId> originals(base.num_nodes);
  for (std::size_t i = 0; i < base.num_nodes; ++i)
    originals[i] = static_cast<NodeId>(i);
  std::vector<NodeId> injected(perturbed.injected_count);
  for (std::size_t i = 0; i < perturbed.injected_count; ++i)
    injected[i] = perturbed.injected_global_id(i);

  // Real distribution from the clean graph, injected from the perturbed one.
  Tensor real_emb = embed_egos(rep, base, originals, ego_opt);
  Tensor inj_emb = embed_egos(rep, merged, injected, ego_opt);
  rep_out.graph_fd = graph_fd(fit_gaussian(real_emb), fit_gaussian(inj_emb));

  PerNodeStat c = cad(base, perturbed);
  rep_out.cad_values = std::move(c.values);
  rep_out.cad_mean = c.mean;

  SmoothResult s = smooth(merged, injected);
  rep_out.smooth_values = std::move(s.values);
  rep_out.smooth_mean = s.mean;
  rep_out.smooth_isolated = s.isolated_count;
  return rep_out;
}

}  // namespace cana::metrics
