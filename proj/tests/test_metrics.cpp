#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cana/graph.hpp"
#include "cana/harness.hpp"
#include "cana/metrics.hpp"
#include "cana/models.hpp"

using namespace cana::metrics;
using cana::graph::AttributedGraph;
using cana::graph::Edge;
using cana::graph::NodeId;
using cana::graph::PerturbedGraph;
using cana::models::GinMode;
using cana::models::GinModel;
using cana::num::Rng;
using cana::num::Tensor;

namespace {

GaussianSummary summary(const std::vector<double>& mean,
                        const std::vector<std::vector<double>>& cov) {
  GaussianSummary s;
  s.mean = Tensor(1, mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) s.mean[i] = mean[i];
  s.cov = Tensor(mean.size(), mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    for (std::size_t j = 0; j < mean.size(); ++j) s.cov.at(i, j) = cov[i][j];
  s.sample_count = 1000;
  return s;
}

AttributedGraph random_attr_graph(std::size_t n, std::size_t dim, double p,
                                  std::uint64_t seed) {
  AttributedGraph g;
  g.num_nodes = n;
  Rng rng(seed);
  for (NodeId u = 0; u + 1 < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v});
  g.attributes = Tensor(n, dim);
  for (double& x : g.attributes.v) x = rng.normal();
  g.labels.assign(n, 0);
  g.num_classes = 1;
  g.finalize();
  return g;
}

}  // namespace

TEST_CASE("graph_fd oracles") {
  SUBCASE("identical summaries give ~0") {
    auto s = summary({0.3, -1.2}, {{2.0, 0.4}, {0.4, 1.5}});
    CHECK(graph_fd(s, s) <= 1e-9);
  }
  SUBCASE("1-D (0,1) vs (1,4) gives 2") {
    auto a = summary({0.0}, {{1.0}});
    auto b = summary({1.0}, {{4.0}});
    // (0-1)^2 + 1 + 4 - 2*sqrt(4) = 2.
    CHECK(graph_fd(a, b) == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("diagonal 3-D matches the scalar closed form") {
    std::vector<double> ma{0.5, -1.0, 2.0}, mb{0.0, 1.0, 2.5};
    std::vector<double> va{1.0, 2.0, 0.5}, vb{3.0, 0.25, 1.5};
    auto a = summary(ma, {{va[0], 0, 0}, {0, va[1], 0}, {0, 0, va[2]}});
    auto b = summary(mb, {{vb[0], 0, 0}, {0, vb[1], 0}, {0, 0, vb[2]}});
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
      expect += (ma[i] - mb[i]) * (ma[i] - mb[i]);
      expect += va[i] + vb[i] - 2.0 * std::sqrt(va[i] * vb[i]);
    }
    CHECK(graph_fd(a, b) == doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("symmetry and non-negativity on random summaries") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
      const std::size_t m = 3;
      Tensor x(20, m);
      for (double& v : x.v) v = rng.normal() * (1.0 + t);
      Tensor y(25, m);
      for (double& v : y.v) v = rng.normal() - 0.3 * t;
      auto a = fit_gaussian(x);
      auto b = fit_gaussian(y);
      double ab = graph_fd(a, b), ba = graph_fd(b, a);
      CHECK(ab >= 0.0);
      CHECK(std::abs(ab - ba) <= 1e-8 * std::max(1.0, ab));
    }
  }
  SUBCASE("mean shift: N(0,I) vs N(delta e1, I) equals delta^2, increasing") {
    auto eye = [](std::size_t m) {
      std::vector<std::vector<double>> c(m, std::vector<double>(m, 0.0));
      for (std::size_t i = 0; i < m; ++i) c[i][i] = 1.0;
      return c;
    };
    double prev = -1.0;
    for (double delta : {0.0, 0.5, 1.0, 2.0}) {
      auto a = summary({0.0, 0.0, 0.0}, eye(3));
      auto b = summary({delta, 0.0, 0.0}, eye(3));
      double fd = graph_fd(a, b);
      CHECK(fd == doctest::Approx(delta * delta).epsilon(1e-6));
      CHECK(fd > prev);
      prev = fd;
    }
  }
}

TEST_CASE("fit_gaussian matches the hand formula") {
  Tensor x(3, 2);
  x.at(0, 0) = 1.0; x.at(0, 1) = 2.0;
  x.at(1, 0) = 3.0; x.at(1, 1) = 2.0;
  x.at(2, 0) = 2.0; x.at(2, 1) = 5.0;
  GaussianSummary s = fit_gaussian(x);
  CHECK(s.sample_count == 3);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.mean[1] == doctest::Approx(3.0));
  // Unbiased covariance + 1e-6 I.
  CHECK(s.cov.at(0, 0) == doctest::Approx(1.0 + 1e-6));
  CHECK(s.cov.at(1, 1) == doctest::Approx(3.0 + 1e-6));
  CHECK(s.cov.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.cov.at(1, 0) == s.cov.at(0, 1));
}

TEST_CASE("cad equals the exhaustive oracle and hand examples") {
  AttributedGraph base = random_attr_graph(120, 5, 0.05, 10);
  PerturbedGraph p;
  p.base = &base;
  p.budget = {8, 3, -10.0, 10.0};
  p.injected_count = 8;
  p.injected_attributes = Tensor(8, 5);
  Rng rng(3);
  for (double& x : p.injected_attributes.v) x = rng.normal();
  for (std::size_t i = 0; i < 8; ++i)
    p.injected_edges.push_back(
        {p.injected_global_id(i), static_cast<NodeId>(i)});

  // Injected node 0 exactly copies original row 7.
  for (std::size_t j = 0; j < 5; ++j)
    p.injected_attributes.at(0, j) = base.attributes.at(7, j);

  PerNodeStat c = cad(base, p);
  REQUIRE(c.values.size() == 8);
  CHECK(c.values[0] == doctest::Approx(0.0).epsilon(1e-12));

  double mean = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < base.num_nodes; ++v) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        double d = p.injected_attributes.at(i, j) - base.attributes.at(v, j);
        s += d * d;
      }
      best = std::min(best, std::sqrt(s));
    }
    CHECK(c.values[i] == best);  // exact, same arithmetic
    mean += best;
  }
  CHECK(c.mean == doctest::Approx(mean / 8.0).epsilon(1e-12));
}

TEST_CASE("smooth hand examples, isolated handling, exhaustive oracle") {
  SUBCASE("hand example: (0,0) with neighbors (1,0) and (0,2) gives 1.5") {
    AttributedGraph g;
    g.num_nodes = 3;
    g.edges = {{0, 1}, {0, 2}};
    g.attributes = Tensor(3, 2);
    g.attributes.at(1, 0) = 1.0;
    g.attributes.at(2, 1) = 2.0;
    g.labels.assign(3, 0);
    g.num_classes = 1;
    g.finalize();
    SmoothResult s = smooth(g, {0, 1});
    CHECK(s.values[0] == doctest::Approx(1.5));
    CHECK(s.values[1] == doctest::Approx(1.0));  // only neighbor is node 0
    CHECK(s.isolated_count == 0);
    CHECK(s.mean == doctest::Approx(1.25));
  }
  SUBCASE("identical neighbors give 0; isolated nodes are excluded") {
    AttributedGraph g;
    g.num_nodes = 4;  // node 3 isolated
    g.edges = {{0, 1}, {0, 2}};
    g.attributes = Tensor(4, 2);  // all zero rows
    g.labels.assign(4, 0);
    g.num_classes = 1;
    g.finalize();
    SmoothResult s = smooth(g, {0, 3});
    CHECK(s.values[0] == 0.0);
    CHECK(std::isnan(s.values[1]));
    CHECK(s.isolated_count == 1);
    CHECK(s.mean == doctest::Approx(0.0));
  }
  SUBCASE("exhaustive oracle on a random graph") {
    AttributedGraph g = random_attr_graph(150, 4, 0.04, 21);
    std::vector<NodeId> all(g.num_nodes);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = NodeId(i);
    SmoothResult s = smooth(g, all);
    double mean = 0.0;
    std::size_t counted = 0, isolated = 0;
    for (NodeId v = 0; v < g.num_nodes; ++v) {
      if (g.adj[v].empty()) {
        CHECK(std::isnan(s.values[v]));
        ++isolated;
        continue;
      }
      double acc = 0.0;
      for (NodeId u : g.adj[v]) {
        double sq = 0.0;
        for (std::size_t j = 0; j < g.feature_dim(); ++j) {
          double d = g.attributes.at(v, j) - g.attributes.at(u, j);
          sq += d * d;
        }
        acc += std::sqrt(sq);
      }
      acc /= static_cast<double>(g.adj[v].size());
      CHECK(s.values[v] == acc);  // exact, same arithmetic
      mean += acc;
      ++counted;
    }
    CHECK(s.isolated_count == isolated);
    CHECK(s.mean == doctest::Approx(mean / counted).epsilon(1e-12));
  }
}

TEST_CASE("embed_egos rows are the ego embeddings of each node") {
  AttributedGraph g = random_attr_graph(40, 4, 0.1, 9);
  Rng rng(2);
  GinModel rep = GinModel::init(GinMode::representation, 4, 8, 1, rng);
  cana::models::EgoOptions opt;
  opt.hops = 2;
  opt.cap = 5;
  opt.seed = 77;

  std::vector<NodeId> nodes{0, 3, 17, 39};
  Tensor emb = embed_egos(rep, g, nodes, opt);
  REQUIRE(emb.rows() == nodes.size());
  REQUIRE(emb.cols() == rep.embedding_dim());
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    Tensor raw = gin_embed(
        rep, build_ego_network(g, nodes[r], opt.hops, opt.cap, opt.seed));
    for (std::size_t j = 0; j < emb.cols(); ++j)
      CHECK(emb.at(r, j) == raw[j]);
  }
}

TEST_CASE("camouflage_report recombines its components") {
  AttributedGraph base = random_attr_graph(60, 4, 0.08, 14);
  PerturbedGraph p;
  p.base = &base;
  p.budget = {6, 2, -8.0, 8.0};
  p.injected_count = 6;
  p.injected_attributes = Tensor(6, 4);
  Rng rng(5);
  for (double& x : p.injected_attributes.v) x = rng.normal();
  for (std::size_t i = 0; i < 6; ++i)
    p.injected_edges.push_back(
        {p.injected_global_id(i), static_cast<NodeId>(2 * i)});
  GinModel rep = GinModel::init(GinMode::representation, 4, 8, 1, rng);
  cana::models::EgoOptions opt;
  opt.seed = 3;

  CamouflageReport r = camouflage_report(base, p, rep, opt);

  AttributedGraph merged = materialize(p);
  std::vector<NodeId> originals(base.num_nodes), injected;
  for (std::size_t i = 0; i < base.num_nodes; ++i) originals[i] = NodeId(i);
  for (std::size_t i = 0; i < 6; ++i)
    injected.push_back(p.injected_global_id(i));
  double fd = graph_fd(fit_gaussian(embed_egos(rep, base, originals, opt)),
                       fit_gaussian(embed_egos(rep, merged, injected, opt)));
  CHECK(r.graph_fd == doctest::Approx(fd).epsilon(1e-12));
  CHECK(r.cad_mean == doctest::Approx(cad(base, p).mean).epsilon(1e-12));
  SmoothResult s = smooth(merged, injected);
  CHECK(r.smooth_mean == doctest::Approx(s.mean).epsilon(1e-12));
  CHECK(r.smooth_isolated == s.isolated_count);
  CHECK(r.cad_values.size() == 6);
  CHECK(r.smooth_values.size() == 6);
}
