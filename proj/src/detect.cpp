#include "cana/detect.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cana/attack.hpp"
#include "cana/autodiff.hpp"
#include "cana/optim.hpp"
#include "cana/rng.hpp"

namespace cana::detect {
namespace {

using num::Bindings;
using num::Rng;
using num::Tape;
using num::Var;

constexpr double kDensityFloor = 1e-12;

std::vector<double> column(const Tensor& data, std::size_t j) {
  std::vector<double> col(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) col[i] = data.at(i, j);
  return col;
}

double skewness(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

std::vector<double> score_copod(const Tensor& data) {
  const std::size_t n = data.rows();
  // Per-row sums of -log tail probability, for the left tail, the right
  // tail, and the skewness-selected tail; the final score is the max of
  // the three sums (two-sided detection with skewness correction).
  std::vector<double> left(n, 0.0), right(n, 0.0), skew(n, 0.0);
  for (std::size_t j = 0; j < data.cols(); ++j) {
    auto col = column(data, j);
    auto sorted = col;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) continue;  // constant dim
    const bool right_skewed = skewness(col) >= 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // fraction of rows <= x and fraction of rows >= x
      auto lo = std::upper_bound(sorted.begin(), sorted.end(), col[i]);
      auto hi = std::lower_bound(sorted.begin(), sorted.end(), col[i]);
      const double p_left = std::max(
          static_cast<double>(lo - sorted.begin()) / static_cast<double>(n),
          kDensityFloor);
      const double p_right = std::max(
          static_cast<double>(sorted.end() - hi) / static_cast<double>(n),
          kDensityFloor);
      left[i] -= std::log(p_left);
      right[i] -= std::log(p_right);
      skew[i] -= std::log(right_skewed ? p_right : p_left);
    }
  }
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    scores[i] = std::max({left[i], right[i], skew[i]});
  return scores;
}

// Rows whose score is at or below the (1 - trim) quantile; used to refit a
// detector on a cleaner subset so clustered outliers cannot mask themselves.
constexpr double kTrimFraction = 0.30;

// Sum over dimensions of |x - median| / MAD; median and MAD barely move
// under clustered contamination, so this ranking is a safe trimming guide.
std::vector<double> robust_z(const Tensor& data) {
  const std::size_t n = data.rows();
  std::vector<double> scores(n, 0.0);
  for (std::size_t j = 0; j < data.cols(); ++j) {
    auto col = column(data, j);
    auto sorted = col;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[n / 2];
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(col[i] - med);
    auto sdev = dev;
    std::nth_element(sdev.begin(), sdev.begin() + static_cast<std::ptrdiff_t>(n / 2),
                     sdev.end());
    const double mad = std::max(sdev[n / 2], 1e-12);
    for (std::size_t i = 0; i < n; ++i) scores[i] += dev[i] / mad;
  }
  return scores;
}

std::vector<std::size_t> low_score_rows(const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  const std::size_t keep = std::max<std::size_t>(
      2, n - static_cast<std::size_t>(kTrimFraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return scores[a] < scores[b];
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<double> mahalanobis(const Tensor& data,
                                const std::vector<std::size_t>& fit_rows) {
  using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  EMat x = Eigen::Map<const EMat>(data.v.data(), n, m);
  EMat fit(fit_rows.size(), m);
  for (std::size_t i = 0; i < fit_rows.size(); ++i)
    fit.row(static_cast<Eigen::Index>(i)) =
        x.row(static_cast<Eigen::Index>(fit_rows[i]));
  Eigen::RowVectorXd mean = fit.colwise().mean();
  fit.rowwise() -= mean;
  EMat cov =
      fit.transpose() * fit / static_cast<double>(fit_rows.size() - 1);
  Eigen::SelfAdjointEigenSolver<EMat> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("pca: eigensolver failed");
  // Mahalanobis distance in the PCA basis: sum of squared projections
  // weighted by inverse eigenvalue.
  Eigen::VectorXd inv_ev = es.eigenvalues().cwiseMax(1e-12).cwiseInverse();
  EMat proj = (x.rowwise() - mean) * es.eigenvectors();
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      scores[i] += proj(i, j) * proj(i, j) * inv_ev(j);
  return scores;
}

std::vector<double> score_pca(const Tensor& data) {
  // Fit on the rows ranked safest by a robust per-dimension score so a
  // cluster of outliers cannot inflate the covariance along its own
  // direction.
  return mahalanobis(data, low_score_rows(robust_z(data)));
}

std::vector<double> score_hbos(const Tensor& data) {
  constexpr std::size_t kBins = 10;
  const std::size_t n = data.rows();
  std::vector<double> scores(n, 0.0);
  for (std::size_t j = 0; j < data.cols(); ++j) {
    auto col = column(data, j);
    const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) continue;  // constant dim
    std::vector<std::size_t> counts(kBins, 0);
    auto bin_of = [&](double v) {
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * kBins);
      return std::min(b, kBins - 1);
    };
    for (double v : col) ++counts[bin_of(v)];
    for (std::size_t i = 0; i < n; ++i) {
      const double density =
          static_cast<double>(counts[bin_of(col[i])]) / static_cast<double>(n);
      scores[i] -= std::log(std::max(density, kDensityFloor));
    }
  }
  return scores;
}

// --- isolation forest ----------------------------------------------------

double harmonic(std::size_t k) {
  constexpr double kEulerGamma = 0.5772156649015329;
  return std::log(static_cast<double>(k)) + kEulerGamma;
}

double avg_path_length(std::size_t k) {
  if (k <= 1) return 0.0;
  const double kd = static_cast<double>(k);
  return 2.0 * harmonic(k - 1) - 2.0 * (kd - 1.0) / kd;
}

struct IsoNode {
  int split_dim = -1;   // -1 marks a leaf
  double split_value = 0.0;
  int left = -1, right = -1;
  std::size_t size = 0;
};

struct IsoTree {
  std::vector<IsoNode> nodes;

  int build(const Tensor& data, std::vector<std::size_t>& rows,
            std::size_t begin, std::size_t end, std::size_t depth,
            std::size_t max_depth, Rng& rng) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].size = end - begin;
    if (end - begin <= 1 || depth >= max_depth) return id;
    // Dims with spread among the rows of this node.
    std::vector<std::size_t> dims;
    for (std::size_t j = 0; j < data.cols(); ++j) {
      double lo = data.at(rows[begin], j), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, data.at(rows[i], j));
        hi = std::max(hi, data.at(rows[i], j));
      }
      if (lo < hi) dims.push_back(j);
    }
    if (dims.empty()) return id;
    const std::size_t dim = dims[rng.uniform_index(dims.size())];
    double lo = data.at(rows[begin], dim), hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, data.at(rows[i], dim));
      hi = std::max(hi, data.at(rows[i], dim));
    }
    const double split = rng.uniform(lo, hi);
    auto mid_it = std::partition(
        rows.begin() + static_cast<std::ptrdiff_t>(begin),
        rows.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return data.at(r, dim) < split; });
    const std::size_t mid =
        static_cast<std::size_t>(mid_it - rows.begin());
    if (mid == begin || mid == end) return id;  // degenerate split
    nodes[id].split_dim = static_cast<int>(dim);
    nodes[id].split_value = split;
    nodes[id].left = build(data, rows, begin, mid, depth + 1, max_depth, rng);
    nodes[id].right = build(data, rows, mid, end, depth + 1, max_depth, rng);
    return id;
  }

  double path_length(const Tensor& data, std::size_t row) const {
    double depth = 0.0;
    int id = 0;
    while (nodes[id].split_dim >= 0) {
      id = data.at(row, static_cast<std::size_t>(nodes[id].split_dim)) <
                   nodes[id].split_value
               ? nodes[id].left
               : nodes[id].right;
      depth += 1.0;
    }
    return depth + avg_path_length(nodes[id].size);
  }
};

std::vector<double> score_iforest(const Tensor& data, std::uint64_t seed) {
  constexpr std::size_t kTrees = 100;
  const std::size_t n = data.rows();
  const std::size_t psi = std::min<std::size_t>(256, n);
  const std::size_t max_depth =
      static_cast<std::size_t>(std::ceil(std::log2(
          std::max<double>(2.0, static_cast<double>(psi)))));
  Rng rng = Rng(seed).split("iforest");

  std::vector<IsoTree> trees(kTrees);
  for (auto& tree : trees) {
    auto rows = rng.sample_without_replacement(n, psi);
    tree.build(data, rows, 0, rows.size(), 0, max_depth, rng);
  }
  const double c = std::max(avg_path_length(psi), 1e-12);
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (const auto& tree : trees) h += tree.path_length(data, i);
    h /= static_cast<double>(kTrees);
    scores[i] = std::pow(2.0, -h / c);
  }
  return scores;
}

// --- autoencoder -----------------------------------------------------------

std::vector<double> ae_pass(const Tensor& data,
                            const std::vector<std::size_t>& fit_rows,
                            std::uint64_t seed) {
  const std::size_t m = data.cols();
  Tensor train(fit_rows.size(), m);
  for (std::size_t i = 0; i < fit_rows.size(); ++i)
    for (std::size_t j = 0; j < m; ++j)
      train.at(i, j) = data.at(fit_rows[i], j);
  const std::size_t bottleneck = std::max<std::size_t>(1, m / 4);
  constexpr std::size_t kEpochs = 60;
  constexpr double kLr = 1e-2;

  Rng rng = Rng(seed).split("ae");
  num::ParamStore params;
  auto glorot = [&](std::size_t r, std::size_t c) {
    Tensor t(r, c);
    const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
    return t;
  };
  params.add("enc.W", glorot(m, bottleneck));
  params.add("enc.b", Tensor(1, bottleneck));
  params.add("dec.W", glorot(bottleneck, m));
  params.add("dec.b", Tensor(1, m));

  auto forward = [&](Tape& tape, Bindings& bind, Var x) {
    Var ew = bind.bind(tape, params.get("enc.W"));
    Var eb = bind.bind(tape, params.get("enc.b"));
    Var dw = bind.bind(tape, params.get("dec.W"));
    Var db = bind.bind(tape, params.get("dec.b"));
    Var h = tape.relu(tape.add_rowvec(tape.matmul(x, ew), eb));
    return tape.add_rowvec(tape.matmul(h, dw), db);
  };

  for (std::size_t epoch = 0; epoch < kEpochs; ++epoch) {
    Tape tape;
    Bindings bind;
    Var x = tape.input(train);
    Var diff = tape.sub(forward(tape, bind, x), x);
    Var loss = tape.mean(tape.mul(diff, diff));
    tape.backward(loss);
    if (!std::isfinite(tape.value(loss)[0]))
      throw std::runtime_error("ae: training diverged");
    bind.accumulate(tape);
    params.adam_step(kLr);
  }

  Tape tape;
  Bindings bind;
  Var x = tape.input(data);
  const Tensor& recon = tape.value(forward(tape, bind, x));
  std::vector<double> scores(data.rows(), 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = recon.at(i, j) - data.at(i, j);
      scores[i] += d * d;
    }
  return scores;
}

std::vector<double> score_ae(const Tensor& data, std::uint64_t seed) {
  // Train on the rows ranked safest by a robust per-dimension score so the
  // reconstruction cannot adapt to a cluster of outliers.
  return ae_pass(data, low_score_rows(robust_z(data)), seed);
}

}  // namespace

const std::vector<DetectorKind>& all_detectors() {
  static const std::vector<DetectorKind> kinds = {
      DetectorKind::copod, DetectorKind::pca, DetectorKind::hbos,
      DetectorKind::iforest, DetectorKind::ae};
  return kinds;
}

std::string detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::copod: return "copod";
    case DetectorKind::pca: return "pca";
    case DetectorKind::hbos: return "hbos";
    case DetectorKind::iforest: return "iforest";
    case DetectorKind::ae: return "ae";
  }
  throw std::invalid_argument("unknown detector kind");
}

DetectorKind detector_from_name(const std::string& name) {
  for (DetectorKind k : all_detectors())
    if (detector_name(k) == name) return k;
  throw std::invalid_argument("unknown detector: " + name);
}

std::vector<double> fit_score(DetectorKind kind, const Tensor& data,
                              std::uint64_t seed) {
  num::require(data.rows() >= 10, "fit_score: need at least 10 rows");
  switch (kind) {
    case DetectorKind::copod: return score_copod(data);
    case DetectorKind::pca: return score_pca(data);
    case DetectorKind::hbos: return score_hbos(data);
    case DetectorKind::iforest: return score_iforest(data, seed);
    case DetectorKind::ae: return score_ae(data, seed);
  }
  throw std::invalid_argument("unknown detector kind");
}

std::vector<std::size_t> flag(const std::vector<double>& scores,
                              double contamination) {
  num::require(contamination > 0.0 && contamination < 1.0,
               "flag: contamination out of range");
  const auto k = static_cast<std::size_t>(
      std::llround(contamination * static_cast<double>(scores.size())));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return scores[a] > scores[b];  // ties keep ascending id (stable)
  });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

double detection_accuracy(const std::vector<std::size_t>& flagged,
                          const std::vector<std::size_t>& injected) {
  num::require(!injected.empty(), "detection_accuracy: empty injected set");
  std::size_t hit = 0;
  for (std::size_t v : injected)
    if (std::binary_search(flagged.begin(), flagged.end(), v)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(injected.size());
}

FilterOutcome filter_and_classify(const PerturbedGraph& perturbed,
                                  const std::vector<std::size_t>& flagged,
                                  SurrogateModel& victim,
                                  const std::vector<NodeId>& targets) {
  AttributedGraph merged = materialize(perturbed);
  std::vector<bool> removed(merged.num_nodes, false);
  for (std::size_t v : flagged) {
    num::require(v < merged.num_nodes, "filter: flagged id out of range");
    removed[v] = true;
  }

  std::vector<std::uint32_t> remap(merged.num_nodes, UINT32_MAX);
  AttributedGraph residual;
  residual.num_classes = merged.num_classes;
  std::vector<std::size_t> kept;
  for (std::size_t v = 0; v < merged.num_nodes; ++v) {
    if (removed[v]) continue;
    remap[v] = static_cast<std::uint32_t>(kept.size());
    kept.push_back(v);
  }
  residual.num_nodes = kept.size();
  residual.attributes = Tensor(kept.size(), merged.feature_dim());
  residual.labels.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    residual.labels[i] = merged.labels[kept[i]];
    for (std::size_t j = 0; j < merged.feature_dim(); ++j)
      residual.attributes.at(i, j) = merged.attributes.at(kept[i], j);
  }
  for (const auto& [u, v] : merged.edges)
    if (!removed[u] && !removed[v])
      residual.edges.emplace_back(remap[u], remap[v]);
  residual.finalize();

  FilterOutcome out;
  std::vector<std::size_t> surviving;
  for (NodeId t : targets) {
    if (removed[t])
      ++out.flagged_targets;
    else
      surviving.push_back(remap[t]);
  }
  out.surviving_targets = surviving.size();
  if (surviving.empty())
    throw std::runtime_error("filter_and_classify: all targets flagged");
  Tensor logits = gcn_logits(victim, residual);
  out.misclassification =
      attack::misclassification_rate(logits, surviving, residual.labels);
  return out;
}

}  // namespace cana::detect
