#include "cana/defend.hpp"

#include <cmath>

namespace cana::defend {

SurrogateModel flag_train(const AttributedGraph& g,
                          const std::vector<std::size_t>& train_mask,
                          std::size_t ascent_steps, double step_size,
                          std::size_t epochs, double lr, std::uint64_t seed,
                          std::size_t hidden) {
  models::TrainOptions opt;
  opt.epochs = epochs;
  opt.lr = lr;
  opt.seed = seed;
  opt.hidden = hidden;
  opt.ascent_steps = ascent_steps;
  opt.ascent_step_size = step_size;
  return train_surrogate(g, train_mask, opt);
}

AttributedGraph guard_prune(const AttributedGraph& g, double threshold) {
  AttributedGraph out;
  out.num_nodes = g.num_nodes;
  out.attributes = g.attributes;
  out.labels = g.labels;
  out.num_classes = g.num_classes;

  std::vector<double> norms(g.num_nodes, 0.0);
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.feature_dim(); ++j)
      s += g.attributes.at(v, j) * g.attributes.at(v, j);
    norms[v] = std::sqrt(s);
  }
  for (const auto& [u, v] : g.edges) {
    double cos_sim = 0.0;
    if (norms[u] > 0.0 && norms[v] > 0.0) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.feature_dim(); ++j)
        dot += g.attributes.at(u, j) * g.attributes.at(v, j);
      cos_sim = dot / (norms[u] * norms[v]);
    }
    if (cos_sim >= threshold) out.edges.emplace_back(u, v);
  }
  out.finalize();
  return out;
}

}  // namespace cana::defend
