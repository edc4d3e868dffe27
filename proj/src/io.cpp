#include "cana/io.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cana::io {
namespace {

using json = nlohmann::ordered_json;
using num::Tensor;

json dump_tensor(const Tensor& t) {
  return json{{"shape", t.shape}, {"values", t.v}};
}

Tensor parse_tensor(const json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<std::size_t>>();
  t.v = j.at("values").get<std::vector<double>>();
  if (t.v.size() != Tensor::size_from_shape(t.shape))
    throw std::invalid_argument("checkpoint: tensor size/shape mismatch");
  return t;
}

json dump_params(const num::ParamStore& params) {
  json out = json::object();
  for (const auto& [name, p] : params.params()) out[name] = dump_tensor(p.value);
  return out;
}

void parse_params(const json& j, num::ParamStore& params) {
  for (auto& [name, p] : params.params()) {
    if (!j.contains(name))
      throw std::invalid_argument("checkpoint: missing tensor " + name);
    Tensor t = parse_tensor(j.at(name));
    if (t.shape != p.value.shape)
      throw std::invalid_argument("checkpoint: shape mismatch for " + name);
    p.value = std::move(t);
  }
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  return json::parse(in);
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

void save_perturbation(const graph::PerturbedGraph& pert, std::uint64_t seed,
                       const std::string& path) {
  pert.validate();
  json edges = json::array();
  for (const auto& [u, v] : pert.injected_edges) {
    // Stored as (injected index relative to injection order, endpoint).
    const auto base_n = pert.base->num_nodes;
    const std::uint32_t inj = u >= base_n ? u : v;
    const std::uint32_t other = u >= base_n ? v : u;
    edges.push_back({inj - base_n, other});
  }
  json attrs = json::array();
  for (std::size_t i = 0; i < pert.injected_count; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < pert.injected_attributes.cols(); ++j)
      row.push_back(pert.injected_attributes.at(i, j));
    attrs.push_back(std::move(row));
  }
  write_json(json{{"version", kFormatVersion},
                  {"injected_count", pert.injected_count},
                  {"edges", std::move(edges)},
                  {"attributes", std::move(attrs)},
                  {"budget",
                   {{"node_budget", pert.budget.node_budget},
                    {"edge_budget", pert.budget.edge_budget},
                    {"feature_lo", pert.budget.feature_lo},
                    {"feature_hi", pert.budget.feature_hi}}},
                  {"seed", seed}},
             path);
}

graph::PerturbedGraph load_perturbation(const graph::AttributedGraph& base,
                                        const std::string& path,
                                        std::uint64_t* seed_out) {
  json j = read_json(path);
  graph::PerturbedGraph pert;
  pert.base = &base;
  pert.injected_count = j.at("injected_count").get<std::size_t>();
  pert.budget.node_budget = j.at("budget").at("node_budget").get<std::size_t>();
  pert.budget.edge_budget = j.at("budget").at("edge_budget").get<std::size_t>();
  pert.budget.feature_lo = j.at("budget").at("feature_lo").get<double>();
  pert.budget.feature_hi = j.at("budget").at("feature_hi").get<double>();
  const auto& attrs = j.at("attributes");
  pert.injected_attributes =
      Tensor(pert.injected_count, base.feature_dim());
  if (attrs.size() != pert.injected_count)
    throw std::invalid_argument("perturbation: attribute row count mismatch");
  for (std::size_t i = 0; i < pert.injected_count; ++i) {
    const auto& row = attrs.at(i);
    if (row.size() != base.feature_dim())
      throw std::invalid_argument("perturbation: attribute width mismatch");
    for (std::size_t c = 0; c < base.feature_dim(); ++c)
      pert.injected_attributes.at(i, c) = row.at(c).get<double>();
  }
  for (const auto& e : j.at("edges")) {
    const auto inj = e.at(0).get<std::uint32_t>();
    const auto other = e.at(1).get<std::uint32_t>();
    if (inj >= pert.injected_count)
      throw std::invalid_argument("perturbation: injected index out of range");
    pert.injected_edges.emplace_back(
        static_cast<graph::NodeId>(base.num_nodes + inj), other);
  }
  if (seed_out) *seed_out = j.value("seed", std::uint64_t{0});
  pert.validate();
  return pert;
}

void save_surrogate(const models::SurrogateModel& model,
                    const std::string& path) {
  write_json(json{{"version", kFormatVersion},
                  {"kind", "gcn"},
                  {"in_dim", model.in_dim},
                  {"hidden", model.hidden},
                  {"num_classes", model.num_classes},
                  {"tensors", dump_params(model.params)}},
             path);
}

models::SurrogateModel load_surrogate(const std::string& path) {
  json j = read_json(path);
  if (j.at("kind") != "gcn")
    throw std::invalid_argument("checkpoint: not a gcn checkpoint");
  num::Rng rng(0);
  models::SurrogateModel m = models::SurrogateModel::init(
      j.at("in_dim").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
      j.at("num_classes").get<int>(), rng);
  parse_params(j.at("tensors"), m.params);
  return m;
}

void save_gin(const models::GinModel& model, const std::string& path) {
  write_json(
      json{{"version", kFormatVersion},
           {"kind", model.mode == models::GinMode::discriminator
                        ? "gin-disc"
                        : "gin-rep"},
           {"in_dim", model.in_dim},
           {"hidden", model.hidden},
           {"num_classes", model.num_classes},
           {"tensors", dump_params(model.params)}},
      path);
}

models::GinModel load_gin(const std::string& path) {
  json j = read_json(path);
  models::GinMode mode;
  if (j.at("kind") == "gin-disc")
    mode = models::GinMode::discriminator;
  else if (j.at("kind") == "gin-rep")
    mode = models::GinMode::representation;
  else
    throw std::invalid_argument("checkpoint: not a gin checkpoint");
  num::Rng rng(0);
  models::GinModel m = models::GinModel::init(
      mode, j.at("in_dim").get<std::size_t>(),
      j.at("hidden").get<std::size_t>(), j.at("num_classes").get<int>(), rng);
  parse_params(j.at("tensors"), m.params);
  return m;
}

}  // namespace cana::io
