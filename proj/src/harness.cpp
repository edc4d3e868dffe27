#include "cana/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "cana/attack.hpp"
#include "cana/defend.hpp"
#include "cana/detect.hpp"
#include "cana/engine.hpp"
#include "cana/io.hpp"
#include "cana/metrics.hpp"
#include "cana/models.hpp"

namespace cana::harness {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using graph::AttackBudget;
using graph::AttributedGraph;
using graph::NodeId;
using graph::PerturbedGraph;
using models::GinModel;
using models::SurrogateModel;
using num::Rng;
using num::Tensor;

[[noreturn]] void stage_fail(const std::string& stage,
                             const std::string& msg) {
  throw std::runtime_error("[" + stage + "] " + msg);
}

double jd(const json& j, const char* key, double dflt) {
  return j.value(key, dflt);
}

std::size_t ji(const json& j, const char* key, std::size_t dflt) {
  return j.value(key, dflt);
}

models::EgoOptions ego_options(const json& j, std::uint64_t seed) {
  models::EgoOptions opt;
  opt.seed = seed;
  if (j.contains("ego")) {
    const json& e = j.at("ego");
    opt.hops = ji(e, "hops", opt.hops);
    if (e.contains("cap")) {
      if (e.at("cap").is_null())
        opt.cap.reset();
      else
        opt.cap = e.at("cap").get<std::size_t>();
    }
  }
  return opt;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// --- dataset ---------------------------------------------------------------

SbmParams sbm_from_json(const json& j) {
  SbmParams p;
  p.blocks = ji(j, "blocks", p.blocks);
  p.block_size = ji(j, "block_size", p.block_size);
  p.p_in = jd(j, "p_in", p.p_in);
  p.p_out = jd(j, "p_out", p.p_out);
  p.dim = ji(j, "dim", p.dim);
  p.signal = jd(j, "signal", p.signal);
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

// --- shared pieces ----------------------------------------------------------

std::vector<std::size_t> pick_train_mask(std::size_t n, double fraction,
                                         Rng rng) {
  auto mask = rng.sample_without_replacement(
      n, std::max<std::size_t>(1, static_cast<std::size_t>(
                                      fraction * static_cast<double>(n))));
  std::sort(mask.begin(), mask.end());
  return mask;
}

std::vector<NodeId> select_targets(const AttributedGraph& g,
                                   SurrogateModel& surrogate,
                                   double fraction, bool attributable,
                                   Rng rng) {
  std::vector<std::size_t> candidates;
  if (attributable) {
    // Prefer nodes the clean surrogate classifies correctly, so that
    // attack-induced misclassification is attributable to the attack.
    Tensor logits = gcn_logits(surrogate, g);
    auto pred = models::predict_classes(logits);
    for (std::size_t v = 0; v < g.num_nodes; ++v)
      if (pred[v] == g.labels[v]) candidates.push_back(v);
  }
  if (candidates.empty()) {
    candidates.resize(g.num_nodes);
    for (std::size_t v = 0; v < g.num_nodes; ++v) candidates[v] = v;
  }
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(fraction *
                                  static_cast<double>(g.num_nodes)));
  auto idx = rng.sample_without_replacement(candidates.size(),
                                            std::min(want, candidates.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<NodeId> targets;
  targets.reserve(idx.size());
  for (std::size_t i : idx)
    targets.push_back(static_cast<NodeId>(candidates[i]));
  return targets;
}

AttackBudget budget_from_json(const json& j, const AttributedGraph& g,
                              std::size_t num_targets) {
  AttackBudget b;
  b.node_budget = ji(j, "node_budget", num_targets);
  b.edge_budget = ji(j, "edge_budget", 3);
  if (j.contains("feature_lo") && j.contains("feature_hi")) {
    b.feature_lo = j.at("feature_lo").get<double>();
    b.feature_hi = j.at("feature_hi").get<double>();
  } else {
    // Default: the clean graph's attribute range.
    b.feature_lo = *std::min_element(g.attributes.v.begin(),
                                     g.attributes.v.end());
    b.feature_hi = *std::max_element(g.attributes.v.begin(),
                                     g.attributes.v.end());
  }
  b.validate();
  return b;
}

std::vector<NodeId> targets_from_json(const json& j, const AttributedGraph& g,
                                      SurrogateModel& surrogate,
                                      std::uint64_t seed) {
  if (j.contains("targets_file")) {
    std::ifstream in(j.at("targets_file").get<std::string>());
    if (!in) stage_fail("targets", "cannot open targets file");
    std::vector<NodeId> targets;
    long v = 0;
    while (in >> v) {
      if (v < 0 || static_cast<std::size_t>(v) >= g.num_nodes)
        stage_fail("targets", "target id out of range");
      targets.push_back(static_cast<NodeId>(v));
    }
    if (targets.empty()) stage_fail("targets", "empty targets file");
    return targets;
  }
  return select_targets(g, surrogate, jd(j, "target_fraction", 0.2),
                        j.value("attributable", true),
                        Rng(seed).split("targets"));
}

engine::CanaConfig cana_config_from_json(const json& j, std::uint64_t seed) {
  engine::CanaConfig cfg;
  cfg.alpha = jd(j, "alpha", cfg.alpha);
  cfg.beta = jd(j, "beta", cfg.beta);
  cfg.disc_steps = ji(j, "disc_steps", cfg.disc_steps);
  cfg.iterations = ji(j, "iterations", cfg.iterations);
  cfg.disc_lr = jd(j, "disc_lr", cfg.disc_lr);
  cfg.gen_lr = jd(j, "gen_lr", cfg.gen_lr);
  cfg.real_batch = ji(j, "real_batch", cfg.real_batch);
  cfg.fake_batch = ji(j, "fake_batch", cfg.fake_batch);
  cfg.disc_hidden = ji(j, "disc_hidden", cfg.disc_hidden);
  cfg.ego = ego_options(j, seed);
  cfg.seed = seed;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) stage_fail("io", "cannot open output file: " + path);
  out << text;
}

void write_json_file(const json& j, const std::string& path) {
  write_text(path, j.dump(2) + "\n");
}

std::string trace_csv(const std::vector<engine::LossReport>& trace) {
  std::ostringstream os;
  os << "iteration,atk,gan_g,div,total,gan_d\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    double gd = 0.0;
    for (double v : trace[i].gan_d) gd += v;
    if (!trace[i].gan_d.empty())
      gd /= static_cast<double>(trace[i].gan_d.size());
    os << i << ',' << fmt(trace[i].atk) << ',' << fmt(trace[i].gan_g) << ','
       << fmt(trace[i].div) << ',' << fmt(trace[i].total) << ',' << fmt(gd)
       << '\n';
  }
  return os.str();
}

json camouflage_to_json(const metrics::CamouflageReport& rep) {
  return json{{"graph_fd", rep.graph_fd},
              {"cad_mean", rep.cad_mean},
              {"smooth_mean", rep.smooth_mean},
              {"smooth_isolated", rep.smooth_isolated},
              {"cad_values", rep.cad_values},
              {"smooth_values",
               [&] {
                 json arr = json::array();
                 for (double v : rep.smooth_values) {
                   if (std::isnan(v))
                     arr.push_back(nullptr);
                   else
                     arr.push_back(v);
                 }
                 return arr;
               }()}};
}

// --- subcommands -------------------------------------------------------------

json run_pretrain(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  auto train_mask = pick_train_mask(g.num_nodes, jd(opts, "train_fraction", 0.5),
                                    Rng(seed).split("train_mask"));
  SurrogateModel surrogate = models::pretrain_surrogate(
      g, train_mask, ji(opts, "epochs", 300), jd(opts, "lr", 0.01), seed,
      ji(opts, "hidden", 64));
  GinModel rep = models::pretrain_representation(
      g, ji(opts, "rep_epochs", 10), jd(opts, "rep_lr", 1e-3), seed,
      ji(opts, "rep_hidden", 64), ego_options(opts, seed));

  if (opts.contains("surrogate_out"))
    io::save_surrogate(surrogate, opts.at("surrogate_out"));
  if (opts.contains("rep_out")) io::save_gin(rep, opts.at("rep_out"));

  std::vector<std::size_t> all(g.num_nodes);
  for (std::size_t v = 0; v < g.num_nodes; ++v) all[v] = v;
  Tensor logits = gcn_logits(surrogate, g);
  return json{{"train_accuracy",
               models::accuracy(logits, train_mask, g.labels)},
              {"accuracy", models::accuracy(logits, all, g.labels)}};
}

json run_attack(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  SurrogateModel surrogate =
      io::load_surrogate(opts.at("surrogate").get<std::string>());
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  auto targets = targets_from_json(opts, g, surrogate, seed);
  AttackBudget budget = budget_from_json(opts, g, targets.size());
  const auto strategy = opts.value("strategy", std::string("direct")) ==
                                std::string("defective")
                            ? attack::EdgeStrategy::defective
                            : attack::EdgeStrategy::direct;
  auto plan = attack::select_edges(g, targets, budget, strategy, seed);
  PerturbedGraph pert =
      attack::pgd_attack(g, targets, budget, surrogate, ji(opts, "steps", 200),
                         jd(opts, "lr", 0.1), plan, seed);
  if (opts.contains("out"))
    io::save_perturbation(pert, seed, opts.at("out"));

  std::vector<std::size_t> target_rows(targets.begin(), targets.end());
  const double clean_rate = attack::misclassification_rate(
      gcn_logits(surrogate, g), target_rows, g.labels);
  AttributedGraph merged = materialize(pert);
  const double attacked_rate = attack::misclassification_rate(
      gcn_logits(surrogate, merged), target_rows, g.labels);
  return json{{"targets", targets},
              {"clean_misclassification", clean_rate},
              {"attacked_misclassification", attacked_rate}};
}

json run_cana_train(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  SurrogateModel surrogate =
      io::load_surrogate(opts.at("surrogate").get<std::string>());
  GinModel rep = io::load_gin(opts.at("rep").get<std::string>());
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  auto targets = targets_from_json(opts, g, surrogate, seed);
  AttackBudget budget = budget_from_json(opts, g, targets.size());
  const auto strategy = opts.value("base_attack", std::string("pgd")) == "pgd"
                            ? (opts.value("strategy", std::string("direct")) ==
                                       std::string("defective")
                                   ? attack::EdgeStrategy::defective
                                   : attack::EdgeStrategy::direct)
                            : attack::EdgeStrategy::direct;
  auto plan = attack::select_edges(g, targets, budget, strategy, seed);
  engine::CanaConfig cfg = cana_config_from_json(opts, seed);
  engine::CanaResult result =
      engine::cana_train(g, targets, budget, surrogate, rep, cfg, plan);

  if (opts.contains("out"))
    io::save_perturbation(result.perturbed, seed, opts.at("out"));
  if (opts.contains("trace_out"))
    write_text(opts.at("trace_out"), trace_csv(result.trace));

  std::vector<std::size_t> target_rows(targets.begin(), targets.end());
  AttributedGraph merged = materialize(result.perturbed);
  return json{{"targets", targets},
              {"iterations", result.trace.size()},
              {"final_atk",
               result.trace.empty() ? 0.0 : result.trace.back().atk},
              {"attacked_misclassification",
               attack::misclassification_rate(gcn_logits(surrogate, merged),
                                              target_rows, g.labels)}};
}

json run_metrics(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  GinModel rep = io::load_gin(opts.at("rep").get<std::string>());
  PerturbedGraph pert =
      io::load_perturbation(g, opts.at("perturbation").get<std::string>());
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  auto report =
      metrics::camouflage_report(g, pert, rep, ego_options(opts, seed));
  json out = camouflage_to_json(report);
  if (opts.contains("out")) write_json_file(out, opts.at("out"));
  return out;
}

json detect_one(detect::DetectorKind kind, const Tensor& embeddings,
                double contamination,
                const std::vector<std::size_t>& injected,
                std::uint64_t seed) {
  auto scores = detect::fit_score(kind, embeddings, seed);
  auto flagged = detect::flag(scores, contamination);
  return json{{"detector", detect::detector_name(kind)},
              {"contamination", contamination},
              {"flagged", flagged},
              {"detection_accuracy",
               detect::detection_accuracy(flagged, injected)}};
}

json run_detect(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  GinModel rep = io::load_gin(opts.at("rep").get<std::string>());
  PerturbedGraph pert =
      io::load_perturbation(g, opts.at("perturbation").get<std::string>());
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  AttributedGraph merged = materialize(pert);

  std::vector<NodeId> all_nodes(merged.num_nodes);
  for (std::size_t v = 0; v < merged.num_nodes; ++v)
    all_nodes[v] = static_cast<NodeId>(v);
  const std::string input = opts.value("input", std::string("ego"));
  Tensor data;
  if (input == "ego") {
    data = metrics::embed_egos(rep, merged, all_nodes,
                               ego_options(opts, seed));
  } else if (input == "attr") {
    data = merged.attributes;
  } else {
    stage_fail("detect", "unknown input kind: " + input);
  }

  std::vector<std::size_t> injected(pert.injected_count);
  for (std::size_t i = 0; i < pert.injected_count; ++i)
    injected[i] = pert.injected_global_id(i);
  const double contamination =
      jd(opts, "contamination",
         static_cast<double>(pert.injected_count) /
             static_cast<double>(merged.num_nodes));

  json reports = json::array();
  const std::string which = opts.value("detector", std::string("all"));
  for (detect::DetectorKind kind : detect::all_detectors()) {
    if (which != "all" && detect::detector_name(kind) != which) continue;
    reports.push_back(detect_one(kind, data, contamination, injected,
                                 Rng(seed).split(detect::detector_name(kind))
                                     .next_u64()));
  }
  if (reports.empty()) stage_fail("detect", "unknown detector: " + which);
  json out{{"contamination", contamination}, {"reports", reports}};
  if (opts.contains("out")) write_json_file(out, opts.at("out"));
  return out;
}

json run_defend(const json& opts) {
  AttributedGraph g = load_dataset(opts.at("dataset"));
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  const std::string defense = opts.value("defense", std::string("flag"));

  std::optional<PerturbedGraph> pert;
  if (opts.contains("perturbation")) {
    pert = io::load_perturbation(g, opts.at("perturbation"));
  }

  SurrogateModel model = [&] {
    if (defense == "flag") {
      auto train_mask =
          pick_train_mask(g.num_nodes, jd(opts, "train_fraction", 0.5),
                          Rng(seed).split("train_mask"));
      const double range =
          *std::max_element(g.attributes.v.begin(), g.attributes.v.end()) -
          *std::min_element(g.attributes.v.begin(), g.attributes.v.end());
      return defend::flag_train(
          g, train_mask, ji(opts, "ascent_steps", 3),
          jd(opts, "step_size", 0.01 * range), ji(opts, "epochs", 300),
          jd(opts, "lr", 0.01), seed, ji(opts, "hidden", 64));
    }
    if (defense == "guard-lite") {
      if (!opts.contains("surrogate"))
        stage_fail("defend", "guard-lite needs a surrogate checkpoint");
      return io::load_surrogate(opts.at("surrogate"));
    }
    stage_fail("defend", "unknown defense: " + defense);
  }();

  const double threshold = jd(opts, "prune_threshold", 0.1);
  auto evaluate = [&](const AttributedGraph& graph_in,
                      const std::vector<std::size_t>& rows) {
    const AttributedGraph pruned =
        defense == "guard-lite" ? defend::guard_prune(graph_in, threshold)
                                : graph_in;
    return attack::misclassification_rate(gcn_logits(model, pruned), rows,
                                          graph_in.labels);
  };

  std::vector<std::size_t> all(g.num_nodes);
  for (std::size_t v = 0; v < g.num_nodes; ++v) all[v] = v;
  json out{{"defense", defense},
           {"clean_misclassification", evaluate(g, all)}};
  if (pert) {
    AttributedGraph merged = materialize(*pert);
    out["attacked_misclassification"] = evaluate(merged, all);
  }
  if (opts.contains("out")) write_json_file(out, opts.at("out"));
  return out;
}

// --- pipeline ----------------------------------------------------------------

struct VariantResult {
  std::string name;
  std::map<std::string, double> misclassification;  // by evaluator
  std::map<std::string, double> detector_recall;
  json camouflage;  // null for clean
};

json run_pipeline(const json& opts) {
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  const std::string out_dir = opts.value("out_dir", std::string("."));
  fs::create_directories(out_dir);

  AttributedGraph g = load_dataset(opts.at("dataset"));
  models::EgoOptions ego = ego_options(opts, seed);

  // Pretraining.
  auto train_mask = pick_train_mask(g.num_nodes, jd(opts, "train_fraction", 0.5),
                                    Rng(seed).split("train_mask"));
  SurrogateModel surrogate = models::pretrain_surrogate(
      g, train_mask, ji(opts, "epochs", 300), jd(opts, "lr", 0.01), seed,
      ji(opts, "hidden", 64));
  GinModel rep = models::pretrain_representation(
      g, ji(opts, "rep_epochs", 10), jd(opts, "rep_lr", 1e-3), seed,
      ji(opts, "rep_hidden", 64), ego);

  auto targets = targets_from_json(opts, g, surrogate, seed);
  std::vector<std::size_t> target_rows(targets.begin(), targets.end());
  AttackBudget budget = budget_from_json(opts, g, targets.size());
  auto plan = attack::select_edges(g, targets, budget,
                                   attack::EdgeStrategy::direct, seed);
  engine::CanaConfig cana_cfg = cana_config_from_json(opts, seed);

  // FLAG defense model is trained once, on the clean graph.
  const double range_width = budget.feature_hi - budget.feature_lo;
  SurrogateModel flag_model = defend::flag_train(
      g, train_mask, ji(opts, "flag_ascent_steps", 3),
      jd(opts, "flag_step_size", 0.01 * range_width), ji(opts, "epochs", 300),
      jd(opts, "lr", 0.01), seed, ji(opts, "hidden", 64));
  const double prune_threshold = jd(opts, "prune_threshold", 0.1);

  const double clean_rate = attack::misclassification_rate(
      gcn_logits(surrogate, g), target_rows, g.labels);

  // Attack variants.
  std::vector<std::pair<std::string, PerturbedGraph>> variants;
  variants.emplace_back(
      "pgd", attack::pgd_attack(g, targets, budget, surrogate,
                                cana_cfg.iterations, cana_cfg.gen_lr, plan,
                                seed));
  {
    engine::CanaConfig ablate = cana_cfg;
    ablate.alpha = 0.0;
    ablate.beta = 0.0;
    auto res = engine::cana_train(g, targets, budget, surrogate, rep, ablate,
                                  plan);
    write_text(out_dir + "/loss_trace_pgd_cana_alpha0.csv",
               trace_csv(res.trace));
    variants.emplace_back("pgd_cana_alpha0", std::move(res.perturbed));
  }
  {
    auto res =
        engine::cana_train(g, targets, budget, surrogate, rep, cana_cfg, plan);
    write_text(out_dir + "/loss_trace_pgd_cana.csv", trace_csv(res.trace));
    variants.emplace_back("pgd_cana", std::move(res.perturbed));
  }

  const std::vector<std::string> evaluator_names = {
      "copod", "pca", "hbos", "iforest", "ae", "flag", "guard-lite"};

  std::vector<VariantResult> results;

  // Clean row: nothing to filter, every evaluator that filters sees the
  // clean graph; defenses run their defended model.
  {
    VariantResult vr;
    vr.name = "clean";
    vr.misclassification["undefended"] = clean_rate;
    for (detect::DetectorKind kind : detect::all_detectors())
      vr.misclassification[detect::detector_name(kind)] = clean_rate;
    vr.misclassification["flag"] = attack::misclassification_rate(
        gcn_logits(flag_model, g), target_rows, g.labels);
    AttributedGraph pruned = defend::guard_prune(g, prune_threshold);
    vr.misclassification["guard-lite"] = attack::misclassification_rate(
        gcn_logits(surrogate, pruned), target_rows, g.labels);
    vr.camouflage = nullptr;
    results.push_back(std::move(vr));
  }

  for (auto& [name, pert] : variants) {
    VariantResult vr;
    vr.name = name;
    io::save_perturbation(pert, seed, out_dir + "/perturbation_" + name +
                                          ".json");
    AttributedGraph merged = materialize(pert);
    vr.misclassification["undefended"] = attack::misclassification_rate(
        gcn_logits(surrogate, merged), target_rows, g.labels);

    // Detector evaluators: filter-then-classify protocol.
    std::vector<NodeId> all_nodes(merged.num_nodes);
    for (std::size_t v = 0; v < merged.num_nodes; ++v)
      all_nodes[v] = static_cast<NodeId>(v);
    Tensor embeddings = metrics::embed_egos(rep, merged, all_nodes, ego);
    std::vector<std::size_t> injected(pert.injected_count);
    for (std::size_t i = 0; i < pert.injected_count; ++i)
      injected[i] = pert.injected_global_id(i);
    const double contamination = static_cast<double>(pert.injected_count) /
                                 static_cast<double>(merged.num_nodes);
    for (detect::DetectorKind kind : detect::all_detectors()) {
      const std::string dname = detect::detector_name(kind);
      auto scores = detect::fit_score(
          kind, embeddings, Rng(seed).split(name).split(dname).next_u64());
      auto flagged = detect::flag(scores, contamination);
      vr.detector_recall[dname] =
          detect::detection_accuracy(flagged, injected);
      auto outcome =
          detect::filter_and_classify(pert, flagged, surrogate, targets);
      vr.misclassification[dname] = outcome.misclassification;
    }

    // Defense evaluators.
    vr.misclassification["flag"] = attack::misclassification_rate(
        gcn_logits(flag_model, merged), target_rows, g.labels);
    AttributedGraph pruned = defend::guard_prune(merged, prune_threshold);
    vr.misclassification["guard-lite"] = attack::misclassification_rate(
        gcn_logits(surrogate, pruned), target_rows, g.labels);

    auto cam = metrics::camouflage_report(g, pert, rep, ego);
    vr.camouflage = camouflage_to_json(cam);
    write_json_file(vr.camouflage, out_dir + "/camouflage_" + name + ".json");
    results.push_back(std::move(vr));
  }

  // Result table with Average / Median across the detector and defense
  // evaluators (undefended excluded, as in the source tables).
  json table = json::array();
  std::ostringstream csv;
  csv << "variant,undefended";
  for (const auto& e : evaluator_names) csv << ',' << e;
  csv << ",average,median\n";
  for (auto& vr : results) {
    std::vector<double> vals;
    for (const auto& e : evaluator_names)
      vals.push_back(vr.misclassification.at(e));
    double avg = 0.0;
    for (double v : vals) avg += v;
    avg /= static_cast<double>(vals.size());
    auto sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1
                              ? sorted[mid]
                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
    json row{{"variant", vr.name},
             {"misclassification", vr.misclassification},
             {"average", avg},
             {"median", median}};
    if (!vr.detector_recall.empty()) row["detector_recall"] = vr.detector_recall;
    if (!vr.camouflage.is_null()) row["camouflage"] = vr.camouflage;
    table.push_back(row);
    csv << vr.name << ',' << fmt(vr.misclassification.at("undefended"));
    for (const auto& e : evaluator_names)
      csv << ',' << fmt(vr.misclassification.at(e));
    csv << ',' << fmt(avg) << ',' << fmt(median) << '\n';
  }

  json manifest{{"version", kVersion},
                {"command", "pipeline"},
                {"seed", seed},
                {"config", opts},
                {"num_nodes", g.num_nodes},
                {"num_targets", targets.size()}};
  json out{{"table", table}, {"manifest", manifest}};
  write_text(out_dir + "/result_table.csv", csv.str());
  write_json_file(table, out_dir + "/result_table.json");
  write_json_file(manifest, out_dir + "/manifest.json");
  return out;
}

}  // namespace

AttributedGraph generate_sbm(const SbmParams& params) {
  num::require(params.p_in > params.p_out,
               "generate_sbm: p_in must exceed p_out");
  num::require(params.p_in <= 1.0 && params.p_out >= 0.0,
               "generate_sbm: invalid probabilities");
  num::require(params.block_size >= 2, "generate_sbm: block_size must be >= 2");
  num::require(params.dim >= params.blocks,
               "generate_sbm: dim must be >= blocks for orthonormal prototypes");
  Rng rng = Rng(params.seed).split("sbm");
  AttributedGraph g;
  g.num_nodes = params.blocks * params.block_size;
  g.num_classes = static_cast<int>(params.blocks);
  g.labels.resize(g.num_nodes);
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    g.labels[v] = static_cast<int>(v / params.block_size);

  Rng edge_rng = rng.split("edges");
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t v = u + 1; v < g.num_nodes; ++v) {
      const double p =
          g.labels[u] == g.labels[v] ? params.p_in : params.p_out;
      if (edge_rng.uniform() < p)
        g.edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }

  // Block prototype b is signal * e_b (orthonormal basis vectors).
  Rng feat_rng = rng.split("features");
  g.attributes = Tensor(g.num_nodes, params.dim);
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    for (std::size_t j = 0; j < params.dim; ++j) {
      double mu = static_cast<std::size_t>(g.labels[v]) == j
                      ? params.signal
                      : 0.0;
      g.attributes.at(v, j) = mu + feat_rng.normal();
    }
  g.finalize();
  return g;
}

AttributedGraph load_dataset(const json& spec) {
  if (spec.contains("sbm")) return generate_sbm(sbm_from_json(spec.at("sbm")));
  if (spec.contains("edges"))
    return graph::load_graph(spec.at("edges"), spec.at("attrs"),
                             spec.at("labels"));
  throw std::invalid_argument(
      "dataset: expected either {\"sbm\": ...} or {\"edges\", \"attrs\", "
      "\"labels\"}");
}

json run_command(const std::string& command, const json& options) {
  try {
    if (command == "pretrain") return run_pretrain(options);
    if (command == "attack") return run_attack(options);
    if (command == "cana-train") return run_cana_train(options);
    if (command == "metrics") return run_metrics(options);
    if (command == "detect") return run_detect(options);
    if (command == "defend") return run_defend(options);
    if (command == "pipeline") return run_pipeline(options);
  } catch (const json::exception& e) {
    // Missing or mistyped option keys are caller errors, not stage failures.
    throw std::invalid_argument(std::string("bad options: ") + e.what());
  }
  throw std::invalid_argument("unknown command: " + command);
}

}  // namespace cana::harness
