// Command-line front end. Links only the C API (cana_c.h); all option
// plumbing happens through JSON strings.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cana/cana_c.h"

namespace {

using json = nlohmann::ordered_json;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
};

json base_options(const Common& common) {
  json opts = json::object();
  if (common.config_path) {
    std::ifstream in(*common.config_path);
    if (!in) {
      std::cerr << "error: cannot open config file: " << *common.config_path
                << "\n";
      std::exit(2);
    }
    opts = json::parse(in);
  }
  if (common.seed) opts["seed"] = *common.seed;
  if (common.out_dir) opts["out_dir"] = *common.out_dir;
  return opts;
}

json dataset_ref(const std::string& sbm_seed_or_empty,
                 const std::string& edges, const std::string& attrs,
                 const std::string& labels) {
  if (!edges.empty())
    return json{{"edges", edges}, {"attrs", attrs}, {"labels", labels}};
  json sbm = json::object();
  if (!sbm_seed_or_empty.empty())
    sbm["seed"] = std::stoull(sbm_seed_or_empty);
  return json{{"sbm", sbm}};
}

int run(const std::string& command, const json& options) {
  cana_session* session = cana_session_new();
  if (session == nullptr) {
    std::cerr << "error: out of memory\n";
    return 4;
  }
  char* result = nullptr;
  const std::string opts_str = options.dump();
  cana_status status =
      cana_run(session, command.c_str(), opts_str.c_str(), &result);
  int exit_code = 0;
  if (status == CANA_OK) {
    std::cout << result << "\n";
  } else {
    std::cerr << "error (" << command << "): " << cana_last_error(session)
              << "\n";
    exit_code = static_cast<int>(status);
  }
  cana_string_free(result);
  cana_session_free(session);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cana: camouflaged node-injection attacks on GNNs"};
  app.set_version_flag("--version", std::string(cana_version()));
  app.require_subcommand(1);

  Common common;
  app.add_option("--seed", common.seed, "global random seed")
      ->envname("CANA_SEED");
  app.add_option("--config", common.config_path,
                 "JSON config file merged under CLI flags");
  app.add_option("--out-dir", common.out_dir, "artifact output directory");

  // Dataset flags shared by every subcommand.
  std::string edges, attrs, labels, sbm_seed;
  auto add_dataset = [&](CLI::App* sub) {
    sub->add_option("--edges", edges, "edge list file (tab separated)");
    sub->add_option("--attrs", attrs, "attribute CSV file");
    sub->add_option("--labels", labels, "label file (one per line)");
    sub->add_option("--sbm-seed", sbm_seed,
                    "use a synthetic SBM dataset with this seed");
  };

  std::string surrogate_path, rep_path, perturbation_path, out_path;
  std::string detector = "all";
  std::string defense = "flag";
  std::string strategy = "direct";
  std::optional<std::size_t> steps, iterations, epochs;
  std::optional<double> lr, alpha, beta;
  std::optional<std::size_t> disc_steps;

  CLI::App* pretrain = app.add_subcommand(
      "pretrain", "train the surrogate classifier and representation model");
  add_dataset(pretrain);
  pretrain->add_option("--surrogate-out", surrogate_path,
                       "surrogate checkpoint output path");
  pretrain->add_option("--rep-out", rep_path,
                       "representation checkpoint output path");
  pretrain->add_option("--epochs", epochs, "surrogate training epochs");
  pretrain->add_option("--lr", lr, "surrogate learning rate");

  CLI::App* attack_cmd =
      app.add_subcommand("attack", "run the PGD node-injection attack");
  add_dataset(attack_cmd);
  attack_cmd->add_option("--surrogate", surrogate_path, "surrogate checkpoint")
      ->required();
  attack_cmd->add_option("--out", out_path, "perturbation output path");
  attack_cmd->add_option("--steps", steps, "gradient steps");
  attack_cmd->add_option("--lr", lr, "attack step size");
  attack_cmd->add_option("--strategy", strategy,
                         "edge strategy: direct | defective");

  CLI::App* cana_cmd = app.add_subcommand(
      "cana-train", "run the adversarial camouflage training loop");
  add_dataset(cana_cmd);
  cana_cmd->add_option("--surrogate", surrogate_path, "surrogate checkpoint")
      ->required();
  cana_cmd->add_option("--rep", rep_path, "representation checkpoint")
      ->required();
  cana_cmd->add_option("--out", out_path, "perturbation output path");
  cana_cmd->add_option("--alpha", alpha, "camouflage loss weight");
  cana_cmd->add_option("--beta", beta, "diversity loss weight");
  cana_cmd->add_option("--iterations", iterations, "training iterations");
  cana_cmd->add_option("--disc-steps", disc_steps,
                       "discriminator steps per iteration");

  CLI::App* metrics_cmd = app.add_subcommand(
      "metrics", "camouflage metrics (GraphFD, CAD, Smooth)");
  add_dataset(metrics_cmd);
  metrics_cmd->add_option("--rep", rep_path, "representation checkpoint")
      ->required();
  metrics_cmd
      ->add_option("--perturbation", perturbation_path, "perturbation file")
      ->required();
  metrics_cmd->add_option("--out", out_path, "report output path");

  CLI::App* detect_cmd =
      app.add_subcommand("detect", "run anomaly detectors on a perturbation");
  add_dataset(detect_cmd);
  detect_cmd->add_option("--rep", rep_path, "representation checkpoint")
      ->required();
  detect_cmd
      ->add_option("--perturbation", perturbation_path, "perturbation file")
      ->required();
  detect_cmd->add_option("--detector", detector,
                         "copod | pca | hbos | iforest | ae | all");
  detect_cmd->add_option("--out", out_path, "report output path");

  CLI::App* defend_cmd =
      app.add_subcommand("defend", "evaluate a defense on a perturbation");
  add_dataset(defend_cmd);
  defend_cmd->add_option("--defense", defense, "flag | guard-lite");
  defend_cmd->add_option("--surrogate", surrogate_path,
                         "surrogate checkpoint (guard-lite)");
  defend_cmd->add_option("--perturbation", perturbation_path,
                         "perturbation file");
  defend_cmd->add_option("--out", out_path, "report output path");

  CLI::App* pipeline_cmd = app.add_subcommand(
      "pipeline", "full experiment: pretrain, attack variants, evaluation");
  add_dataset(pipeline_cmd);
  pipeline_cmd->add_option("--alpha", alpha, "camouflage loss weight");
  pipeline_cmd->add_option("--beta", beta, "diversity loss weight");
  pipeline_cmd->add_option("--iterations", iterations, "attack iterations");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  json opts = base_options(common);
  if (!edges.empty() || !sbm_seed.empty() || !opts.contains("dataset"))
    opts["dataset"] = !edges.empty() || !sbm_seed.empty()
                          ? dataset_ref(sbm_seed, edges, attrs, labels)
                          : json{{"sbm", json::object()}};
  if (!surrogate_path.empty()) {
    if (app.got_subcommand(pretrain))
      opts["surrogate_out"] = surrogate_path;
    else
      opts["surrogate"] = surrogate_path;
  }
  if (!rep_path.empty()) {
    if (app.got_subcommand(pretrain))
      opts["rep_out"] = rep_path;
    else
      opts["rep"] = rep_path;
  }
  if (!perturbation_path.empty()) opts["perturbation"] = perturbation_path;
  if (!out_path.empty()) opts["out"] = out_path;
  if (steps) opts["steps"] = *steps;
  if (iterations) opts["iterations"] = *iterations;
  if (epochs) opts["epochs"] = *epochs;
  if (lr) opts["lr"] = *lr;
  if (alpha) opts["alpha"] = *alpha;
  if (beta) opts["beta"] = *beta;
  if (disc_steps) opts["disc_steps"] = *disc_steps;
  if (strategy != "direct") opts["strategy"] = strategy;
  if (app.got_subcommand(defend_cmd)) opts["defense"] = defense;
  if (app.got_subcommand(detect_cmd)) opts["detector"] = detector;

  std::string command = app.get_subcommands().front()->get_name();
  return run(command, opts);
}
