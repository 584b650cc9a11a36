#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "unigen/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

int cmd_run(const std::string& config_path) {
  const unigen::ExperimentConfig cfg = unigen::load_config_file(config_path);
  const unigen::RunRecord rec = unigen::run_experiment(cfg);
  nlohmann::json out;
  out["kind"] = rec.config.kind;
  out["seed"] = rec.config.seed;
  out["hash"] = rec.hash;
  out["output_dir"] = rec.output_dir.string();
  out["summary"] = rec.summary;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, std::size_t instances, double tol) {
  const nlohmann::json report = unigen::verify_lemmas_report(seed, instances, tol);
  std::cout << report.dump(2) << "\n";
  return report["all_pass"].get<bool>() ? kExitOk : kExitNumerical;
}

int cmd_eval(const std::string& card, const std::string& checkpoint, const std::string& dataset,
             std::uint64_t seed, std::size_t eval_samples) {
  std::ifstream in(dataset);
  if (!in) throw unigen::ConfigError("eval: cannot open dataset config " + dataset);
  nlohmann::json dj;
  try {
    in >> dj;
  } catch (const nlohmann::json::parse_error& e) {
    throw unigen::ConfigError("eval: dataset config parse error: " + std::string(e.what()));
  }
  const unigen::DatasetConfig data = unigen::parse_dataset_config(dj);
  const nlohmann::json out =
      unigen::evaluate_checkpoint(card, checkpoint, data, seed, eval_samples);
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_compare(const std::string& config_a, const std::string& config_b, std::size_t seeds,
                std::uint64_t base_seed) {
  const unigen::ExperimentConfig a = unigen::load_config_file(config_a);
  const unigen::ExperimentConfig b = unigen::load_config_file(config_b);
  const nlohmann::json out = unigen::compare_runs(a, b, seeds, base_seed);
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unigen: generative-model training and identity-verification lab"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train or verify per a JSON config");
  run->add_option("config", config_path, "Path to the experiment config JSON")->required();

  std::uint64_t seed = 20240801;
  std::size_t instances = 100;
  double tol = 1e-5;
  auto* verify = app.add_subcommand("verify-lemmas",
                                    "Check the objective identities on seeded finite instances");
  verify->add_option("--seed", seed, "Base seed for instance generation");
  verify->add_option("--instances", instances, "Instances per check family");
  verify->add_option("--tol", tol, "Gradient-identity tolerance");

  std::string card_path, checkpoint_path, dataset_path;
  std::uint64_t eval_seed = 1;
  std::size_t eval_samples = 2000;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint on a dataset");
  eval->add_option("--card", card_path, "model_card.json from a run directory")->required();
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint.json from a run directory")
      ->required();
  eval->add_option("--dataset", dataset_path, "Dataset config JSON")->required();
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--samples", eval_samples, "Model samples drawn for 2D evaluation");

  std::string config_a, config_b;
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 100;
  auto* compare = app.add_subcommand("compare", "Paired-seed comparison of two configs");
  compare->add_option("config_a", config_a, "First experiment config")->required();
  compare->add_option("config_b", config_b, "Second experiment config")->required();
  compare->add_option("--seeds", n_seeds, "Number of paired seeds");
  compare->add_option("--base-seed", base_seed, "First seed of the pair sequence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (verify->parsed()) return cmd_verify(seed, instances, tol);
    if (eval->parsed()) return cmd_eval(card_path, checkpoint_path, dataset_path, eval_seed,
                                        eval_samples);
    if (compare->parsed()) return cmd_compare(config_a, config_b, n_seeds, base_seed);
  } catch (const unigen::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const unigen::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
