#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "unigen/datasets.hpp"
#include "unigen/models.hpp"
#include "unigen/param_set.hpp"

namespace unigen {

/// Malformed or inconsistent configuration. The CLI maps this to exit 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training hit non-finite numbers; a diagnostic record is written to the
/// run directory first when one exists. The CLI maps this to exit 2.
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  enum class Kind { Mixture2D, Idx, Synthetic1D } kind = Kind::Mixture2D;
  MixtureSpec mixture = canonical_mixture();
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  double subset_fraction = 1.0;
  bool binarize = true;
  double binarize_threshold = 0.5;
  tabular::Dist probs;  // Synthetic1D bin probabilities
};

struct ModelConfig {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  PriorSpec::Kind prior = PriorSpec::Kind::StandardNormal;
  // Fixed decoder log-variance for continuous outputs; default matches the
  // benchmark mixture component scale (2·ln 0.3).
  double dec_logvar = -2.4079456086518722;
};

struct ExperimentConfig {
  std::string kind;  // gan | iwgan | infogan | aae | vae | aavae | wakesleep | verify-lemmas
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  std::size_t log_every = 100;
  std::size_t iw_k = 0;            // importance-sample count; 0 means batch_size
  double temperature = 3.0;        // branch-weight smoothing, >= 1
  std::size_t snapshot_every = 0;  // generator-snapshot cadence; 0 means one pass over the data
  std::size_t eval_samples = 2000;
  ModelConfig model;
  AdamConfig optim;
  DatasetConfig data;
  std::string output_dir;  // empty: keep results in memory only
  // verify-lemmas parameters
  std::size_t instances = 100;
  double tol = 1e-5;

  nlohmann::json to_json() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path);
DatasetConfig parse_dataset_config(const nlohmann::json& j);
/// FNV-1a over the canonical serialization.
std::string config_hash(const nlohmann::json& canonical);

struct RunRecord {
  ExperimentConfig config;
  std::string hash;
  std::vector<nlohmann::json> metrics;  // one row per logged step
  nlohmann::json summary;               // end-of-run evaluation
  std::filesystem::path output_dir;     // empty when nothing was written
  std::int64_t real_examples = 0;       // real examples consumed by updates
  std::int64_t fake_examples = 0;       // generated examples consumed by updates
};

/// Effective run directory: $UNIGEN_OUTPUT_ROOT prefixes a relative
/// output_dir and names a default subdirectory (<kind>-seed<seed>) when the
/// config leaves output_dir empty. Empty result means write nothing.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Train (or verify) per config.kind and evaluate. Artifacts land in the
/// resolved output dir: config/metrics/summary/checkpoint/model card, plus
/// sample scatter for 2D runs.
RunRecord run_experiment(const ExperimentConfig& cfg);

/// Identity checks on seeded finite instances: gradient identity between the
/// two adversarial forms, the divergence bound, the optimal-discriminator
/// specialization, the ELBO rewriting, and the degeneration checks. Returns
/// one JSON entry per check family with pass flags and worst-case errors.
nlohmann::json verify_lemmas_report(std::uint64_t seed, std::size_t instances, double tol);

/// Paired-seed comparison: run both configs at seeds base_seed..base_seed+n−1
/// and report per-seed summary metrics, deltas (a − b), and medians.
nlohmann::json compare_runs(ExperimentConfig a, ExperimentConfig b, std::size_t n_seeds,
                            std::uint64_t base_seed);

/// Rebuild a model from its card + checkpoint and evaluate it on a dataset.
nlohmann::json evaluate_checkpoint(const std::filesystem::path& card_path,
                                   const std::filesystem::path& checkpoint_path,
                                   const DatasetConfig& data, std::uint64_t seed,
                                   std::size_t eval_samples);

double median(std::vector<double> v);

}  // namespace unigen
