#include "unigen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "unigen/lemma_oracle.hpp"
#include "unigen/metrics.hpp"
#include "unigen/objectives.hpp"
#include "unigen/tape.hpp"

namespace unigen {

using nlohmann::json;

namespace {

const std::set<std::string> kKinds = {"gan",    "iwgan", "infogan",  "aae",
                                      "vae",    "aavae", "wakesleep", "verify-lemmas"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) {
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

const json& require_key(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError("config: missing required key \"" + std::string(key) + "\" in " + where);
  }
  return *it;
}

double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError("config: " + what + " must be a number");
  return v.get<double>();
}

std::size_t as_positive_int(const json& v, const std::string& what) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ConfigError("config: " + what + " must be a positive integer");
  }
  const auto x = v.get<std::int64_t>();
  if (x <= 0) throw ConfigError("config: " + what + " must be >= 1, got " + std::to_string(x));
  return static_cast<std::size_t>(x);
}

std::string as_string(const json& v, const std::string& what) {
  if (!v.is_string()) throw ConfigError("config: " + what + " must be a string");
  return v.get<std::string>();
}

void flatten_numbers(const json& j, const std::string& prefix,
                     std::vector<std::pair<std::string, double>>& out) {
  if (j.is_number()) {
    out.emplace_back(prefix, j.get<double>());
  } else if (j.is_boolean()) {
    out.emplace_back(prefix, j.get<bool>() ? 1.0 : 0.0);
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten_numbers(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      flatten_numbers(j[i], prefix + "[" + std::to_string(i) + "]", out);
    }
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Rows of a [n,d] tensor drawn with replacement.
Tensor rows_with_replacement(const Tensor& x, std::size_t n, RngStream& rng) {
  const std::size_t d = x.cols();
  Tensor out = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = static_cast<std::size_t>(rng.next_below(x.rows()));
    for (std::size_t c = 0; c < d; ++c) out.at(i, c) = x.at(r, c);
  }
  return out;
}

struct DataSource {
  DatasetConfig cfg;
  Tensor train;  // empty for the infinite samplers
  Tensor test;
  std::size_t x_dim = 0;

  Tensor next_batch(std::size_t n, RngStream& rng) const {
    switch (cfg.kind) {
      case DatasetConfig::Kind::Mixture2D:
        return sample_mixture_2d(cfg.mixture, n, rng);
      case DatasetConfig::Kind::Synthetic1D:
        return sample_tabular_1d(cfg.probs, n, rng);
      case DatasetConfig::Kind::Idx:
        return rows_with_replacement(train, n, rng);
    }
    throw std::logic_error("next_batch: unreachable");
  }
};

DataSource open_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  DataSource src;
  src.cfg = cfg;
  switch (cfg.kind) {
    case DatasetConfig::Kind::Mixture2D:
      src.x_dim = 2;
      break;
    case DatasetConfig::Kind::Synthetic1D:
      src.x_dim = 1;
      break;
    case DatasetConfig::Kind::Idx: {
      IdxDataset train = load_mnist_idx(cfg.train_images, cfg.train_labels, cfg.subset_fraction,
                                        seed, cfg.binarize, cfg.binarize_threshold);
      src.train = std::move(train.images);
      src.x_dim = src.train.cols();
      if (!cfg.test_images.empty()) {
        IdxDataset test = load_mnist_idx(cfg.test_images, cfg.test_labels, 1.0, seed, cfg.binarize,
                                         cfg.binarize_threshold);
        if (test.images.cols() != src.x_dim) {
          throw ConfigError("config: train/test image dimensions differ");
        }
        src.test = std::move(test.images);
      }
      break;
    }
  }
  return src;
}

struct NetBundle {
  std::optional<Mlp> gen, disc, code, enc, dec, disc_z;
};

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                std::size_t out) {
  std::vector<std::size_t> w;
  w.reserve(hidden.size() + 2);
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

NetBundle make_nets(const std::string& kind, std::size_t x_dim, const ModelConfig& mc,
                    bool bernoulli) {
  NetBundle b;
  const auto& h = mc.hidden;
  const std::size_t L = mc.latent_dim;
  if (kind == "gan" || kind == "iwgan" || kind == "infogan") {
    b.gen.emplace(MlpSpec{widths(L, h, x_dim)}, "gen");
    b.disc.emplace(MlpSpec{widths(x_dim, h, 1)}, "disc");
    if (kind == "infogan") {
      b.code.emplace(MlpSpec{widths(x_dim, h, 2 * L), Activation::Tanh, HeadKind::GaussianParams},
                     "code");
    }
  } else if (kind == "aae") {
    b.enc.emplace(MlpSpec{widths(x_dim, h, L)}, "enc");
    b.dec.emplace(MlpSpec{widths(L, h, 2 * x_dim), Activation::Tanh, HeadKind::GaussianParams},
                  "dec");
    b.disc_z.emplace(MlpSpec{widths(L, h, 1)}, "disc");
  } else if (kind == "vae" || kind == "aavae" || kind == "wakesleep") {
    b.enc.emplace(MlpSpec{widths(x_dim, h, 2 * L), Activation::Tanh, HeadKind::GaussianParams},
                  "enc");
    b.dec.emplace(MlpSpec{widths(L, h, x_dim)}, "dec");
    if (kind == "aavae") b.disc.emplace(MlpSpec{widths(x_dim, h, 1)}, "disc");
  } else {
    throw ConfigError("config: no networks defined for kind \"" + kind + "\"");
  }
  (void)bernoulli;
  return b;
}

void init_all(const NetBundle& b, ParamSet& params, RngStream& init_rng) {
  // Fixed order keeps initialization deterministic per seed.
  for (const auto* net : {&b.gen, &b.disc, &b.code, &b.enc, &b.dec, &b.disc_z}) {
    if (net->has_value()) (*net)->init_params(params, init_rng);
  }
}

GradMap merge_grads(GradMap a, GradMap b) {
  for (auto& [k, v] : b) a.emplace(std::move(k), std::move(v));
  return a;
}

double checked_item(const Var& v, const char* phase, std::size_t step) {
  const double x = v.value.item();
  if (!std::isfinite(x)) {
    throw NumericalAbort("non-finite " + std::string(phase) + " loss at step " +
                         std::to_string(step));
  }
  return x;
}

/// 2D samples from a trained model, chunked; supports the generator kinds,
/// ELBO-family decoders with fixed log-variance, and gaussian-head decoders.
Tensor sample_model_2d(const std::string& kind, const NetBundle& nets, const ParamSet& params,
                       const ModelConfig& mc, std::size_t n, RngStream& rng) {
  const PriorSpec prior{mc.prior, mc.latent_dim};
  const bool use_gen = nets.gen.has_value();
  const Mlp& net = use_gen ? *nets.gen : *nets.dec;
  const bool gaussian_head = net.spec().head == HeadKind::GaussianParams;
  const std::size_t d = gaussian_head ? net.gaussian_dim() : net.out_dim();
  Tensor out = Tensor::zeros({n, d});
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t b = std::min(chunk, n - start);
    const Tensor z = sample_prior(prior, b, rng);
    Tape tape;
    MlpVars vars = bind_mlp(tape, net, params, false);
    if (gaussian_head) {
      GaussianParamsOut gp = encode_gaussian(tape, net, vars, Tape::constant(z));
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          const double sd = std::exp(0.5 * gp.logvar.value.at(i, c));
          out.at(start + i, c) = gp.mean.value.at(i, c) + sd * rng.normal();
        }
      }
    } else {
      Var x = mlp_raw(tape, net, vars, Tape::constant(z));
      const double sd = use_gen ? 0.0 : std::exp(0.5 * mc.dec_logvar);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          out.at(start + i, c) = x.value.at(i, c) + (sd > 0.0 ? sd * rng.normal() : 0.0);
        }
      }
    }
  }
  return out;
}

json eval_model(const std::string& kind, const NetBundle& nets, const ParamSet& params,
                const DataSource& data, const ModelConfig& mc, bool bernoulli,
                std::size_t eval_samples, RngStream& eval_rng) {
  json eval;
  const bool elbo_family = kind == "vae" || kind == "aavae" || kind == "wakesleep";
  if (data.cfg.kind == DatasetConfig::Kind::Mixture2D) {
    Tensor model_s = sample_model_2d(kind, nets, params, mc, eval_samples, eval_rng);
    Tensor data_s = sample_mixture_2d(data.cfg.mixture, eval_samples, eval_rng);
    ModeCoverageReport mode = mode_coverage(model_s, data.cfg.mixture);
    const GridSpec grid{{-4.0, -4.0}, {4.0, 4.0}, {40, 40}};
    HistDivergences hist = histogram_divergences(data_s, model_s, grid);
    const std::size_t small = static_cast<std::size_t>(
        std::min_element(data.cfg.mixture.weights.begin(), data.cfg.mixture.weights.end()) -
        data.cfg.mixture.weights.begin());
    eval["mode"] = {
        {"per_mode_hit_fraction", mode.per_mode_hit_fraction},
        {"covered_modes", mode.covered_modes},
        {"high_quality_fraction", mode.high_quality_fraction},
        {"small_mode_hit_fraction", mode.per_mode_hit_fraction[small]},
    };
    eval["hist"] = {{"kl_data_model", hist.kl}, {"jsd", hist.jsd}};
  } else if (elbo_family) {
    const Tensor& split = data.test.size() > 0 ? data.test : data.train;
    eval["split"] = data.test.size() > 0 ? "test" : "train";
    VaeNets vnets{*nets.enc, *nets.dec, bernoulli, mc.dec_logvar};
    RngStream elbo_rng = eval_rng.substream("elbo");
    eval["test_elbo"] = test_set_elbo(vnets, params, split, elbo_rng, 1);
  }
  return eval;
}

json model_card(const std::string& kind, std::size_t x_dim, const ModelConfig& mc, bool bernoulli,
                const DatasetConfig& data, const NetBundle& nets) {
  json card;
  card["format"] = "unigen-model-card";
  card["version"] = 1;
  card["kind"] = kind;
  card["x_dim"] = x_dim;
  card["bernoulli"] = bernoulli;
  card["model"] = {{"latent_dim", mc.latent_dim},
                   {"hidden", mc.hidden},
                   {"prior", mc.prior == PriorSpec::Kind::StandardNormal ? "standard-normal"
                                                                         : "uniform-hypercube"},
                   {"dec_logvar", mc.dec_logvar}};
  card["dataset_kind"] = data.kind == DatasetConfig::Kind::Mixture2D     ? "mixture"
                         : data.kind == DatasetConfig::Kind::Synthetic1D ? "synthetic1d"
                                                                         : "idx";
  json net_cards = json::object();
  for (const auto& [name, net] : std::initializer_list<std::pair<const char*, const std::optional<Mlp>*>>{
           {"gen", &nets.gen},
           {"disc", &nets.disc},
           {"code", &nets.code},
           {"enc", &nets.enc},
           {"dec", &nets.dec},
           {"disc_z", &nets.disc_z}}) {
    if (net->has_value()) net_cards[name] = (*net)->card();
  }
  card["nets"] = net_cards;
  return card;
}

std::string dataset_kind_name(DatasetConfig::Kind k) {
  switch (k) {
    case DatasetConfig::Kind::Mixture2D: return "mixture";
    case DatasetConfig::Kind::Idx: return "idx";
    case DatasetConfig::Kind::Synthetic1D: return "synthetic1d";
  }
  return "?";
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["log_every"] = log_every;
  j["iw_k"] = iw_k;
  j["temperature"] = temperature;
  j["snapshot_every"] = snapshot_every;
  j["eval_samples"] = eval_samples;
  j["output_dir"] = output_dir;
  j["instances"] = instances;
  j["tol"] = tol;
  j["model"] = {{"latent_dim", model.latent_dim},
                {"hidden", model.hidden},
                {"prior", model.prior == PriorSpec::Kind::StandardNormal ? "standard-normal"
                                                                         : "uniform-hypercube"},
                {"dec_logvar", model.dec_logvar}};
  j["optim"] = {{"lr", optim.lr}, {"beta1", optim.beta1}, {"beta2", optim.beta2},
                {"eps", optim.eps}};
  json d;
  d["kind"] = dataset_kind_name(data.kind);
  switch (data.kind) {
    case DatasetConfig::Kind::Mixture2D: {
      json means = json::array();
      for (const auto& m : data.mixture.means) means.push_back({m[0], m[1]});
      d["means"] = means;
      d["weights"] = data.mixture.weights;
      d["stds"] = data.mixture.stds;
      break;
    }
    case DatasetConfig::Kind::Idx:
      d["train_images"] = data.train_images.string();
      d["train_labels"] = data.train_labels.string();
      d["test_images"] = data.test_images.string();
      d["test_labels"] = data.test_labels.string();
      d["subset_fraction"] = data.subset_fraction;
      d["binarize"] = data.binarize;
      d["binarize_threshold"] = data.binarize_threshold;
      break;
    case DatasetConfig::Kind::Synthetic1D:
      d["probs"] = data.probs;
      break;
  }
  j["dataset"] = d;
  return j;
}

DatasetConfig parse_dataset_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: dataset must be an object");
  DatasetConfig d;
  const std::string kind = as_string(require_key(j, "kind", "dataset"), "dataset.kind");
  if (kind == "mixture") {
    d.kind = DatasetConfig::Kind::Mixture2D;
    check_keys(j, {"kind", "means", "weights", "stds"}, "dataset(mixture)");
    if (j.contains("means") || j.contains("weights") || j.contains("stds")) {
      MixtureSpec spec;
      const json& means = require_key(j, "means", "dataset");
      const json& weights = require_key(j, "weights", "dataset");
      const json& stds = require_key(j, "stds", "dataset");
      if (!means.is_array() || !weights.is_array() || !stds.is_array()) {
        throw ConfigError("config: dataset means/weights/stds must be arrays");
      }
      for (const auto& m : means) {
        if (!m.is_array() || m.size() != 2) {
          throw ConfigError("config: each mixture mean must be a [x,y] pair");
        }
        spec.means.push_back({as_number(m[0], "mean.x"), as_number(m[1], "mean.y")});
      }
      for (const auto& w : weights) spec.weights.push_back(as_number(w, "dataset.weights"));
      for (const auto& s : stds) spec.stds.push_back(as_number(s, "dataset.stds"));
      try {
        validate_mixture(spec);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      d.mixture = spec;
    }
  } else if (kind == "idx") {
    d.kind = DatasetConfig::Kind::Idx;
    check_keys(j,
               {"kind", "train_images", "train_labels", "test_images", "test_labels",
                "subset_fraction", "binarize", "binarize_threshold"},
               "dataset(idx)");
    d.train_images = as_string(require_key(j, "train_images", "dataset"), "dataset.train_images");
    d.train_labels = as_string(require_key(j, "train_labels", "dataset"), "dataset.train_labels");
    if (j.contains("test_images") || j.contains("test_labels")) {
      d.test_images = as_string(require_key(j, "test_images", "dataset"), "dataset.test_images");
      d.test_labels = as_string(require_key(j, "test_labels", "dataset"), "dataset.test_labels");
    }
    if (j.contains("subset_fraction")) {
      d.subset_fraction = as_number(j["subset_fraction"], "dataset.subset_fraction");
      if (!(d.subset_fraction > 0.0) || d.subset_fraction > 1.0) {
        throw ConfigError("config: dataset.subset_fraction must be in (0, 1]");
      }
    }
    if (j.contains("binarize")) {
      if (!j["binarize"].is_boolean()) throw ConfigError("config: dataset.binarize must be bool");
      d.binarize = j["binarize"].get<bool>();
    }
    if (j.contains("binarize_threshold")) {
      d.binarize_threshold = as_number(j["binarize_threshold"], "dataset.binarize_threshold");
    }
    for (const auto& p : {d.train_images, d.train_labels}) {
      if (!std::filesystem::exists(p)) {
        throw ConfigError("config: dataset file does not exist: " + p.string());
      }
    }
    if (!d.test_images.empty()) {
      for (const auto& p : {d.test_images, d.test_labels}) {
        if (!std::filesystem::exists(p)) {
          throw ConfigError("config: dataset file does not exist: " + p.string());
        }
      }
    }
  } else if (kind == "synthetic1d") {
    d.kind = DatasetConfig::Kind::Synthetic1D;
    check_keys(j, {"kind", "probs"}, "dataset(synthetic1d)");
    const json& probs = require_key(j, "probs", "dataset");
    if (!probs.is_array() || probs.empty()) {
      throw ConfigError("config: dataset.probs must be a non-empty array");
    }
    for (const auto& p : probs) d.probs.push_back(as_number(p, "dataset.probs"));
    try {
      tabular::validate_dist(d.probs, "dataset.probs");
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else {
    throw ConfigError("config: unknown dataset kind \"" + kind +
                      "\" (expected mixture | idx | synthetic1d)");
  }
  return d;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  check_keys(j,
             {"kind", "seed", "steps", "batch_size", "log_every", "iw_k", "temperature",
              "snapshot_every", "eval_samples", "model", "optim", "dataset", "output_dir",
              "instances", "tol"},
             "top level");
  ExperimentConfig cfg;
  cfg.kind = as_string(require_key(j, "kind", "top level"), "kind");
  if (!kKinds.contains(cfg.kind)) {
    throw ConfigError("config: unknown kind \"" + cfg.kind + "\"");
  }
  const json& seed = require_key(j, "seed", "top level");
  if (!seed.is_number_integer() && !seed.is_number_unsigned()) {
    throw ConfigError("config: seed must be an integer");
  }
  if (seed.is_number_integer() && seed.get<std::int64_t>() < 0) {
    throw ConfigError("config: seed must be non-negative");
  }
  cfg.seed = seed.get<std::uint64_t>();
  if (j.contains("steps")) cfg.steps = as_positive_int(j["steps"], "steps");
  if (j.contains("batch_size")) cfg.batch_size = as_positive_int(j["batch_size"], "batch_size");
  if (j.contains("log_every")) cfg.log_every = as_positive_int(j["log_every"], "log_every");
  if (j.contains("iw_k")) {
    if (!j["iw_k"].is_number_integer() && !j["iw_k"].is_number_unsigned()) {
      throw ConfigError("config: iw_k must be an integer");
    }
    const auto k = j["iw_k"].get<std::int64_t>();
    if (k < 0) throw ConfigError("config: iw_k must be >= 0");
    cfg.iw_k = static_cast<std::size_t>(k);
  }
  if (j.contains("temperature")) {
    cfg.temperature = as_number(j["temperature"], "temperature");
    if (cfg.temperature < 1.0) {
      throw ConfigError("config: temperature must be >= 1, got " +
                        std::to_string(cfg.temperature));
    }
  }
  if (j.contains("snapshot_every")) {
    if (!j["snapshot_every"].is_number_integer() && !j["snapshot_every"].is_number_unsigned()) {
      throw ConfigError("config: snapshot_every must be an integer");
    }
    const auto s = j["snapshot_every"].get<std::int64_t>();
    if (s < 0) throw ConfigError("config: snapshot_every must be >= 0");
    cfg.snapshot_every = static_cast<std::size_t>(s);
  }
  if (j.contains("eval_samples")) {
    cfg.eval_samples = as_positive_int(j["eval_samples"], "eval_samples");
  }
  if (j.contains("output_dir")) cfg.output_dir = as_string(j["output_dir"], "output_dir");
  if (j.contains("instances")) cfg.instances = as_positive_int(j["instances"], "instances");
  if (j.contains("tol")) {
    cfg.tol = as_number(j["tol"], "tol");
    if (!(cfg.tol > 0.0)) throw ConfigError("config: tol must be positive");
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    if (!m.is_object()) throw ConfigError("config: model must be an object");
    check_keys(m, {"latent_dim", "hidden", "prior", "dec_logvar"}, "model");
    if (m.contains("latent_dim")) {
      cfg.model.latent_dim = as_positive_int(m["latent_dim"], "model.latent_dim");
    }
    if (m.contains("hidden")) {
      if (!m["hidden"].is_array()) throw ConfigError("config: model.hidden must be an array");
      cfg.model.hidden.clear();
      for (const auto& h : m["hidden"]) {
        cfg.model.hidden.push_back(as_positive_int(h, "model.hidden"));
      }
    }
    if (m.contains("prior")) {
      const std::string p = as_string(m["prior"], "model.prior");
      if (p == "standard-normal") {
        cfg.model.prior = PriorSpec::Kind::StandardNormal;
      } else if (p == "uniform-hypercube") {
        cfg.model.prior = PriorSpec::Kind::UniformHypercube;
      } else {
        throw ConfigError("config: model.prior must be standard-normal | uniform-hypercube");
      }
    }
    if (m.contains("dec_logvar")) {
      cfg.model.dec_logvar = as_number(m["dec_logvar"], "model.dec_logvar");
    }
  }
  if (j.contains("optim")) {
    const json& o = j["optim"];
    if (!o.is_object()) throw ConfigError("config: optim must be an object");
    check_keys(o, {"lr", "beta1", "beta2", "eps"}, "optim");
    if (o.contains("lr")) cfg.optim.lr = as_number(o["lr"], "optim.lr");
    if (o.contains("beta1")) cfg.optim.beta1 = as_number(o["beta1"], "optim.beta1");
    if (o.contains("beta2")) cfg.optim.beta2 = as_number(o["beta2"], "optim.beta2");
    if (o.contains("eps")) cfg.optim.eps = as_number(o["eps"], "optim.eps");
    if (!(cfg.optim.lr > 0.0)) throw ConfigError("config: optim.lr must be positive");
    if (cfg.optim.beta1 < 0.0 || cfg.optim.beta1 >= 1.0 || cfg.optim.beta2 < 0.0 ||
        cfg.optim.beta2 >= 1.0) {
      throw ConfigError("config: optim betas must lie in [0, 1)");
    }
    if (!(cfg.optim.eps > 0.0)) throw ConfigError("config: optim.eps must be positive");
  }
  if (j.contains("dataset")) cfg.data = parse_dataset_config(j["dataset"]);
  if (cfg.kind == "wakesleep" && cfg.data.kind == DatasetConfig::Kind::Mixture2D) {
    throw ConfigError(
        "config: wakesleep needs observations in [0,1] (dataset kind idx or synthetic1d)");
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::string config_hash(const json& canonical) {
  const std::string s = canonical.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path out = cfg.output_dir;
  const char* root = std::getenv("UNIGEN_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') {
    const std::filesystem::path r(root);
    if (out.empty()) {
      out = r / (cfg.kind + "-seed" + std::to_string(cfg.seed));
    } else if (out.is_relative()) {
      out = r / out;
    }
  }
  return out;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.config = cfg;
  rec.hash = config_hash(cfg.to_json());
  rec.output_dir = resolve_output_dir(cfg);

  std::ofstream metrics_file;
  if (!rec.output_dir.empty()) {
    std::filesystem::create_directories(rec.output_dir);
    write_json_file(rec.output_dir / "config.json",
                    json{{"config", cfg.to_json()}, {"hash", rec.hash}});
    metrics_file.open(rec.output_dir / "metrics.jsonl");
    if (!metrics_file) {
      throw std::runtime_error("cannot write metrics in " + rec.output_dir.string());
    }
  }
  auto log_row = [&](json row) {
    if (metrics_file.is_open()) metrics_file << row.dump() << "\n";
    rec.metrics.push_back(std::move(row));
  };
  auto finish = [&](json eval) {
    rec.summary["eval"] = std::move(eval);
    rec.summary["counts"] = {{"steps", cfg.steps},
                             {"real_examples", rec.real_examples},
                             {"fake_examples", rec.fake_examples}};
    if (!rec.output_dir.empty()) {
      write_json_file(rec.output_dir / "summary.json", rec.summary);
      std::ofstream csv(rec.output_dir / "summary.csv");
      csv << "metric,value\n";
      std::vector<std::pair<std::string, double>> flat;
      flatten_numbers(rec.summary, "", flat);
      csv.precision(17);
      for (const auto& [k, v] : flat) csv << k << "," << v << "\n";
    }
  };

  if (cfg.kind == "verify-lemmas") {
    const json report = verify_lemmas_report(cfg.seed, cfg.instances, cfg.tol);
    rec.summary = report;
    if (!rec.output_dir.empty()) write_json_file(rec.output_dir / "report.json", report);
    return rec;
  }

  const RngStream root(cfg.seed);
  RngStream data_rng = root.substream("data");
  RngStream init_rng = root.substream("init");
  RngStream noise_rng = root.substream("noise");
  RngStream eval_rng = root.substream("eval");

  DataSource data = open_dataset(cfg.data, cfg.seed);
  const bool bernoulli = cfg.data.kind != DatasetConfig::Kind::Mixture2D;
  NetBundle nets = make_nets(cfg.kind, data.x_dim, cfg.model, bernoulli);
  ParamSet params;
  init_all(nets, params, init_rng);

  const std::size_t B = cfg.batch_size;
  const PriorSpec prior{cfg.model.prior, cfg.model.latent_dim};
  const std::size_t iw_k = cfg.iw_k == 0 ? B : cfg.iw_k;
  std::size_t snapshot_every = cfg.snapshot_every;
  if (snapshot_every == 0) {
    snapshot_every = data.train.size() > 0 ? std::max<std::size_t>(1, data.train.rows() / B) : 100;
  }

  try {
    if (cfg.kind == "gan" || cfg.kind == "iwgan" || cfg.kind == "infogan") {
      const Mlp& gen = *nets.gen;
      const Mlp& disc = *nets.disc;
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        // Discriminator phase: generator frozen, fake batch detached.
        const Tensor z = sample_prior(prior, B, noise_rng);
        Tensor fake;
        {
          Tape t;
          MlpVars gv = bind_mlp(t, gen, params, false);
          fake = generate(t, gen, gv, Tape::constant(z)).value;
        }
        const Tensor real = data.next_batch(B, data_rng);
        rec.real_examples += static_cast<std::int64_t>(B);
        rec.fake_examples += static_cast<std::int64_t>(B);
        double disc_loss_v = 0.0, code_loss_v = 0.0;
        {
          Tape t;
          MlpVars dv = bind_mlp(t, disc, params, true);
          Var loss = gan_disc_loss(t, disc, dv, real, fake);
          if (cfg.kind == "infogan") {
            // The code term rides along on this phase too; it carries no
            // classifier gradient, so it only shifts the logged value.
            MlpVars cv = bind_mlp(t, *nets.code, params, false);
            Var code_loss = infogan_code_loss(t, *nets.code, cv, Tape::constant(fake), z);
            code_loss_v = code_loss.value.item();
            loss = t.add(loss, code_loss);
          }
          disc_loss_v = checked_item(loss, "disc", step);
          t.backward(loss);
          adam_step(params, collect_grads(t, disc, dv), cfg.optim);
        }
        // Generator phase.
        const Tensor z2 = sample_prior(prior, cfg.kind == "iwgan" ? iw_k : B, noise_rng);
        rec.fake_examples += static_cast<std::int64_t>(z2.rows());
        double gen_loss_v = 0.0, ess = 0.0;
        {
          Tape t;
          MlpVars gv = bind_mlp(t, gen, params, true);
          MlpVars dv = bind_mlp(t, disc, params, false);
          MlpVars cv;
          Var loss;
          if (cfg.kind == "iwgan") {
            IwGanOut out = iw_gan_gen_update(t, gen, gv, disc, dv, z2);
            loss = out.loss;
            ess = out.report.ess;
          } else {
            Var fx = generate(t, gen, gv, Tape::constant(z2));
            loss = gan_gen_loss_unsaturated(t, disc, dv, fx);
            if (cfg.kind == "infogan") {
              cv = bind_mlp(t, *nets.code, params, true);
              Var code_loss = infogan_code_loss(t, *nets.code, cv, fx, z2);
              code_loss_v = code_loss.value.item();
              loss = t.add(loss, code_loss);
            }
          }
          gen_loss_v = checked_item(loss, "gen", step);
          t.backward(loss);
          GradMap grads = collect_grads(t, gen, gv);
          if (cfg.kind == "infogan") {
            grads = merge_grads(std::move(grads), collect_grads(t, *nets.code, cv));
          }
          adam_step(params, grads, cfg.optim);
        }
        if (step % cfg.log_every == 0 || step == cfg.steps) {
          json row = {{"step", step}, {"disc_loss", disc_loss_v}, {"gen_loss", gen_loss_v}};
          if (cfg.kind == "iwgan") row["ess"] = ess;
          if (cfg.kind == "infogan") row["code_loss"] = code_loss_v;
          log_row(std::move(row));
        }
      }
    } else if (cfg.kind == "vae") {
      VaeNets vnets{*nets.enc, *nets.dec, bernoulli, cfg.model.dec_logvar};
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const Tensor real = data.next_batch(B, data_rng);
        rec.real_examples += static_cast<std::int64_t>(B);
        Tape t;
        MlpVars ev = bind_mlp(t, *nets.enc, params, true);
        MlpVars dv = bind_mlp(t, *nets.dec, params, true);
        VaeElboOut out = vae_elbo(t, vnets, ev, dv, real, noise_rng);
        Var loss = t.neg(out.elbo);
        const double loss_v = checked_item(loss, "elbo", step);
        t.backward(loss);
        adam_step(params,
                  merge_grads(collect_grads(t, *nets.enc, ev), collect_grads(t, *nets.dec, dv)),
                  cfg.optim);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
          log_row({{"step", step},
                   {"elbo", -loss_v},
                   {"recon", out.recon_mean.value.item()},
                   {"kl", out.kl_mean.value.item()}});
        }
      }
    } else if (cfg.kind == "aavae") {
      VaeNets vnets{*nets.enc, *nets.dec, bernoulli, cfg.model.dec_logvar};
      ParamSet snapshot = params;
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        if ((step - 1) % snapshot_every == 0) snapshot = params;
        const Tensor real = data.next_batch(B, data_rng);
        // Fake batch from the frozen snapshot decoder, fully detached.
        const Tensor z = sample_prior(prior, B, noise_rng);
        Tensor fake;
        {
          Tape t;
          MlpVars dv = bind_mlp(t, *nets.dec, snapshot, false);
          Var out = mlp_raw(t, *nets.dec, dv, Tape::constant(z));
          fake = Tensor::zeros(out.value.shape());
          for (std::size_t i = 0; i < fake.size(); ++i) {
            if (bernoulli) {
              const double l = out.value.at(i);
              const double p = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l))
                                        : std::exp(l) / (1.0 + std::exp(l));
              fake.at(i) = noise_rng.uniform() < p ? 1.0 : 0.0;
            } else {
              fake.at(i) =
                  out.value.at(i) + std::exp(0.5 * cfg.model.dec_logvar) * noise_rng.normal();
            }
          }
        }
        rec.real_examples += static_cast<std::int64_t>(B);
        rec.fake_examples += static_cast<std::int64_t>(B);
        Tape gt, dt;
        AavaeOut out = aavae_losses(gt, dt, vnets, *nets.disc, params, real, fake, noise_rng,
                                    cfg.temperature);
        const double disc_loss_v = checked_item(out.disc_loss, "disc", step);
        dt.backward(out.disc_loss);
        adam_step(params, collect_grads(dt, *nets.disc, out.disc_vars), cfg.optim);
        const double gen_loss_v = checked_item(out.gen_loss, "gen", step);
        gt.backward(out.gen_loss);
        adam_step(params,
                  merge_grads(collect_grads(gt, *nets.enc, out.enc_vars),
                              collect_grads(gt, *nets.dec, out.dec_vars)),
                  cfg.optim);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
          double wr = 0.0, wf = 0.0;
          for (double w : out.real_weights) wr += w;
          for (double w : out.fake_weights) wf += w;
          log_row({{"step", step},
                   {"disc_loss", disc_loss_v},
                   {"gen_loss", gen_loss_v},
                   {"w_real_mean", wr / static_cast<double>(out.real_weights.size())},
                   {"w_fake_mean", wf / static_cast<double>(out.fake_weights.size())}});
        }
      }
    } else if (cfg.kind == "aae") {
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const Tensor real = data.next_batch(B, data_rng);
        const Tensor prior_z = sample_prior(prior, B, noise_rng);
        rec.real_examples += static_cast<std::int64_t>(B);
        rec.fake_examples += static_cast<std::int64_t>(B);
        Tape dt, gt;
        AaeLosses out =
            aae_losses(dt, gt, *nets.enc, *nets.dec, *nets.disc_z, params, real, prior_z);
        const double disc_loss_v = checked_item(out.disc_loss, "disc", step);
        dt.backward(out.disc_loss);
        adam_step(params, collect_grads(dt, *nets.disc_z, out.disc_vars), cfg.optim);
        const double gen_loss_v = checked_item(out.gen_loss, "gen", step);
        gt.backward(out.gen_loss);
        adam_step(params,
                  merge_grads(collect_grads(gt, *nets.enc, out.enc_vars),
                              collect_grads(gt, *nets.dec, out.dec_vars)),
                  cfg.optim);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
          log_row({{"step", step},
                   {"disc_loss", disc_loss_v},
                   {"gen_loss", gen_loss_v},
                   {"recon_nll", out.recon_nll.value.item()},
                   {"adv_term", out.adv_term.value.item()}});
        }
      }
    } else if (cfg.kind == "wakesleep") {
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const Tensor real = data.next_batch(B, data_rng);
        rec.real_examples += static_cast<std::int64_t>(B);
        rec.fake_examples += static_cast<std::int64_t>(B);
        Tape wt, st;
        WakeSleepLosses out =
            wake_sleep_losses(wt, st, *nets.dec, *nets.enc, params, prior, real, noise_rng);
        const double wake_v = checked_item(out.wake_loss, "wake", step);
        wt.backward(out.wake_loss);
        adam_step(params, collect_grads(wt, *nets.dec, out.dec_vars), cfg.optim);
        const double sleep_v = checked_item(out.sleep_loss, "sleep", step);
        st.backward(out.sleep_loss);
        adam_step(params, collect_grads(st, *nets.enc, out.enc_vars), cfg.optim);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
          log_row({{"step", step}, {"wake_loss", wake_v}, {"sleep_loss", sleep_v}});
        }
      }
    } else {
      throw ConfigError("config: unhandled kind \"" + cfg.kind + "\"");
    }
  } catch (const NumericalAbort& e) {
    if (!rec.output_dir.empty()) {
      write_json_file(rec.output_dir / "abort.json", json{{"error", e.what()}});
    }
    throw;
  } catch (const std::runtime_error& e) {
    // Optimizer-level non-finite gradients arrive here.
    if (!rec.output_dir.empty()) {
      write_json_file(rec.output_dir / "abort.json", json{{"error", e.what()}});
    }
    throw NumericalAbort(e.what());
  }

  finish(eval_model(cfg.kind, nets, params, data, cfg.model, bernoulli, cfg.eval_samples,
                    eval_rng));

  if (!rec.output_dir.empty()) {
    save_checkpoint(rec.output_dir / "checkpoint.json", params);
    write_json_file(rec.output_dir / "model_card.json",
                    model_card(cfg.kind, data.x_dim, cfg.model, bernoulli, cfg.data, nets));
    if (data.x_dim == 2 && cfg.data.kind == DatasetConfig::Kind::Mixture2D) {
      RngStream scatter_rng = eval_rng.substream("scatter");
      const Tensor s =
          sample_model_2d(cfg.kind, nets, params, cfg.model, cfg.eval_samples, scatter_rng);
      std::ofstream csv(rec.output_dir / "samples.csv");
      csv << "x0,x1\n";
      csv.precision(17);
      for (std::size_t i = 0; i < s.rows(); ++i) csv << s.at(i, 0) << "," << s.at(i, 1) << "\n";
    }
  }
  return rec;
}

json verify_lemmas_report(std::uint64_t seed, std::size_t instances, double tol) {
  json report;
  report["seed"] = seed;
  report["instances"] = instances;
  report["tol"] = tol;

  double grad_max = 0.0;
  std::size_t richardson = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = lemma::random_gan_instance(seed + i);
    const auto rep = lemma::lemma1_check(inst, 1e-5, tol);
    grad_max = std::max(grad_max, rep.max_abs_diff);
    if (rep.used_richardson) ++richardson;
  }
  report["gradient_identity"] = {
      {"max_diff", grad_max}, {"richardson_used", richardson}, {"pass", grad_max < tol}};

  double worst_slack = 0.0;
  bool bound_ok = true;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = lemma::random_gan_instance(seed + 7919 * (i + 1));
    const auto rep = lemma::jsd_bound_check(inst);
    worst_slack = std::max(worst_slack, rep.jsd - rep.expected_kl);
    bound_ok = bound_ok && rep.holds;
  }
  report["divergence_bound"] = {{"worst_slack", worst_slack}, {"pass", bound_ok}};

  double spec_max = 0.0;
  std::size_t undefined = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = lemma::random_gan_instance(seed + 104729 * (i + 1));
    const auto rep = lemma::optimal_specialization_check(inst, 1e-5, tol);
    if (rep.undefined) {
      ++undefined;
      continue;
    }
    spec_max = std::max(spec_max, rep.max_abs_diff);
  }
  report["optimal_specialization"] = {
      {"max_diff", spec_max}, {"undefined_instances", undefined}, {"pass", spec_max < tol}};

  double elbo_max = 0.0, bayes_max = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto vae = lemma::random_tabular_vae(seed + 1299709 * (i + 1));
    const auto rep = lemma::lemma2_check(vae);
    elbo_max = std::max(elbo_max, rep.diff);
    bayes_max = std::max(bayes_max, rep.bayes_gap);
  }
  report["elbo_rewriting"] = {
      {"max_diff", elbo_max}, {"max_bayes_gap", bayes_max}, {"pass", elbo_max < 1e-10}};

  const auto deg = lemma::degeneration_checks(seed);
  report["degenerations"] = {{"iw_k1_max_grad_diff", deg.iw_k1_max_grad_diff},
                             {"weighted_elbo_perfect_diff", deg.aavae_perfect_diff},
                             {"weighted_elbo_tabular_diff", deg.aavae_tabular_diff},
                             {"uniform_weight_diff", deg.uniform_weight_diff},
                             {"pass", deg.pass}};

  report["all_pass"] = report["gradient_identity"]["pass"].get<bool>() &&
                       report["divergence_bound"]["pass"].get<bool>() &&
                       report["optimal_specialization"]["pass"].get<bool>() &&
                       report["elbo_rewriting"]["pass"].get<bool>() &&
                       report["degenerations"]["pass"].get<bool>();
  return report;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json compare_runs(ExperimentConfig a, ExperimentConfig b, std::size_t n_seeds,
                  std::uint64_t base_seed) {
  if (n_seeds == 0) throw ConfigError("compare: need at least one seed");
  a.output_dir.clear();
  b.output_dir.clear();
  json rows = json::array();
  std::map<std::string, std::vector<double>> a_vals, b_vals, deltas;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    a.seed = base_seed + s;
    b.seed = base_seed + s;
    const RunRecord ra = run_experiment(a);
    const RunRecord rb = run_experiment(b);
    std::vector<std::pair<std::string, double>> fa, fb;
    flatten_numbers(ra.summary["eval"], "", fa);
    flatten_numbers(rb.summary["eval"], "", fb);
    json row;
    row["seed"] = a.seed;
    for (const auto& [k, v] : fa) {
      row["a"][k] = v;
      a_vals[k].push_back(v);
    }
    for (const auto& [k, v] : fb) {
      row["b"][k] = v;
      b_vals[k].push_back(v);
    }
    for (const auto& [k, va] : fa) {
      for (const auto& [k2, vb] : fb) {
        if (k == k2) {
          row["delta"][k] = va - vb;
          deltas[k].push_back(va - vb);
        }
      }
    }
    rows.push_back(std::move(row));
  }
  json out;
  out["kind_a"] = a.kind;
  out["kind_b"] = b.kind;
  out["seeds"] = n_seeds;
  out["base_seed"] = base_seed;
  out["rows"] = rows;
  for (const auto& [k, v] : a_vals) out["median_a"][k] = median(v);
  for (const auto& [k, v] : b_vals) out["median_b"][k] = median(v);
  for (const auto& [k, v] : deltas) out["median_delta"][k] = median(v);
  return out;
}

json evaluate_checkpoint(const std::filesystem::path& card_path,
                         const std::filesystem::path& checkpoint_path, const DatasetConfig& data,
                         std::uint64_t seed, std::size_t eval_samples) {
  std::ifstream in(card_path);
  if (!in) throw ConfigError("eval: cannot open model card " + card_path.string());
  json card;
  try {
    in >> card;
  } catch (const json::parse_error& e) {
    throw ConfigError("eval: model card parse error: " + std::string(e.what()));
  }
  if (!card.is_object() || card.value("format", "") != "unigen-model-card") {
    throw ConfigError("eval: " + card_path.string() + " is not a model card");
  }
  const std::string kind = as_string(require_key(card, "kind", "model card"), "card.kind");
  const std::size_t x_dim = as_positive_int(require_key(card, "x_dim", "model card"), "card.x_dim");
  const bool bernoulli = require_key(card, "bernoulli", "model card").get<bool>();
  ModelConfig mc;
  const json& m = require_key(card, "model", "model card");
  mc.latent_dim = as_positive_int(require_key(m, "latent_dim", "model card"), "card.latent_dim");
  mc.hidden.clear();
  for (const auto& h : require_key(m, "hidden", "model card")) {
    mc.hidden.push_back(as_positive_int(h, "card.hidden"));
  }
  mc.prior = as_string(require_key(m, "prior", "model card"), "card.prior") == "uniform-hypercube"
                 ? PriorSpec::Kind::UniformHypercube
                 : PriorSpec::Kind::StandardNormal;
  mc.dec_logvar = as_number(require_key(m, "dec_logvar", "model card"), "card.dec_logvar");

  NetBundle nets = make_nets(kind, x_dim, mc, bernoulli);
  ParamSet params = load_checkpoint(checkpoint_path);
  for (const auto* net : {&nets.gen, &nets.disc, &nets.code, &nets.enc, &nets.dec, &nets.disc_z}) {
    if (!net->has_value()) continue;
    for (const std::string& name : (*net)->param_names()) {
      if (!params.has(name)) {
        throw ConfigError("eval: checkpoint is missing parameter \"" + name +
                          "\" required by the model card architecture");
      }
    }
  }
  DataSource src = open_dataset(data, seed);
  if (src.x_dim != x_dim) {
    throw ConfigError("eval: dataset dimension " + std::to_string(src.x_dim) +
                      " does not match model card x_dim " + std::to_string(x_dim));
  }
  RngStream eval_rng = RngStream(seed).substream("eval");
  json out;
  out["kind"] = kind;
  out["checkpoint"] = checkpoint_path.string();
  out["eval"] = eval_model(kind, nets, params, src, mc, bernoulli, eval_samples, eval_rng);
  return out;
}

}  // namespace unigen
