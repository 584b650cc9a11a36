// Python bindings for the main operations: finite-distribution helpers, the
// verification oracles, weight normalization, sampling / dataset IO, sample
// metrics, and the experiment runner. Structured results cross the boundary
// as plain dicts (JSON-shaped values via string round-trip where the C++
// side already speaks JSON).

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "unigen/datasets.hpp"
#include "unigen/experiment.hpp"
#include "unigen/lemma_oracle.hpp"
#include "unigen/metrics.hpp"
#include "unigen/objectives.hpp"
#include "unigen/rng.hpp"
#include "unigen/tensor.hpp"

namespace py = pybind11;
using namespace unigen;
using nlohmann::json;

namespace {

py::object json_to_py(const json& j) {
  py::module_ pyjson = py::module_::import("json");
  return pyjson.attr("loads")(j.dump());
}

json py_to_json(const py::object& obj) {
  py::module_ pyjson = py::module_::import("json");
  const std::string dumped = py::cast<std::string>(pyjson.attr("dumps")(obj));
  return json::parse(dumped);
}

py::list tensor_rows(const Tensor& t) {
  py::list out;
  const std::size_t r = t.rows(), c = t.cols();
  for (std::size_t i = 0; i < r; ++i) {
    py::list row;
    for (std::size_t k = 0; k < c; ++k) row.append(t.at(i * c + k));
    out.append(row);
  }
  return out;
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("samples: need at least one row");
  const std::size_t c = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("samples: ragged rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), c}, std::move(flat));
}

MixtureSpec mixture_from_dict(const py::dict& d) {
  MixtureSpec spec;
  for (auto m : d["means"]) {
    auto pair = py::cast<std::vector<double>>(m);
    if (pair.size() != 2) throw std::invalid_argument("mixture: means must be 2d");
    spec.means.push_back({pair[0], pair[1]});
  }
  spec.weights = py::cast<std::vector<double>>(d["weights"]);
  spec.stds = py::cast<std::vector<double>>(d["stds"]);
  validate_mixture(spec);
  return spec;
}

py::dict mixture_to_dict(const MixtureSpec& spec) {
  py::dict d;
  py::list means;
  for (const auto& m : spec.means) {
    py::list p;
    p.append(m[0]);
    p.append(m[1]);
    means.append(p);
  }
  d["means"] = means;
  d["weights"] = spec.weights;
  d["stds"] = spec.stds;
  return d;
}

lemma::TabularVae vae_from_dict(const py::dict& d) {
  lemma::TabularVae vae;
  vae.decoder.rows = py::cast<std::vector<std::vector<double>>>(d["decoder"]);
  vae.encoder.rows = py::cast<std::vector<std::vector<double>>>(d["encoder"]);
  vae.prior = py::cast<std::vector<double>>(d["prior"]);
  vae.p_data = py::cast<std::vector<double>>(d["p_data"]);
  return vae;
}

}  // namespace

PYBIND11_MODULE(_unigen, m) {
  m.doc() = "Core operations: finite-distribution math, verification oracles, "
            "samplers, metrics, and the experiment runner.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalAbort>(m, "NumericalAbort", PyExc_ArithmeticError);

  // Finite-distribution helpers.
  m.def("kl", &tabular::kl, py::arg("p"), py::arg("q"),
        "KL(p||q) over a shared finite support.");
  m.def("jsd", &tabular::jsd, py::arg("p"), py::arg("q"),
        "Jensen-Shannon divergence; always in [0, log 2].");
  m.def("entropy", &tabular::entropy, py::arg("p"));
  m.def("normalize", &tabular::normalize, py::arg("weights"),
        "Normalize nonnegative weights to a distribution.");
  m.def("softmax", &tabular::softmax, py::arg("logits"));
  m.def("marginal_prior", &tabular::marginal_prior, py::arg("p_g"), py::arg("p_data"),
        "Equal-weight mixture (p_g + p_data) / 2.");
  m.def(
      "optimal_discriminator",
      [](const tabular::Dist& p_g, const tabular::Dist& p_data) {
        const auto opt = tabular::optimal_discriminator(p_g, p_data);
        py::dict out;
        out["prob_real"] = opt.prob_real;
        out["defined"] = opt.defined;
        return out;
      },
      py::arg("p_g"), py::arg("p_data"),
      "Density-ratio discriminator p_data/(p_g+p_data) with a per-point "
      "defined mask.");
  m.def("reversed_posterior", &tabular::reversed_posterior, py::arg("disc"), py::arg("p_x"),
        py::arg("y"),
        "Posterior over x from the label-swapped discriminator: y=0 row is "
        "proportional to d(x)*p_x, y=1 to (1-d(x))*p_x.");

  // Verification oracles on seeded tabular instances.
  m.def(
      "random_gan_instance",
      [](std::uint64_t seed, std::size_t n) {
        const auto inst = lemma::random_gan_instance(seed, n);
        py::dict out;
        out["p_data"] = inst.p_data;
        out["theta0"] = inst.theta0;
        out["disc"] = inst.disc;
        return out;
      },
      py::arg("seed"), py::arg("n") = 16);
  m.def("random_tabular_vae",
        [](std::uint64_t seed, std::size_t n_x, std::size_t n_z) {
          const auto vae = lemma::random_tabular_vae(seed, n_x, n_z);
          py::dict out;
          out["decoder"] = vae.decoder.rows;
          out["encoder"] = vae.encoder.rows;
          out["prior"] = vae.prior;
          out["p_data"] = vae.p_data;
          return out;
        },
        py::arg("seed"), py::arg("n_x") = 16, py::arg("n_z") = 8);
  m.def(
      "gradient_identity_check",
      [](const py::dict& inst, double h, double tol) {
        tabular::GanInstance g;
        g.p_data = py::cast<std::vector<double>>(inst["p_data"]);
        g.theta0 = py::cast<std::vector<double>>(inst["theta0"]);
        g.disc = py::cast<std::vector<double>>(inst["disc"]);
        const auto rep = lemma::lemma1_check(g, h, tol);
        py::dict out;
        out["lhs_grad"] = rep.lhs_grad;
        out["rhs_grad"] = rep.rhs_grad;
        out["kl_term_grad"] = rep.kl_term_grad;
        out["jsd_term_grad"] = rep.jsd_term_grad;
        out["max_abs_diff"] = rep.max_abs_diff;
        out["used_richardson"] = rep.used_richardson;
        return out;
      },
      py::arg("instance"), py::arg("h") = 1e-5, py::arg("tol") = 1e-5,
      "Finite-difference check that the adversarial objective's generator "
      "gradient matches its variational rewriting (frozen-expansion-point "
      "convention).");
  m.def(
      "jsd_bound_check",
      [](const py::dict& inst, double slack) {
        tabular::GanInstance g;
        g.p_data = py::cast<std::vector<double>>(inst["p_data"]);
        g.theta0 = py::cast<std::vector<double>>(inst["theta0"]);
        g.disc = py::cast<std::vector<double>>(inst["disc"]);
        const auto rep = lemma::jsd_bound_check(g, slack);
        py::dict out;
        out["jsd"] = rep.jsd;
        out["expected_kl"] = rep.expected_kl;
        out["holds"] = rep.holds;
        return out;
      },
      py::arg("instance"), py::arg("slack") = 1e-10,
      "JSD(p_g, p_data) <= E_y KL(p(x|y) || q^r(x|y)).");
  m.def(
      "optimal_specialization_check",
      [](const py::dict& inst, double h, double tol) {
        tabular::GanInstance g;
        g.p_data = py::cast<std::vector<double>>(inst["p_data"]);
        g.theta0 = py::cast<std::vector<double>>(inst["theta0"]);
        g.disc = py::cast<std::vector<double>>(inst["disc"]);
        const auto rep = lemma::optimal_specialization_check(g, h, tol);
        py::dict out;
        out["grad_full"] = rep.grad_full;
        out["grad_simplified"] = rep.grad_simplified;
        out["max_abs_diff"] = rep.max_abs_diff;
        out["undefined"] = rep.undefined;
        out["note"] = rep.note;
        return out;
      },
      py::arg("instance"), py::arg("h") = 1e-5, py::arg("tol") = 1e-5,
      "With the density-ratio discriminator plugged in, the gradient "
      "collapses to grad[KL/2 - JSD].");
  m.def(
      "elbo_equivalence_check",
      [](const py::dict& vae) {
        const auto rep = lemma::lemma2_check(vae_from_dict(vae));
        py::dict out;
        out["elbo_form"] = rep.elbo_form;
        out["kl_form"] = rep.kl_form;
        out["kl_form_bayes"] = rep.kl_form_bayes;
        out["const_fake"] = rep.const_fake;
        out["const_log2"] = rep.const_log2;
        out["diff"] = rep.diff;
        out["bayes_gap"] = rep.bayes_gap;
        return out;
      },
      py::arg("vae"),
      "ELBO objective vs its mixture-wide negative-KL rewriting; diff and "
      "bayes_gap should vanish to 1e-10.");
  m.def(
      "degeneration_checks",
      [](std::uint64_t seed) {
        const auto rep = lemma::degeneration_checks(seed);
        py::dict out;
        out["iw_k1_max_grad_diff"] = rep.iw_k1_max_grad_diff;
        out["aavae_perfect_diff"] = rep.aavae_perfect_diff;
        out["aavae_tabular_diff"] = rep.aavae_tabular_diff;
        out["uniform_weight_diff"] = rep.uniform_weight_diff;
        out["pass"] = rep.pass;
        return out;
      },
      py::arg("seed") = 20240801,
      "Weighted objectives collapse to their base forms: k=1 importance "
      "weighting, perfect-discriminator weighting, uniform weighting.");

  m.def(
      "normalize_importance_weights",
      [](const std::vector<double>& raw) {
        const auto rep = normalize_importance_weights(raw);
        py::dict out;
        out["raw_weights"] = rep.raw_weights;
        out["normalized"] = rep.normalized;
        out["ess"] = rep.ess;
        out["fallback_uniform"] = rep.fallback_uniform;
        return out;
      },
      py::arg("raw"),
      "Self-normalized importance weights with effective sample size.");

  // Sampling, metrics, dataset IO.
  m.def("canonical_mixture", [] { return mixture_to_dict(canonical_mixture()); },
        "The asymmetric two-mode 2D benchmark.");
  m.def(
      "sample_mixture_2d",
      [](const py::dict& spec, std::size_t n, std::uint64_t seed) {
        RngStream rng(seed, "py-sample");
        return tensor_rows(sample_mixture_2d(mixture_from_dict(spec), n, rng));
      },
      py::arg("spec"), py::arg("n"), py::arg("seed"));
  m.def(
      "mode_coverage",
      [](const std::vector<std::vector<double>>& samples, const py::dict& spec,
         double radius_multiplier, double coverage_threshold) {
        const auto rep = mode_coverage(rows_to_tensor(samples), mixture_from_dict(spec),
                                       radius_multiplier, coverage_threshold);
        py::dict out;
        out["per_mode_hit_fraction"] = rep.per_mode_hit_fraction;
        out["covered_modes"] = rep.covered_modes;
        out["high_quality_fraction"] = rep.high_quality_fraction;
        return out;
      },
      py::arg("samples"), py::arg("spec"), py::arg("radius_multiplier") = 3.0,
      py::arg("coverage_threshold") = 0.01);
  m.def(
      "histogram_divergences",
      [](const std::vector<std::vector<double>>& samples_p,
         const std::vector<std::vector<double>>& samples_q, const std::vector<double>& lo,
         const std::vector<double>& hi, const std::vector<std::size_t>& bins, double alpha) {
        const auto rep = histogram_divergences(rows_to_tensor(samples_p),
                                               rows_to_tensor(samples_q), {lo, hi, bins}, alpha);
        py::dict out;
        out["kl"] = rep.kl;
        out["jsd"] = rep.jsd;
        return out;
      },
      py::arg("samples_p"), py::arg("samples_q"), py::arg("lo"), py::arg("hi"), py::arg("bins"),
      py::arg("alpha") = 1.0,
      "Laplace-smoothed histogram KL and JSD between two sample sets.");
  m.def("write_synthetic_idx", &write_synthetic_idx, py::arg("dir"), py::arg("n_train"),
        py::arg("n_test"), py::arg("seed"),
        "Write the procedural raster corpus in IDX format.");
  m.def(
      "load_idx",
      [](const std::filesystem::path& images, const std::filesystem::path& labels,
         double subset_fraction, std::uint64_t seed, bool binarize, double threshold) {
        const IdxDataset ds = load_mnist_idx(images, labels, subset_fraction, seed, binarize,
                                             threshold);
        py::dict out;
        out["images"] = tensor_rows(ds.images);
        out["labels"] = ds.labels;
        out["rows"] = ds.rows;
        out["cols"] = ds.cols;
        return out;
      },
      py::arg("images"), py::arg("labels"), py::arg("subset_fraction") = 1.0,
      py::arg("seed") = 0, py::arg("binarize") = true, py::arg("threshold") = 0.5);

  // Experiment runner.
  m.def(
      "run_experiment",
      [](const py::object& config) {
        const ExperimentConfig cfg = parse_config(py_to_json(config));
        RunRecord rec;
        {
          py::gil_scoped_release release;
          rec = run_experiment(cfg);
        }
        py::dict out;
        out["hash"] = rec.hash;
        out["summary"] = json_to_py(rec.summary);
        json rows = json::array();
        for (const auto& row : rec.metrics) rows.push_back(row);
        out["metrics"] = json_to_py(rows);
        out["output_dir"] = rec.output_dir.string();
        out["real_examples"] = rec.real_examples;
        out["fake_examples"] = rec.fake_examples;
        return out;
      },
      py::arg("config"),
      "Run a training or verification experiment from a config dict; returns "
      "hash, metrics rows, and the end-of-run summary.");
  m.def(
      "verify_lemmas",
      [](std::uint64_t seed, std::size_t instances, double tol) {
        json report;
        {
          py::gil_scoped_release release;
          report = verify_lemmas_report(seed, instances, tol);
        }
        return json_to_py(report);
      },
      py::arg("seed") = 20240801, py::arg("instances") = 100, py::arg("tol") = 1e-5,
      "Run every oracle family on seeded instances and report pass/fail per "
      "family.");
}
