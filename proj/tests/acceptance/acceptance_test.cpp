// Acceptance gate. Each criterion prints one [PASS]/[FAIL] line with its
// measured values and elapsed time; the process exit code is the number of
// hard failures. Criterion 9 is marked [soft]: its result is reported but
// never fails the gate.
//
// Criterion 10 trains on the bundled procedural raster corpus by default;
// set UNIGEN_MNIST_DIR to a directory holding the standard IDX quartet
// (train-images-idx3-ubyte etc.) to run it on real data instead.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../support/gradcheck.hpp"
#include "unigen/datasets.hpp"
#include "unigen/experiment.hpp"
#include "unigen/lemma_oracle.hpp"
#include "unigen/models.hpp"
#include "unigen/objectives.hpp"
#include "unigen/param_set.hpp"
#include "unigen/rng.hpp"
#include "unigen/tape.hpp"
#include "unigen/tensor.hpp"

using namespace unigen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

int run_criterion(int index, bool soft, const std::function<Outcome()>& body) {
  const double start = now_seconds();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double elapsed = now_seconds() - start;
  std::printf("[%s] criterion-%d%s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", index,
              soft ? " [soft]" : "", out.detail.c_str(), elapsed);
  std::fflush(stdout);
  return (!out.pass && !soft) ? 1 : 0;
}

ExperimentConfig mixture_config(const std::string& kind, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  cfg.steps = 700;
  cfg.batch_size = 128;
  cfg.log_every = 700;
  cfg.eval_samples = 2000;
  cfg.optim.lr = 5e-4;
  return cfg;
}

ExperimentConfig subset_config(const std::string& kind, std::uint64_t seed, const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  cfg.steps = 1200;
  cfg.batch_size = 64;
  cfg.log_every = 1200;
  cfg.model.latent_dim = 8;
  cfg.model.hidden = {64};
  cfg.optim.lr = 2e-3;
  cfg.data.kind = DatasetConfig::Kind::Idx;
  cfg.data.train_images = dir / "train-images-idx3-ubyte";
  cfg.data.train_labels = dir / "train-labels-idx1-ubyte";
  cfg.data.test_images = dir / "t10k-images-idx3-ubyte";
  cfg.data.test_labels = dir / "t10k-labels-idx1-ubyte";
  cfg.data.subset_fraction = 0.01;
  return cfg;
}

// Criterion 8/9 cache: gan results are shared between the two criteria.
struct ModeStats {
  std::vector<double> hq, small;
};

ModeStats run_mixture_seeds(const std::string& kind, const std::vector<std::uint64_t>& seeds) {
  ModeStats st;
  for (std::uint64_t s : seeds) {
    const RunRecord rec = run_experiment(mixture_config(kind, s));
    st.hq.push_back(rec.summary["eval"]["mode"]["high_quality_fraction"].get<double>());
    st.small.push_back(rec.summary["eval"]["mode"]["small_mode_hit_fraction"].get<double>());
  }
  return st;
}

std::string join(const std::vector<double>& v, int prec = 3) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += " ";
    out += fmt(v[i], prec);
  }
  return out;
}

}  // namespace

int main() {
  // Keep every training run in memory; an inherited output root would
  // otherwise scatter run directories during the gate.
  unsetenv("UNIGEN_OUTPUT_ROOT");
  int failures = 0;
  ModeStats gan_stats;  // filled by criterion 8, reused by criterion 9
  const std::vector<std::uint64_t> mix_seeds = {500, 501, 502, 503, 504};

  failures += run_criterion(1, false, [] {
    Outcome out;
    const double start = now_seconds();
    double worst = 0.0;
    std::size_t elements = 0;
    bool all = true;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto res = gradcheck::check_composition(seed, 1e-4, 1e-7, 1e-5);
      all = all && res.pass;
      worst = std::max(worst, res.max_err);
      elements += res.n_checked;
    }
    const double elapsed = now_seconds() - start;
    out.pass = all && elapsed < 60.0;
    out.detail = "50 compositions, " + std::to_string(elements) +
                 " leaf elements, worst err/allowance " + fmt(worst, 3);
    return out;
  });

  failures += run_criterion(2, false, [] {
    Outcome out;
    const double start = now_seconds();
    double worst = 0.0;
    std::size_t richardson = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto inst = lemma::random_gan_instance(9000 + i, 16);
      const auto rep = lemma::lemma1_check(inst, 1e-5, 1e-5);
      worst = std::max(worst, rep.max_abs_diff);
      if (rep.used_richardson) ++richardson;
    }
    const double elapsed = now_seconds() - start;
    out.pass = worst < 1e-5 && elapsed < 60.0;
    out.detail = "100 instances (n=16), max gradient discrepancy " + fmt(worst, 3) +
                 ", richardson refits " + std::to_string(richardson);
    return out;
  });

  failures += run_criterion(3, false, [] {
    Outcome out;
    double worst_slack = -1e300;
    bool holds = true;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const auto inst = lemma::random_gan_instance(31000 + 7919 * i, 16);
      const auto rep = lemma::jsd_bound_check(inst, 1e-10);
      worst_slack = std::max(worst_slack, rep.jsd - rep.expected_kl);
      holds = holds && rep.holds;
    }
    out.pass = holds && worst_slack <= 1e-10;
    out.detail = "1000 instances, worst jsd - expected_kl = " + fmt(worst_slack, 3);
    return out;
  });

  failures += run_criterion(4, false, [] {
    Outcome out;
    double worst = 0.0;
    std::size_t undefined = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto inst = lemma::random_gan_instance(52000 + 31 * i, 16);
      const auto rep = lemma::optimal_specialization_check(inst, 1e-5, 1e-5);
      if (rep.undefined) {
        ++undefined;
        continue;
      }
      worst = std::max(worst, rep.max_abs_diff);
    }
    out.pass = worst < 1e-5 && undefined == 0;
    out.detail = "100 full-support instances, max gradient discrepancy " + fmt(worst, 3) +
                 ", undefined " + std::to_string(undefined);
    return out;
  });

  failures += run_criterion(5, false, [] {
    Outcome out;
    double worst_diff = 0.0, worst_bayes = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto vae = lemma::random_tabular_vae(5000 + i);
      const auto rep = lemma::lemma2_check(vae);
      worst_diff = std::max(worst_diff, std::abs(rep.diff));
      worst_bayes = std::max(worst_bayes, std::abs(rep.bayes_gap));
    }
    out.pass = worst_diff < 1e-10 && worst_bayes < 1e-10;
    out.detail = "100 tabular models, max objective-form gap " + fmt(worst_diff, 3) +
                 ", max posterior-route gap " + fmt(worst_bayes, 3);
    return out;
  });

  failures += run_criterion(6, false, [] {
    Outcome out;
    double iw = 0.0, aavae = 0.0, tab = 0.0, unif = 0.0;
    bool all = true;
    for (std::uint64_t seed : {20240801ull, 777ull}) {
      const auto rep = lemma::degeneration_checks(seed);
      iw = std::max(iw, rep.iw_k1_max_grad_diff);
      aavae = std::max(aavae, rep.aavae_perfect_diff);
      tab = std::max(tab, rep.aavae_tabular_diff);
      unif = std::max(unif, rep.uniform_weight_diff);
      all = all && rep.pass;
    }
    bool exact = true;
    for (std::size_t k : {1u, 2u, 3u, 5u, 8u}) {
      const auto rep = normalize_importance_weights(std::vector<double>(k, 1.0));
      for (double w : rep.normalized) exact = exact && w == 1.0 / static_cast<double>(k);
    }
    out.pass = all && iw <= 1e-12 && aavae <= 1e-10 && tab <= 1e-10 && unif == 0.0 && exact;
    out.detail = "k=1 grad gap " + fmt(iw, 3) + ", perfect-disc gap " + fmt(aavae, 3) +
                 ", tabular gap " + fmt(tab, 3) + ", uniform-weight gap " + fmt(unif, 3) +
                 ", 1/k exact " + (exact ? "yes" : "no");
    return out;
  });

  failures += run_criterion(7, false, [] {
    Outcome out;
    const double w0 = 0.8 / (1.0 - 0.8);  // odds of the two discriminator outputs
    const double w1 = 0.2 / (1.0 - 0.2);
    const auto rep = normalize_importance_weights({0.8 / 0.2, 0.2 / 0.8});
    const bool odds_exact = 0.8 / 0.2 == 4.0 && 0.2 / 0.8 == 0.25;
    const bool norm_exact =
        rep.normalized[0] == 16.0 / 17.0 && rep.normalized[1] == 1.0 / 17.0;
    out.pass = odds_exact && norm_exact;
    out.detail = "weights (" + fmt(rep.normalized[0], 17) + ", " + fmt(rep.normalized[1], 17) +
                 ") vs (16/17, 1/17), exact " + (norm_exact ? "yes" : "no") +
                 " [one-minus-d odds drift " + fmt(std::abs(w0 - 4.0) + std::abs(w1 - 0.25), 3) +
                 "]";
    return out;
  });

  failures += run_criterion(8, false, [&] {
    Outcome out;
    const double start = now_seconds();
    gan_stats = run_mixture_seeds("gan", mix_seeds);
    const ModeStats vae = run_mixture_seeds("vae", mix_seeds);
    const double g_small = median(gan_stats.small), v_small = median(vae.small);
    const double g_hq = median(gan_stats.hq), v_hq = median(vae.hq);
    const double elapsed = now_seconds() - start;
    out.pass = g_small < v_small && g_hq >= v_hq && elapsed < 600.0;
    out.detail = "5 paired seeds; median small-mode hit gan " + fmt(g_small, 3) + " vs vae " +
                 fmt(v_small, 3) + "; median high-quality gan " + fmt(g_hq, 3) + " vs vae " +
                 fmt(v_hq, 3) + "; per-seed gan hq [" + join(gan_stats.hq) + "] small [" +
                 join(gan_stats.small) + "], vae hq [" + join(vae.hq) + "] small [" +
                 join(vae.small) + "]";
    return out;
  });

  failures += run_criterion(9, true, [&] {
    Outcome out;
    if (gan_stats.hq.empty()) gan_stats = run_mixture_seeds("gan", mix_seeds);
    const ModeStats iw = run_mixture_seeds("iwgan", mix_seeds);
    std::vector<double> deltas;
    for (std::size_t i = 0; i < iw.hq.size(); ++i) deltas.push_back(iw.hq[i] - gan_stats.hq[i]);
    const double med = median(deltas);
    out.pass = med >= 0.0;
    out.detail = "5 paired seeds; per-seed high-quality deltas (iwgan - gan) [" +
                 join(deltas) + "], median " + fmt(med, 3);
    return out;
  });

  failures += run_criterion(10, false, [] {
    Outcome out;
    const double start = now_seconds();
    fs::path dir;
    std::string source;
    if (const char* env = std::getenv("UNIGEN_MNIST_DIR")) {
      dir = env;
      source = "idx data from UNIGEN_MNIST_DIR";
    } else {
      dir = fs::temp_directory_path() / "unigen-acceptance-corpus";
      fs::remove_all(dir);
      fs::create_directories(dir);
      write_synthetic_idx(dir, 60000, 10000, 424242);
      source = "procedural raster corpus";
    }
    double vae_sum = 0.0, aavae_sum = 0.0;
    std::vector<double> vae_elbos, aavae_elbos;
    for (std::uint64_t seed : {900ull, 901ull, 902ull}) {
      const RunRecord v = run_experiment(subset_config("vae", seed, dir));
      const RunRecord a = run_experiment(subset_config("aavae", seed, dir));
      vae_elbos.push_back(v.summary["eval"]["test_elbo"].get<double>());
      aavae_elbos.push_back(a.summary["eval"]["test_elbo"].get<double>());
      vae_sum += vae_elbos.back();
      aavae_sum += aavae_elbos.back();
    }
    const double vae_mean = vae_sum / 3.0, aavae_mean = aavae_sum / 3.0;
    const double improvement = aavae_mean - vae_mean;
    const double elapsed = now_seconds() - start;
    out.pass = aavae_mean >= vae_mean - 0.5 && elapsed < 1800.0;
    out.detail = source + ", 1% train subset, 3 seeds; mean test elbo aavae " +
                 fmt(aavae_mean, 6) + " vs vae " + fmt(vae_mean, 6) + ", signed improvement " +
                 fmt(improvement, 3) + " nats; per-seed aavae [" + join(aavae_elbos, 6) +
                 "], vae [" + join(vae_elbos, 6) + "]";
    return out;
  });

  failures += run_criterion(11, false, [] {
    Outcome out;
    double worst_wake = 0.0, worst_sleep = 0.0;
    for (std::uint64_t seed : {61ull, 62ull, 63ull}) {
      // Wake phase vs the negated ELBO reconstruction term, decoder
      // gradients included, on a shared batch and noise stream.
      const std::size_t latent = 2, xdim = 4;
      const Mlp enc({{xdim, 8, 2 * latent}, Activation::Tanh, HeadKind::GaussianParams}, "enc");
      const Mlp dec({{latent, 8, xdim}}, "dec");
      ParamSet params;
      RngStream init(seed, "init");
      enc.init_params(params, init);
      dec.init_params(params, init);
      RngStream dr(seed, "data");
      Tensor real({6, xdim});
      for (double& v : real.data()) v = dr.uniform();
      const PriorSpec prior{PriorSpec::Kind::StandardNormal, latent};

      Tape wake, sleep;
      RngStream ra(seed, "noise");
      WakeSleepLosses ws = wake_sleep_losses(wake, sleep, dec, enc, params, prior, real, ra);
      wake.backward(ws.wake_loss);
      const GradMap g_wake = collect_grads(wake, dec, ws.dec_vars);

      Tape plain;
      MlpVars ev = bind_mlp(plain, enc, params, false);
      MlpVars dv = bind_mlp(plain, dec, params, true);
      RngStream rb(seed, "noise");
      const VaeNets nets{enc, dec, true, 0.0};
      VaeElboOut vae = vae_elbo(plain, nets, ev, dv, real, rb);
      Var neg_recon = plain.neg(vae.recon_mean);
      plain.backward(neg_recon);
      const GradMap g_plain = collect_grads(plain, dec, dv);

      worst_wake = std::max(worst_wake,
                            std::abs(ws.wake_loss.value.item() - neg_recon.value.item()));
      for (const auto& [name, g] : g_wake) {
        const Tensor& r = g_plain.at(name);
        for (std::size_t i = 0; i < g.size(); ++i) {
          worst_wake = std::max(worst_wake, std::abs(g.at(i) - r.at(i)));
        }
      }

      // Sleep phase with the indicator target vs the discriminator loss on
      // the same real/generated batch, gradients included.
      const Mlp disc({{2, 8, 1}}, "d");
      ParamSet dparams;
      RngStream dinit(seed, "dinit");
      disc.init_params(dparams, dinit);
      RngStream batch(seed, "batch");
      Tensor rx({5, 2}), fx({5, 2});
      for (double& v : rx.data()) v = batch.uniform(-1.5, 1.5);
      for (double& v : fx.data()) v = batch.uniform(-1.5, 1.5);

      Tape ts;
      MlpVars dvs = bind_mlp(ts, disc, dparams, true);
      Var sl = sleep_phase_loss_indicator(ts, disc, dvs, rx, fx);
      ts.backward(sl);
      const GradMap gs = collect_grads(ts, disc, dvs);

      Tape tg;
      MlpVars dvg = bind_mlp(tg, disc, dparams, true);
      Var full = gan_disc_loss(tg, disc, dvg, rx, fx);
      tg.backward(full);
      const GradMap gg = collect_grads(tg, disc, dvg);

      worst_sleep = std::max(worst_sleep, std::abs(2.0 * sl.value.item() - full.value.item()));
      for (const auto& [name, g] : gs) {
        const Tensor& r = gg.at(name);
        for (std::size_t i = 0; i < g.size(); ++i) {
          worst_sleep = std::max(worst_sleep, std::abs(2.0 * g.at(i) - r.at(i)));
        }
      }
    }
    out.pass = worst_wake <= 1e-12 && worst_sleep <= 1e-12;
    out.detail = "3 seeds; wake vs reconstruction max gap " + fmt(worst_wake, 3) +
                 ", doubled sleep vs classification max gap " + fmt(worst_sleep, 3) +
                 " (losses and gradients)";
    return out;
  });

  std::printf("%d hard criterion failure%s\n", failures, failures == 1 ? "" : "s");
  return failures;
}
