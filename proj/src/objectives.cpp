#include "unigen/objectives.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace unigen {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ElboTerms {
  Var per_example;
  Var recon;
  Var kl;
};

ElboTerms elbo_terms(Tape& tape, const VaeNets& nets, const MlpVars& enc_vars,
                     const MlpVars& dec_vars, const Tensor& x, RngStream& rng) {
  ReparamSample s = encode_reparam(tape, nets.enc, enc_vars, Tape::constant(x), rng);
  Var dec_out = mlp_raw(tape, nets.dec, dec_vars, s.z);
  ElboTerms t;
  if (nets.bernoulli) {
    t.recon = bernoulli_loglik(tape, x, dec_out);
  } else {
    Var logvar = Tape::constant(Tensor::full(x.shape(), nets.dec_logvar));
    t.recon = gaussian_loglik(tape, x, dec_out, logvar);
  }
  t.kl = gaussian_kl_to_prior(tape, s.mean, s.logvar);
  t.per_example = tape.sub(t.recon, t.kl);
  return t;
}

}  // namespace

IwReport normalize_importance_weights(const std::vector<double>& raw) {
  if (raw.empty()) throw std::invalid_argument("normalize_importance_weights: empty weight list");
  IwReport rep;
  rep.raw_weights = raw;
  double sum = 0.0;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("normalize_importance_weights: weight " + std::to_string(w) +
                                  " is negative or non-finite");
    }
    sum += w;
  }
  const std::size_t k = raw.size();
  rep.normalized.resize(k);
  if (sum > 0.0) {
    for (std::size_t i = 0; i < k; ++i) rep.normalized[i] = raw[i] / sum;
  } else {
    std::cerr << "normalize_importance_weights: all weights zero, falling back to uniform\n";
    rep.fallback_uniform = true;
    for (std::size_t i = 0; i < k; ++i) rep.normalized[i] = 1.0 / static_cast<double>(k);
  }
  double sq = 0.0;
  for (double w : rep.normalized) sq += w * w;
  rep.ess = 1.0 / sq;
  rep.ess = std::min(std::max(rep.ess, 1.0), static_cast<double>(k));
  return rep;
}

Var gan_disc_loss(Tape& tape, const Mlp& disc, const MlpVars& disc_vars, const Tensor& real_x,
                  const Tensor& fake_x) {
  Var lr = disc_logits(tape, disc, disc_vars, Tape::constant(real_x));
  Var lf = disc_logits(tape, disc, disc_vars, Tape::constant(fake_x));
  Var mean_real = tape.mean(tape.logsigmoid(lr));
  Var mean_fake = tape.mean(tape.logsigmoid(tape.neg(lf)));
  return tape.neg(tape.add(mean_real, mean_fake));
}

Var gan_gen_loss_unsaturated(Tape& tape, const Mlp& disc, const MlpVars& disc_vars,
                             const Var& fake_x) {
  Var logits = disc_logits(tape, disc, disc_vars, fake_x);
  return tape.neg(tape.mean(tape.logsigmoid(logits)));
}

Var infogan_code_loss(Tape& tape, const Mlp& code_net, const MlpVars& code_vars,
                      const Var& fake_x, const Tensor& z) {
  GaussianParamsOut gp = encode_gaussian(tape, code_net, code_vars, fake_x);
  Var ll = gaussian_loglik(tape, z, gp.mean, gp.logvar);
  return tape.neg(tape.mean(ll));
}

AaeLosses aae_losses(Tape& disc_tape, Tape& gen_tape, const Mlp& encoder, const Mlp& decoder,
                     const Mlp& disc_z, const ParamSet& params, const Tensor& real_x,
                     const Tensor& prior_z) {
  AaeLosses out;
  {
    // Discriminator step: codes detached, classifier trainable.
    MlpVars enc_frozen = bind_mlp(disc_tape, encoder, params, false);
    Var codes = mlp_raw(disc_tape, encoder, enc_frozen, Tape::constant(real_x));
    out.disc_vars = bind_mlp(disc_tape, disc_z, params, true);
    out.disc_loss = gan_disc_loss(disc_tape, disc_z, out.disc_vars, prior_z, codes.value);
  }
  {
    // Autoencoder step: encoder/decoder trainable, classifier frozen.
    out.enc_vars = bind_mlp(gen_tape, encoder, params, true);
    out.dec_vars = bind_mlp(gen_tape, decoder, params, true);
    const MlpVars& enc_vars = out.enc_vars;
    const MlpVars& dec_vars = out.dec_vars;
    MlpVars disc_frozen = bind_mlp(gen_tape, disc_z, params, false);
    Var codes = mlp_raw(gen_tape, encoder, enc_vars, Tape::constant(real_x));
    GaussianParamsOut gp = encode_gaussian(gen_tape, decoder, dec_vars, codes);
    Var recon_ll = gaussian_loglik(gen_tape, real_x, gp.mean, gp.logvar);
    out.recon_nll = gen_tape.neg(gen_tape.mean(recon_ll));
    Var adv_logits = disc_logits(gen_tape, disc_z, disc_frozen, codes);
    out.adv_term = gen_tape.neg(gen_tape.mean(gen_tape.logsigmoid(adv_logits)));
    out.gen_loss = gen_tape.add(out.recon_nll, out.adv_term);
  }
  return out;
}

Var elbo_per_example(Tape& tape, const VaeNets& nets, const MlpVars& enc_vars,
                     const MlpVars& dec_vars, const Tensor& x, RngStream& rng) {
  return elbo_terms(tape, nets, enc_vars, dec_vars, x, rng).per_example;
}

VaeElboOut vae_elbo(Tape& tape, const VaeNets& nets, const MlpVars& enc_vars,
                    const MlpVars& dec_vars, const Tensor& real_x, RngStream& rng) {
  ElboTerms t = elbo_terms(tape, nets, enc_vars, dec_vars, real_x, rng);
  VaeElboOut out;
  out.elbo = tape.mean(t.per_example);
  out.recon_mean = tape.mean(t.recon);
  out.kl_mean = tape.mean(t.kl);
  return out;
}

WakeSleepLosses wake_sleep_losses(Tape& wake_tape, Tape& sleep_tape, const Mlp& decoder,
                                  const Mlp& encoder, const ParamSet& params,
                                  const PriorSpec& prior, const Tensor& real_x, RngStream& rng) {
  WakeSleepLosses out;
  {
    // Wake: recognize real data with the frozen inference net, fit the decoder.
    MlpVars enc_frozen = bind_mlp(wake_tape, encoder, params, false);
    out.dec_vars = bind_mlp(wake_tape, decoder, params, true);
    const MlpVars& dec_vars = out.dec_vars;
    ReparamSample s = encode_reparam(wake_tape, encoder, enc_frozen, Tape::constant(real_x), rng);
    Var logits = mlp_raw(wake_tape, decoder, dec_vars, s.z);
    out.wake_loss = wake_tape.neg(wake_tape.mean(bernoulli_loglik(wake_tape, real_x, logits)));
  }
  {
    // Sleep: dream (h, x) pairs from the frozen decoder, fit the inference net.
    const std::size_t batch = real_x.rows();
    Tensor h = sample_prior(prior, batch, rng);
    MlpVars dec_frozen = bind_mlp(sleep_tape, decoder, params, false);
    Var dream_logits = mlp_raw(sleep_tape, decoder, dec_frozen, Tape::constant(h));
    Tensor x_dream(dream_logits.value.shape());
    for (std::size_t i = 0; i < x_dream.size(); ++i) {
      const double p = sigmoid(dream_logits.value.at(i));
      x_dream.at(i) = rng.uniform() < p ? 1.0 : 0.0;
    }
    out.enc_vars = bind_mlp(sleep_tape, encoder, params, true);
    GaussianParamsOut gp =
        encode_gaussian(sleep_tape, encoder, out.enc_vars, Tape::constant(std::move(x_dream)));
    Var ll = gaussian_loglik(sleep_tape, h, gp.mean, gp.logvar);
    out.sleep_loss = sleep_tape.neg(sleep_tape.mean(ll));
  }
  return out;
}

Var sleep_phase_loss_indicator(Tape& tape, const Mlp& disc, const MlpVars& disc_vars,
                               const Tensor& real_x, const Tensor& fake_x) {
  // Dreamed pairs (y, x): y uniform over {0,1}, x from the matching branch.
  // Expectation over y makes this half of the two-branch classification loss.
  Var lr = disc_logits(tape, disc, disc_vars, Tape::constant(real_x));
  Var lf = disc_logits(tape, disc, disc_vars, Tape::constant(fake_x));
  Var mean_real = tape.mean(tape.logsigmoid(lr));
  Var mean_fake = tape.mean(tape.logsigmoid(tape.neg(lf)));
  return tape.scale(tape.add(mean_real, mean_fake), -0.5);
}

IwGanOut iw_gan_gen_update(Tape& tape, const Mlp& gen, const MlpVars& gen_vars, const Mlp& disc,
                           const MlpVars& disc_vars, const Tensor& z) {
  if (z.rank() != 2 || z.rows() == 0) {
    throw std::invalid_argument("iw_gan_gen_update: z must be [k,dim] with k >= 1");
  }
  IwGanOut out;
  Var fake = generate(tape, gen, gen_vars, Tape::constant(z));
  Var logits = disc_logits(tape, disc, disc_vars, fake);
  const std::size_t k = z.rows();
  std::vector<double> raw(k);
  // D/(1−D) of a clamped logit is exactly its exponential.
  for (std::size_t i = 0; i < k; ++i) raw[i] = std::exp(logits.value.at(i));
  out.report = normalize_importance_weights(raw);
  Tensor w({k}, out.report.normalized);
  out.loss = tape.neg(tape.sum(tape.mul(Tape::constant(std::move(w)), tape.logsigmoid(logits))));
  return out;
}

AavaeOut aavae_losses(Tape& gen_tape, Tape& disc_tape, const VaeNets& nets, const Mlp& disc,
                      const ParamSet& params, const Tensor& real_x, const Tensor& fake_x,
                      RngStream& rng, double temperature, AavaeWeightMode mode) {
  if (temperature < 1.0) {
    throw std::invalid_argument("aavae_losses: temperature " + std::to_string(temperature) +
                                " rejected (must be >= 1)");
  }
  AavaeOut out;
  {
    out.enc_vars = bind_mlp(gen_tape, nets.enc, params, true);
    out.dec_vars = bind_mlp(gen_tape, nets.dec, params, true);
    const MlpVars& enc_vars = out.enc_vars;
    const MlpVars& dec_vars = out.dec_vars;
    MlpVars disc_frozen = bind_mlp(gen_tape, disc, params, false);

    // Branch weights q^r(y=0|x) = q(y=1|x), smoothed by temperature; always
    // constants on the generator tape.
    auto weights_for = [&](const Tensor& batch, bool is_real) {
      std::vector<double> w(batch.rows());
      if (mode == AavaeWeightMode::PerfectDiscriminator) {
        for (double& v : w) v = is_real ? 1.0 : 0.0;
        return w;
      }
      Var logits = disc_logits(gen_tape, disc, disc_frozen, Tape::constant(batch));
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = sigmoid(logits.value.at(i) / temperature);
      }
      return w;
    };
    out.real_weights = weights_for(real_x, true);
    out.fake_weights = weights_for(fake_x, false);

    // Real-batch noise is drawn before fake-batch noise; with perfect
    // weights the real half reproduces vae_elbo draw for draw.
    Var per_real = elbo_per_example(gen_tape, nets, enc_vars, dec_vars, real_x, rng);
    Var per_fake = elbo_per_example(gen_tape, nets, enc_vars, dec_vars, fake_x, rng);
    Var wr = Tape::constant(Tensor({out.real_weights.size()}, out.real_weights));
    Var wf = Tape::constant(Tensor({out.fake_weights.size()}, out.fake_weights));
    Var obj = gen_tape.add(gen_tape.mean(gen_tape.mul(wr, per_real)),
                           gen_tape.mean(gen_tape.mul(wf, per_fake)));
    out.gen_loss = gen_tape.neg(obj);
  }
  {
    out.disc_vars = bind_mlp(disc_tape, disc, params, true);
    out.disc_loss = gan_disc_loss(disc_tape, disc, out.disc_vars, real_x, fake_x);
  }
  return out;
}

}  // namespace unigen
