#pragma once

#include <cmath>
#include <vector>

#include "unigen/models.hpp"

namespace unigen {

/// Importance-weight bookkeeping for the weighted generator update.
struct IwReport {
  std::vector<double> raw_weights;  // w_i = D(x_i)/(1-D(x_i))
  std::vector<double> normalized;   // ŵ_i, sums to 1
  double ess = 0.0;                 // 1/Σŵ², clamped into [1, k]
  bool fallback_uniform = false;    // all raw weights vanished
};

/// Normalize nonnegative raw weights; on total collapse (all zero) falls
/// back to uniform weights and flags it.
IwReport normalize_importance_weights(const std::vector<double>& raw);

/// Binary-classification loss −[mean log D(real) + mean log(1−D(fake))].
/// fake_x must be detached from any generator tape (pass values, not Vars).
Var gan_disc_loss(Tape& tape, const Mlp& disc, const MlpVars& disc_vars, const Tensor& real_x,
                  const Tensor& fake_x);

/// Unsaturated generator loss −mean log D(fake); disc binding should be
/// frozen (bind_mlp tracked=false) and fake_x attached to the generator.
Var gan_gen_loss_unsaturated(Tape& tape, const Mlp& disc, const MlpVars& disc_vars,
                             const Var& fake_x);

/// Code-reconstruction loss −mean log N(z; mean(x), diag exp(logvar(x))).
/// Active only on the generated branch; z enters as a constant target.
Var infogan_code_loss(Tape& tape, const Mlp& code_net, const MlpVars& code_vars,
                      const Var& fake_x, const Tensor& z);

/// Adversarial autoencoder losses. The discriminator acts on the code
/// space: prior draws are its positive class and deterministic codes E(x)
/// its negative class. The generator side is reconstruction plus the
/// reversed adversarial term on codes. disc_loss lives on disc_tape
/// (encoder frozen there); the gen pieces live on gen_tape (disc frozen).
struct AaeLosses {
  Var disc_loss;
  Var gen_loss;   // recon_nll + adv_term
  Var recon_nll;  // −mean log N(x; dec(E(x)))
  Var adv_term;   // −mean log D(E(x))
  MlpVars enc_vars;   // tracked, on gen_tape
  MlpVars dec_vars;   // tracked, on gen_tape
  MlpVars disc_vars;  // tracked, on disc_tape
};
AaeLosses aae_losses(Tape& disc_tape, Tape& gen_tape, const Mlp& encoder, const Mlp& decoder,
                     const Mlp& disc_z, const ParamSet& params, const Tensor& real_x,
                     const Tensor& prior_z);

/// Shared encoder/decoder bundle for the ELBO-family objectives.
/// bernoulli=true reads the decoder output as Bernoulli logits; otherwise
/// the decoder output is a Gaussian mean with fixed log-variance dec_logvar.
struct VaeNets {
  const Mlp& enc;  // gaussian-params head
  const Mlp& dec;
  bool bernoulli = true;
  double dec_logvar = 0.0;
};

/// Per-example ELBO terms: reconstruction log-likelihood − KL to the
/// standard-normal prior, one reparameterized sample per example. Shape [B].
Var elbo_per_example(Tape& tape, const VaeNets& nets, const MlpVars& enc_vars,
                     const MlpVars& dec_vars, const Tensor& x, RngStream& rng);

struct VaeElboOut {
  Var elbo;        // mean per-example ELBO (to maximize)
  Var recon_mean;  // mean reconstruction log-likelihood (logging)
  Var kl_mean;     // mean KL to prior (logging)
};
VaeElboOut vae_elbo(Tape& tape, const VaeNets& nets, const MlpVars& enc_vars,
                    const MlpVars& dec_vars, const Tensor& real_x, RngStream& rng);

/// Wake phase: −mean log p(x|h) with h sampled from the frozen inference
/// net (gradients flow to the decoder only). Sleep phase: −mean log q(h|x)
/// on dream pairs (h ~ prior, x ~ p(x|h), both detached; gradients flow to
/// the inference net only).
struct WakeSleepLosses {
  Var wake_loss;      // on wake_tape
  Var sleep_loss;     // on sleep_tape
  MlpVars dec_vars;   // tracked, on wake_tape
  MlpVars enc_vars;   // tracked, on sleep_tape
};
WakeSleepLosses wake_sleep_losses(Tape& wake_tape, Tape& sleep_tape, const Mlp& decoder,
                                  const Mlp& encoder, const ParamSet& params,
                                  const PriorSpec& prior, const Tensor& real_x, RngStream& rng);

/// Sleep phase specialized to the binary domain indicator: the inference
/// target is which branch (real or generated) each example came from, so the
/// loss is half the two-branch classification loss. Exactly doubles to
/// gan_disc_loss on the same batch.
Var sleep_phase_loss_indicator(Tape& tape, const Mlp& disc, const MlpVars& disc_vars,
                               const Tensor& real_x, const Tensor& fake_x);

/// Importance-weighted generator update: fake x_i = G(z_i), raw weights
/// D/(1−D) from the frozen discriminator, normalized with stop-gradient,
/// loss = −Σ ŵ_i·log D(x_i). k = rows of z. With k=1 this reproduces
/// gan_gen_loss_unsaturated bitwise.
struct IwGanOut {
  Var loss;
  IwReport report;
};
IwGanOut iw_gan_gen_update(Tape& tape, const Mlp& gen, const MlpVars& gen_vars, const Mlp& disc,
                           const MlpVars& disc_vars, const Tensor& z);

/// Discriminator-weighted ELBO training. Every example, real or generated,
/// contributes its ELBO term weighted by the reversed-discriminator mass on
/// the trainable branch, computed as sigmoid(logit/temperature) and treated
/// as a constant. fake_x must come from a frozen generator snapshot. The
/// discriminator side is the plain binary classification loss at
/// temperature 1. The indicator-prior KL part of the weighted objective
/// carries no encoder/decoder gradient and is omitted from gen_loss.
enum class AavaeWeightMode {
  Learned,               // weights from the discriminator network
  PerfectDiscriminator,  // test hook: weight 1 on real, 0 on fake
};
struct AavaeOut {
  Var gen_loss;   // on gen_tape (to minimize; −weighted ELBO)
  Var disc_loss;  // on disc_tape
  std::vector<double> real_weights;
  std::vector<double> fake_weights;
  MlpVars enc_vars;   // tracked, on gen_tape
  MlpVars dec_vars;   // tracked, on gen_tape
  MlpVars disc_vars;  // tracked, on disc_tape
};
AavaeOut aavae_losses(Tape& gen_tape, Tape& disc_tape, const VaeNets& nets, const Mlp& disc,
                      const ParamSet& params, const Tensor& real_x, const Tensor& fake_x,
                      RngStream& rng, double temperature,
                      AavaeWeightMode mode = AavaeWeightMode::Learned);

/// log q(y|x) and log q^r(y|x) = log q(1−y|x) from a shared probability
/// table entry d = q(y=1|x). The adversarial objective pairs differ only by
/// this swap; tests assert the relation through these two code paths.
inline double log_prob_indicator(double d, int y) { return std::log(y == 1 ? d : 1.0 - d); }
inline double reversed_log_prob_indicator(double d, int y) { return log_prob_indicator(d, 1 - y); }

}  // namespace unigen
