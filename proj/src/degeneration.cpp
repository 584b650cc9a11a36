#include <algorithm>
#include <cmath>

#include "unigen/lemma_oracle.hpp"
#include "unigen/objectives.hpp"

namespace unigen::lemma {
namespace {

double max_grad_diff(const GradMap& a, const GradMap& b) {
  double m = 0.0;
  for (const auto& [name, ga] : a) {
    const Tensor& gb = b.at(name);
    for (std::size_t i = 0; i < ga.size(); ++i) m = std::max(m, std::abs(ga.at(i) - gb.at(i)));
  }
  return m;
}

Tensor uniform_batch(std::size_t rows, std::size_t cols, RngStream& rng) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

}  // namespace

DegenerationReport degeneration_checks(std::uint64_t seed) {
  DegenerationReport rep;
  RngStream root(seed, "degeneration");

  // (a) Importance-weighted generator update at k=1 against the plain
  // unsaturated update, identical batch, identical frozen discriminator.
  {
    ParamSet params;
    Mlp gen({{2, 16, 2}}, "gen");
    Mlp disc({{2, 16, 1}}, "disc");
    RngStream init = root.substream("init-a");
    gen.init_params(params, init);
    disc.init_params(params, init);
    RngStream zs = root.substream("z-a");
    Tensor z = sample_prior({PriorSpec::Kind::StandardNormal, 2}, 1, zs);

    Tape t_iw;
    MlpVars gv_iw = bind_mlp(t_iw, gen, params, true);
    MlpVars dv_iw = bind_mlp(t_iw, disc, params, false);
    IwGanOut iw = iw_gan_gen_update(t_iw, gen, gv_iw, disc, dv_iw, z);
    t_iw.backward(iw.loss);
    GradMap g_iw = collect_grads(t_iw, gen, gv_iw);

    Tape t_v;
    MlpVars gv_v = bind_mlp(t_v, gen, params, true);
    MlpVars dv_v = bind_mlp(t_v, disc, params, false);
    Var fake = generate(t_v, gen, gv_v, Tape::constant(z));
    Var loss = gan_gen_loss_unsaturated(t_v, disc, dv_v, fake);
    t_v.backward(loss);
    GradMap g_v = collect_grads(t_v, gen, gv_v);

    rep.iw_k1_max_grad_diff = max_grad_diff(g_iw, g_v);
  }

  // (b) Discriminator-weighted ELBO under the perfect-discriminator hook
  // against the plain ELBO, identical noise draws on the real batch.
  {
    ParamSet params;
    Mlp enc({{3, 16, 4}, Activation::Tanh, HeadKind::GaussianParams}, "enc");
    Mlp dec({{2, 16, 3}}, "dec");
    Mlp disc({{3, 16, 1}}, "disc");
    RngStream init = root.substream("init-b");
    enc.init_params(params, init);
    dec.init_params(params, init);
    disc.init_params(params, init);
    RngStream xs = root.substream("x-b");
    Tensor real_x = uniform_batch(4, 3, xs);
    Tensor fake_x = uniform_batch(4, 3, xs);
    VaeNets nets{enc, dec};

    Tape t_vae;
    MlpVars ev = bind_mlp(t_vae, enc, params, true);
    MlpVars dv = bind_mlp(t_vae, dec, params, true);
    RngStream noise_a = root.substream("noise-b");
    VaeElboOut plain = vae_elbo(t_vae, nets, ev, dv, real_x, noise_a);

    Tape t_gen, t_disc;
    RngStream noise_b = root.substream("noise-b");
    AavaeOut weighted = aavae_losses(t_gen, t_disc, nets, disc, params, real_x, fake_x, noise_b,
                                     3.0, AavaeWeightMode::PerfectDiscriminator);
    rep.aavae_perfect_diff = std::abs(plain.elbo.value.item() - (-weighted.gen_loss.value.item()));
  }

  // Tabular flavor of (b): perfect weights reproduce the rewritten
  // objective value on an exhaustively evaluable instance.
  {
    TabularVae vae = random_tabular_vae(seed + 17);
    Lemma2Report l2 = lemma2_check(vae);
    const std::size_t n = vae.p_data.size();
    const double weighted = tabular_weighted_objective(vae, std::vector<double>(n, 1.0),
                                                       std::vector<double>(n, 0.0));
    rep.aavae_tabular_diff = std::abs(weighted - l2.kl_form);
  }

  // (c) Uninformative discriminator: zeroed classifier gives logits 0,
  // D = 1/2 everywhere, so every normalized weight is exactly 1/k.
  {
    ParamSet params;
    Mlp gen({{2, 16, 2}}, "gen");
    Mlp disc({{2, 16, 1}}, "disc");
    RngStream init = root.substream("init-c");
    gen.init_params(params, init);
    disc.init_params(params, init);
    for (const std::string& name : disc.param_names()) {
      Tensor& v = params.value(name);
      for (double& x : v.data()) x = 0.0;
    }
    RngStream zs = root.substream("z-c");
    Tensor z = sample_prior({PriorSpec::Kind::StandardNormal, 2}, 4, zs);
    Tape tape;
    MlpVars gv = bind_mlp(tape, gen, params, true);
    MlpVars dv = bind_mlp(tape, disc, params, false);
    IwGanOut iw = iw_gan_gen_update(tape, gen, gv, disc, dv, z);
    for (double w : iw.report.normalized) {
      rep.uniform_weight_diff = std::max(rep.uniform_weight_diff, std::abs(w - 0.25));
    }
  }

  rep.pass = rep.iw_k1_max_grad_diff <= 1e-12 && rep.aavae_perfect_diff <= 1e-10 &&
             rep.aavae_tabular_diff <= 1e-12 && rep.uniform_weight_diff == 0.0;
  return rep;
}

}  // namespace unigen::lemma
