#include "unigen/lemma_oracle.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace unigen::lemma {
namespace {

using tabular::Dist;

constexpr double kLog2 = std::numbers::ln2;

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& at, double h) {
  std::vector<double> grad(at.size());
  std::vector<double> x = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    x[i] = at[i] + h;
    const double fp = f(x);
    x[i] = at[i] - h;
    const double fm = f(x);
    x[i] = at[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Richardson extrapolation from central differences at h and h/2; kills the
// leading O(h^2) term, separating discretization error from identity failure.
std::vector<double> fd_gradient_richardson(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& at,
    double h) {
  const std::vector<double> gh = fd_gradient(f, at, h);
  const std::vector<double> gh2 = fd_gradient(f, at, h / 2.0);
  std::vector<double> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) out[i] = (4.0 * gh2[i] - gh[i]) / 3.0;
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void validate_instance(const tabular::GanInstance& inst) {
  tabular::validate_dist(inst.p_data, "gan instance: p_data");
  if (inst.theta0.size() != inst.p_data.size() || inst.disc.size() != inst.p_data.size()) {
    throw std::invalid_argument("gan instance: field lengths disagree");
  }
  for (double d : inst.disc) {
    if (!(d > 0.0 && d < 1.0)) {
      throw std::invalid_argument("gan instance: discriminator value " + std::to_string(d) +
                                  " not strictly inside (0,1)");
    }
  }
}

}  // namespace

Lemma1Report lemma1_check(const tabular::GanInstance& inst, double h, double tol) {
  validate_instance(inst);
  const Dist& p_data = inst.p_data;
  const Dist& d = inst.disc;
  const std::size_t n = p_data.size();

  // Frozen at theta0: the marginal over x and both reconstruction targets.
  const Dist p_m0 = tabular::marginal_prior(tabular::softmax(inst.theta0), p_data);
  const Dist qr0 = tabular::reversed_posterior(d, p_m0, 0);
  const Dist qr1 = tabular::reversed_posterior(d, p_m0, 1);

  // −E_{pθ(x|y)p(y)}[log q^r(y|x)]: the y=0 half scores generated mass
  // against log q(y=1|x), the y=1 half scores data against log q(y=0|x).
  auto lhs = [&](const std::vector<double>& theta) {
    const Dist p_g = tabular::softmax(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += 0.5 * p_g[i] * std::log(d[i]) + 0.5 * p_data[i] * std::log(1.0 - d[i]);
    }
    return -s;
  };
  auto kl_term = [&](const std::vector<double>& theta) {
    const Dist p_g = tabular::softmax(theta);
    return 0.5 * tabular::kl(p_g, qr0) + 0.5 * tabular::kl(p_data, qr1);
  };
  auto jsd_term = [&](const std::vector<double>& theta) {
    return tabular::jsd(tabular::softmax(theta), p_data);
  };
  auto rhs = [&](const std::vector<double>& theta) { return kl_term(theta) - jsd_term(theta); };

  Lemma1Report rep;
  rep.lhs_grad = fd_gradient(lhs, inst.theta0, h);
  rep.rhs_grad = fd_gradient(rhs, inst.theta0, h);
  rep.kl_term_grad = fd_gradient(kl_term, inst.theta0, h);
  rep.jsd_term_grad = fd_gradient(jsd_term, inst.theta0, h);
  rep.max_abs_diff = max_abs_diff(rep.lhs_grad, rep.rhs_grad);
  if (rep.max_abs_diff > tol) {
    rep.lhs_grad = fd_gradient_richardson(lhs, inst.theta0, h);
    rep.rhs_grad = fd_gradient_richardson(rhs, inst.theta0, h);
    rep.max_abs_diff = max_abs_diff(rep.lhs_grad, rep.rhs_grad);
    rep.used_richardson = true;
  }
  return rep;
}

JsdBoundReport jsd_bound_check(const tabular::GanInstance& inst, double slack) {
  validate_instance(inst);
  const Dist p_g = tabular::softmax(inst.theta0);
  const Dist p_m = tabular::marginal_prior(p_g, inst.p_data);
  // The KL's second argument is the unnormalized q^r(y|x)·p_m(x), the form
  // the bound's derivation manipulates. Normalizing the rows would shift
  // each branch by log of its normalizer and the bound would no longer hold
  // for every discriminator (only gradients are normalizer-invariant, the
  // static value is not). With the unnormalized form the gap
  // expected_kl − jsd is exactly the adversarial objective
  // −E[log q^r(y|x)] ≥ 0, so the bound is unconditional.
  auto generalized_kl = [&](const Dist& p, int y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) continue;
      const double q_rev = y == 0 ? inst.disc[i] : 1.0 - inst.disc[i];
      sum += p[i] * std::log(p[i] / (q_rev * p_m[i]));
    }
    return sum;
  };
  JsdBoundReport rep;
  rep.jsd = tabular::jsd(p_g, inst.p_data);
  rep.expected_kl = 0.5 * generalized_kl(p_g, 0) + 0.5 * generalized_kl(inst.p_data, 1);
  rep.holds = rep.jsd <= rep.expected_kl + slack;
  return rep;
}

SpecializationReport optimal_specialization_check(const tabular::GanInstance& inst, double h,
                                                  double tol) {
  tabular::validate_dist(inst.p_data, "specialization: p_data");
  const Dist& p_data = inst.p_data;
  const Dist p_g0 = tabular::softmax(inst.theta0);
  const auto opt = tabular::optimal_discriminator(p_g0, p_data);

  SpecializationReport rep;
  const Dist p_m0 = tabular::marginal_prior(p_g0, p_data);
  Dist qr0, qr1;
  try {
    qr0 = tabular::reversed_posterior(opt.prob_real, p_m0, 0);
    qr1 = tabular::reversed_posterior(opt.prob_real, p_m0, 1);
  } catch (const std::domain_error& e) {
    rep.undefined = true;
    rep.note = e.what();
    return rep;
  }

  auto full = [&](const std::vector<double>& theta) {
    const Dist p_g = tabular::softmax(theta);
    return 0.5 * tabular::kl(p_g, qr0) + 0.5 * tabular::kl(p_data, qr1) -
           tabular::jsd(p_g, p_data);
  };
  auto simplified = [&](const std::vector<double>& theta) {
    const Dist p_g = tabular::softmax(theta);
    return 0.5 * tabular::kl(p_g, p_data) - tabular::jsd(p_g, p_data);
  };

  try {
    rep.grad_full = fd_gradient(full, inst.theta0, h);
    rep.grad_simplified = fd_gradient(simplified, inst.theta0, h);
    rep.max_abs_diff = max_abs_diff(rep.grad_full, rep.grad_simplified);
    if (rep.max_abs_diff > tol) {
      rep.grad_full = fd_gradient_richardson(full, inst.theta0, h);
      rep.grad_simplified = fd_gradient_richardson(simplified, inst.theta0, h);
      rep.max_abs_diff = max_abs_diff(rep.grad_full, rep.grad_simplified);
      rep.used_richardson = true;
    }
  } catch (const std::domain_error& e) {
    // p_data vanishing where p_g is positive: the simplified KL is undefined.
    rep.undefined = true;
    rep.note = e.what();
  }
  return rep;
}

tabular::Dist vae_marginal(const TabularVae& vae) {
  const std::size_t n_z = vae.prior.size();
  const std::size_t n_x = vae.p_data.size();
  Dist out(n_x, 0.0);
  for (std::size_t z = 0; z < n_z; ++z) {
    for (std::size_t x = 0; x < n_x; ++x) out[x] += vae.prior[z] * vae.decoder.rows[z][x];
  }
  return out;
}

namespace {

void validate_vae(const TabularVae& vae) {
  tabular::validate_dist(vae.prior, "tabular vae: prior");
  tabular::validate_dist(vae.p_data, "tabular vae: p_data");
  if (vae.decoder.rows.size() != vae.prior.size()) {
    throw std::invalid_argument("tabular vae: decoder row count != prior support");
  }
  if (vae.encoder.rows.size() != vae.p_data.size()) {
    throw std::invalid_argument("tabular vae: encoder row count != data support");
  }
  for (const auto& row : vae.decoder.rows) tabular::validate_dist(row, "tabular vae: decoder row");
  for (const auto& row : vae.encoder.rows) tabular::validate_dist(row, "tabular vae: encoder row");
}

double safe_log(double v, const char* what) {
  if (v <= 0.0) {
    throw std::domain_error(std::string("tabular vae: log of non-positive ") + what);
  }
  return std::log(v);
}

}  // namespace

double vae_elbo_at(const TabularVae& vae, std::size_t x) {
  double s = 0.0;
  const Dist& q = vae.encoder.rows[x];
  for (std::size_t z = 0; z < q.size(); ++z) {
    if (q[z] == 0.0) continue;
    s += q[z] * (safe_log(vae.decoder.rows[z][x], "decoder mass") +
                 safe_log(vae.prior[z], "prior mass") - std::log(q[z]));
  }
  return s;
}

double vae_log_evidence_at(const TabularVae& vae, std::size_t x) {
  double s = 0.0;
  for (std::size_t z = 0; z < vae.prior.size(); ++z) s += vae.prior[z] * vae.decoder.rows[z][x];
  return safe_log(s, "evidence");
}

Lemma2Report lemma2_check(const TabularVae& vae) {
  validate_vae(vae);
  const std::size_t n_x = vae.p_data.size();
  const Dist p_model = vae_marginal(vae);  // frozen model marginal, the theta0 role
  const Dist p_mix = tabular::marginal_prior(p_model, vae.p_data);

  Lemma2Report rep;
  rep.const_log2 = kLog2;

  // Conventional objective: E_pdata[ E_q log p(x|z) − KL(q‖prior) ].
  for (std::size_t x = 0; x < n_x; ++x) {
    if (vae.p_data[x] == 0.0) continue;
    rep.elbo_form += vae.p_data[x] * vae_elbo_at(vae, x);
  }

  // First rewriting: expectation over the tagged half/half mixture of
  // E_q[log p(x|z,y)] − KL(q(z|x,y)q^r(y|x) ‖ p(z|y)p(y)), with the
  // reversed perfect discriminator selecting y=0 on data-tagged points and
  // y=1 on model-tagged points. The y=1 branch has the fixed inference
  // distribution (taken as the prior) and the data density as its decoder,
  // so it is constant in the trainable parameters.
  for (std::size_t x = 0; x < n_x; ++x) {
    if (vae.p_data[x] > 0.0) {
      const double recon = [&] {
        double s = 0.0;
        const Dist& q = vae.encoder.rows[x];
        for (std::size_t z = 0; z < q.size(); ++z) {
          if (q[z] > 0.0) s += q[z] * safe_log(vae.decoder.rows[z][x], "decoder mass");
        }
        return s;
      }();
      const double kl_joint = tabular::kl(vae.encoder.rows[x], vae.prior) + kLog2;
      rep.kl_form += 0.5 * vae.p_data[x] * (recon - kl_joint);
    }
    if (p_model[x] > 0.0) {
      const double recon = safe_log(vae.p_data[x], "data mass under model support");
      const double kl_joint = tabular::kl(vae.prior, vae.prior) + kLog2;
      rep.kl_form += 0.5 * p_model[x] * (recon - kl_joint);
      rep.const_fake += 0.5 * p_model[x] * std::log(vae.p_data[x]);
    }
  }

  // Second rewriting: −KL against the normalized posterior over (z, y).
  for (std::size_t x = 0; x < n_x; ++x) {
    const std::size_t n_z = vae.prior.size();
    // Unnormalized posterior: p(x|z,y)p(z|y)p(y).
    std::vector<double> post0(n_z), post1(n_z);
    double norm = 0.0;
    for (std::size_t z = 0; z < n_z; ++z) {
      post0[z] = vae.decoder.rows[z][x] * vae.prior[z] * 0.5;
      post1[z] = vae.p_data[x] * vae.prior[z] * 0.5;
      norm += post0[z] + post1[z];
    }
    if (!(norm > 0.0)) throw std::domain_error("lemma2_check: zero posterior normalizer");

    auto neg_kl_to_post = [&](const Dist& q_z, int y_sel) {
      double s = 0.0;
      for (std::size_t z = 0; z < n_z; ++z) {
        if (q_z[z] == 0.0) continue;
        const double target = (y_sel == 0 ? post0[z] : post1[z]) / norm;
        s += q_z[z] * (safe_log(target, "posterior mass") - std::log(q_z[z]));
      }
      return s;
    };
    if (vae.p_data[x] > 0.0) {
      rep.kl_form_bayes += 0.5 * vae.p_data[x] * neg_kl_to_post(vae.encoder.rows[x], 0);
    }
    if (p_model[x] > 0.0) {
      rep.kl_form_bayes += 0.5 * p_model[x] * neg_kl_to_post(vae.prior, 1);
    }
  }

  rep.diff = std::abs(rep.elbo_form - 2.0 * (rep.kl_form - rep.const_fake + kLog2));

  double e_log_mix = 0.0;
  for (std::size_t x = 0; x < n_x; ++x) {
    if (p_mix[x] > 0.0) e_log_mix += p_mix[x] * std::log(p_mix[x]);
  }
  rep.bayes_gap = std::abs(rep.kl_form_bayes - (rep.kl_form - e_log_mix));
  return rep;
}

double tabular_weighted_objective(const TabularVae& vae, const std::vector<double>& w_real_y0,
                                  const std::vector<double>& w_fake_y0) {
  validate_vae(vae);
  const std::size_t n_x = vae.p_data.size();
  if (w_real_y0.size() != n_x || w_fake_y0.size() != n_x) {
    throw std::invalid_argument("tabular_weighted_objective: weight length mismatch");
  }
  const Dist p_model = vae_marginal(vae);
  double obj = 0.0;
  auto branch_y0 = [&](std::size_t x) {
    double recon = 0.0;
    const Dist& q = vae.encoder.rows[x];
    for (std::size_t z = 0; z < q.size(); ++z) {
      if (q[z] > 0.0) recon += q[z] * safe_log(vae.decoder.rows[z][x], "decoder mass");
    }
    return recon - (tabular::kl(q, vae.prior) + kLog2);
  };
  auto branch_y1 = [&](std::size_t x) {
    return safe_log(vae.p_data[x], "data mass") - (tabular::kl(vae.prior, vae.prior) + kLog2);
  };
  for (std::size_t x = 0; x < n_x; ++x) {
    if (vae.p_data[x] > 0.0) {
      obj += 0.5 * vae.p_data[x] *
             (w_real_y0[x] * branch_y0(x) + (1.0 - w_real_y0[x]) * branch_y1(x));
    }
    if (p_model[x] > 0.0) {
      obj += 0.5 * p_model[x] *
             (w_fake_y0[x] * branch_y0(x) + (1.0 - w_fake_y0[x]) * branch_y1(x));
    }
  }
  return obj;
}

tabular::GanInstance random_gan_instance(std::uint64_t seed, std::size_t n) {
  RngStream root(seed, "gan-instance");
  tabular::GanInstance inst;
  RngStream sd = root.substream("pdata");
  inst.p_data = tabular::random_dist(n, sd);
  RngStream st = root.substream("theta");
  inst.theta0.resize(n);
  for (double& t : inst.theta0) t = st.uniform(-2.0, 2.0);
  RngStream sphi = root.substream("disc");
  inst.disc.resize(n);
  for (double& d : inst.disc) {
    const double logit = sphi.uniform(-3.0, 3.0);
    d = 1.0 / (1.0 + std::exp(-logit));
  }
  return inst;
}

TabularVae random_tabular_vae(std::uint64_t seed, std::size_t n_x, std::size_t n_z) {
  RngStream root(seed, "vae-instance");
  TabularVae vae;
  RngStream sp = root.substream("prior");
  vae.prior = tabular::random_dist(n_z, sp);
  RngStream sd = root.substream("pdata");
  vae.p_data = tabular::random_dist(n_x, sd);
  RngStream sdec = root.substream("decoder");
  vae.decoder.rows.resize(n_z);
  for (auto& row : vae.decoder.rows) row = tabular::random_dist(n_x, sdec);
  RngStream senc = root.substream("encoder");
  vae.encoder.rows.resize(n_x);
  for (auto& row : vae.encoder.rows) row = tabular::random_dist(n_z, senc);
  return vae;
}

}  // namespace unigen::lemma
