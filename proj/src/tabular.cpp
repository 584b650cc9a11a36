#include "unigen/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unigen::tabular {
namespace {

void check_same_support(const Dist& p, const Dist& q, const char* op) {
  if (p.size() != q.size()) {
    throw std::invalid_argument(std::string(op) + ": support sizes differ (" +
                                std::to_string(p.size()) + " vs " + std::to_string(q.size()) +
                                ")");
  }
}

}  // namespace

void validate_dist(const Dist& p, const std::string& what) {
  if (p.empty()) throw std::invalid_argument(what + ": empty support");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      throw std::invalid_argument(what + ": negative or NaN mass at support point " +
                                  std::to_string(i));
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument(what + ": mass sums to " + std::to_string(sum) + ", not 1");
  }
}

Dist normalize(Dist w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) {
      throw std::invalid_argument("normalize: negative or NaN weight at support point " +
                                  std::to_string(i));
    }
    sum += w[i];
  }
  if (!(sum > 0.0)) throw std::invalid_argument("normalize: total weight is not positive");
  for (double& x : w) x /= sum;
  return w;
}

Dist softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Dist p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

Dist uniform_dist(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_dist: empty support");
  return Dist(n, 1.0 / static_cast<double>(n));
}

Dist random_dist(std::size_t n, RngStream& rng) {
  // -log(U) exponentials normalized: Dirichlet(1,...,1).
  Dist w(n);
  for (double& x : w) {
    double u = rng.uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    x = -std::log(u);
  }
  return normalize(std::move(w));
}

double kl(const Dist& p, const Dist& q) {
  check_same_support(p, q, "kl");
  validate_dist(p, "kl: p");
  validate_dist(q, "kl: q");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw std::domain_error("kl: q has zero mass at support point " + std::to_string(i) +
                              " where p is positive (absolute continuity violated)");
    }
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

double jsd(const Dist& p, const Dist& q) {
  check_same_support(p, q, "jsd");
  validate_dist(p, "jsd: p");
  validate_dist(q, "jsd: q");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) sum += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) sum += 0.5 * q[i] * std::log(q[i] / m);
  }
  return sum;
}

double entropy(const Dist& p) {
  validate_dist(p, "entropy");
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

Dist mix(const Dist& a, const Dist& b, double wa, double wb) {
  check_same_support(a, b, "mix");
  Dist out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

Dist marginal_prior(const Dist& p_g, const Dist& p_data) {
  check_same_support(p_g, p_data, "marginal_prior");
  return mix(p_g, p_data, 0.5, 0.5);
}

OptimalDiscriminator optimal_discriminator(const Dist& p_g, const Dist& p_data) {
  check_same_support(p_g, p_data, "optimal_discriminator");
  OptimalDiscriminator out;
  out.prob_real.resize(p_g.size());
  out.defined.resize(p_g.size());
  for (std::size_t i = 0; i < p_g.size(); ++i) {
    const double denom = p_g[i] + p_data[i];
    if (denom > 0.0) {
      out.prob_real[i] = p_data[i] / denom;
      out.defined[i] = true;
    } else {
      out.prob_real[i] = 0.5;
      out.defined[i] = false;
    }
  }
  return out;
}

Dist reversed_posterior(const Dist& disc, const Dist& p_x, int y) {
  check_same_support(disc, p_x, "reversed_posterior");
  if (y != 0 && y != 1) throw std::invalid_argument("reversed_posterior: y must be 0 or 1");
  Dist w(p_x.size());
  for (std::size_t i = 0; i < p_x.size(); ++i) {
    // q^r(y|x) = q(1-y|x); disc stores q(y=1|x).
    const double lik = y == 0 ? disc[i] : 1.0 - disc[i];
    if (lik < 0.0 || lik > 1.0) {
      throw std::invalid_argument("reversed_posterior: discriminator entry " +
                                  std::to_string(disc[i]) + " outside [0,1]");
    }
    w[i] = lik * p_x[i];
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > 0.0)) {
    throw std::domain_error(
        "reversed_posterior: zero normalizer (discriminator degenerate on the full support)");
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace unigen::tabular
