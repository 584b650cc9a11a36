#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "unigen/rng.hpp"

namespace unigen::tabular {

/// Probability vector over a finite support. Helpers below validate the
/// distribution invariants (entries >= 0, sum within 1e-12 of 1).
using Dist = std::vector<double>;

/// Conditional table: rows[c] is a Dist over the target support given
/// condition value c.
struct Conditional {
  std::vector<Dist> rows;
};

/// Finite GAN instance: data distribution over n support points, generator
/// distribution given by softmax over free logits, a discriminator table
/// d(x) = q(y=1|x), and uniform p(y) over {fake=0, real=1}.
struct GanInstance {
  Dist p_data;
  std::vector<double> theta0;  // generator logits, p_g = softmax(theta)
  Dist disc;                   // q(y=1|x) per support point, strictly inside (0,1)
};

void validate_dist(const Dist& p, const std::string& what);

/// Normalize nonnegative weights to a distribution. Errors on negative
/// entries or a non-positive total.
Dist normalize(Dist w);

Dist softmax(const std::vector<double>& logits);

Dist uniform_dist(std::size_t n);

/// Dirichlet(1) draw: uniform over the simplex.
Dist random_dist(std::size_t n, RngStream& rng);

/// Σ p·log(p/q) with 0·log(0/q) = 0. q(i) = 0 while p(i) > 0 violates
/// absolute continuity and raises an error naming the support point.
double kl(const Dist& p, const Dist& q);

/// ½KL(p‖m) + ½KL(q‖m) with m = (p+q)/2; always in [0, log 2].
double jsd(const Dist& p, const Dist& q);

double entropy(const Dist& p);

/// Pointwise convex mixture wa·a + wb·b.
Dist mix(const Dist& a, const Dist& b, double wa, double wb);

/// Marginal over x with uniform p(y): (p_g + p_data)/2.
Dist marginal_prior(const Dist& p_g, const Dist& p_data);

/// Discriminator table from density ratio: q(y=1|x) = p_data/(p_g + p_data).
/// Rows where both densities vanish are undefined and flagged.
struct OptimalDiscriminator {
  Dist prob_real;               // q(y=1|x)
  std::vector<bool> defined;    // false where p_g + p_data == 0
};
OptimalDiscriminator optimal_discriminator(const Dist& p_g, const Dist& p_data);

/// q^r(x|y) ∝ q^r(y|x)·p_x, normalized over x. disc holds q(y=1|x); the
/// reversal q^r(y|x) = q(1−y|x) makes the y=0 row proportional to
/// d(x)·p_x(x) and the y=1 row proportional to (1−d(x))·p_x(x).
/// A zero normalizer (discriminator degenerate on the support) is an error.
Dist reversed_posterior(const Dist& disc, const Dist& p_x, int y);

}  // namespace unigen::tabular
