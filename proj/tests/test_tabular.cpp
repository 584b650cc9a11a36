#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "unigen/rng.hpp"
#include "unigen/tabular.hpp"

using namespace unigen;
using tabular::Dist;

TEST_CASE("distribution validation names the offending support point") {
  CHECK_NOTHROW(tabular::validate_dist({0.25, 0.75}, "ok"));
  CHECK_THROWS_WITH_AS(tabular::validate_dist({}, "p"), "p: empty support",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(tabular::validate_dist({0.5, -0.5, 1.0}, "p"),
                       "p: negative or NaN mass at support point 1", std::invalid_argument);
  const double nan = std::nan("");
  CHECK_THROWS_WITH_AS(tabular::validate_dist({0.5, 0.5, nan}, "p"),
                       "p: negative or NaN mass at support point 2", std::invalid_argument);
  CHECK_THROWS_AS(tabular::validate_dist({0.6, 0.6}, "p"), std::invalid_argument);
  // Sum tolerance is tight but not exact-equality.
  CHECK_NOTHROW(tabular::validate_dist({0.1, 0.2, 0.3, 0.4 + 5e-13}, "p"));
}

TEST_CASE("normalize rescales weights and rejects degenerate input") {
  const Dist p = tabular::normalize({2.0, 6.0});
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_NOTHROW(tabular::validate_dist(p, "normalized"));
  CHECK_THROWS_WITH_AS(tabular::normalize({1.0, -0.1}),
                       "normalize: negative or NaN weight at support point 1",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(tabular::normalize({0.0, 0.0}),
                       "normalize: total weight is not positive", std::invalid_argument);
  CHECK_THROWS_AS(tabular::normalize({}), std::invalid_argument);
}

TEST_CASE("softmax is shift invariant and stable at extreme logits") {
  const Dist p = tabular::softmax({0.0, 0.0, 0.0});
  for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Dist a = tabular::softmax({1.0, 2.0, 3.0});
  const Dist b = tabular::softmax({1001.0, 1002.0, 1003.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  CHECK_NOTHROW(tabular::validate_dist(b, "softmax"));

  const Dist c = tabular::softmax({-1000.0, 0.0});
  CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(tabular::softmax({}), std::invalid_argument);
}

TEST_CASE("random_dist draws valid distributions deterministically per seed") {
  RngStream a(42, "dist");
  RngStream b(42, "dist");
  RngStream c(43, "dist");
  const Dist pa = tabular::random_dist(16, a);
  const Dist pb = tabular::random_dist(16, b);
  const Dist pc = tabular::random_dist(16, c);
  CHECK(pa == pb);
  CHECK(pa != pc);
  CHECK_NOTHROW(tabular::validate_dist(pa, "random"));
  for (double x : pa) CHECK(x > 0.0);
}

TEST_CASE("kl matches hand-computed values and basic identities") {
  CHECK(tabular::kl({0.3, 0.7}, {0.6, 0.4}) ==
        doctest::Approx(0.18378689738681217).epsilon(1e-15));
  CHECK(tabular::kl({0.25, 0.75}, {0.25, 0.75}) == 0.0);
  // Zero mass in p contributes nothing.
  CHECK(tabular::kl({0.0, 1.0}, {0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  RngStream rng(7, "kl");
  for (int i = 0; i < 20; ++i) {
    const Dist p = tabular::random_dist(8, rng);
    const Dist q = tabular::random_dist(8, rng);
    CHECK(tabular::kl(p, q) >= 0.0);
  }
}

TEST_CASE("kl raises on absolute continuity violations and support mismatch") {
  CHECK_THROWS_WITH_AS(
      tabular::kl({0.5, 0.5}, {1.0, 0.0}),
      "kl: q has zero mass at support point 1 where p is positive (absolute continuity "
      "violated)",
      std::domain_error);
  CHECK_THROWS_WITH_AS(tabular::kl({0.5, 0.5}, {0.3, 0.3, 0.4}),
                       "kl: support sizes differ (2 vs 3)", std::invalid_argument);
  CHECK_THROWS_AS(tabular::kl({0.5, 0.6}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("jsd is symmetric, bounded by log 2, and defined without absolute continuity") {
  CHECK(tabular::jsd({0.2, 0.8}, {0.5, 0.5}) ==
        doctest::Approx(0.05067183698556589).epsilon(1e-14));
  CHECK(tabular::jsd({0.4, 0.6}, {0.4, 0.6}) == 0.0);
  // Disjoint supports are fine for jsd and saturate the bound.
  CHECK(tabular::jsd({1.0, 0.0}, {0.0, 1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  RngStream rng(11, "jsd");
  for (int i = 0; i < 50; ++i) {
    const Dist p = tabular::random_dist(12, rng);
    const Dist q = tabular::random_dist(12, rng);
    const double j = tabular::jsd(p, q);
    CHECK(j >= 0.0);
    CHECK(j <= std::log(2.0) + 1e-15);
    CHECK(tabular::jsd(q, p) == doctest::Approx(j).epsilon(1e-14));
    // Cross-check against the mixture definition built from public pieces.
    const Dist m = tabular::mix(p, q, 0.5, 0.5);
    const double ref = 0.5 * tabular::kl(p, m) + 0.5 * tabular::kl(q, m);
    CHECK(j == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("entropy of uniform support is log n") {
  CHECK(tabular::entropy(tabular::uniform_dist(8)) ==
        doctest::Approx(2.0794415416798357).epsilon(1e-15));
  CHECK(tabular::entropy({1.0, 0.0, 0.0}) == 0.0);
  RngStream rng(3, "ent");
  const Dist p = tabular::random_dist(10, rng);
  CHECK(tabular::entropy(p) <= std::log(10.0) + 1e-15);
  CHECK(tabular::entropy(p) >= 0.0);
}

TEST_CASE("mix and marginal_prior average pointwise") {
  const Dist m = tabular::mix({1.0, 0.0}, {0.0, 1.0}, 0.25, 0.75);
  CHECK(m[0] == 0.25);
  CHECK(m[1] == 0.75);
  const Dist mp = tabular::marginal_prior({0.1, 0.9}, {0.5, 0.5});
  CHECK(mp[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(mp[1] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(tabular::mix({0.5, 0.5}, {1.0}, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("optimal discriminator is the density ratio with undefined rows flagged") {
  const Dist p_g = {0.1, 0.4, 0.5};
  const Dist p_d = {0.3, 0.3, 0.4};
  const auto od = tabular::optimal_discriminator(p_g, p_d);
  CHECK(od.prob_real[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(od.prob_real[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
  CHECK(od.prob_real[2] == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  for (bool d : od.defined) CHECK(d);

  SUBCASE("matched densities give a constant half") {
    RngStream rng(5, "od");
    const Dist p = tabular::random_dist(6, rng);
    const auto eq = tabular::optimal_discriminator(p, p);
    for (double d : eq.prob_real) CHECK(d == 0.5);
  }

  SUBCASE("support point with zero mass on both sides is flagged, not invented") {
    const auto od0 = tabular::optimal_discriminator({0.0, 1.0}, {0.0, 1.0});
    CHECK(od0.prob_real[0] == 0.5);
    CHECK_FALSE(od0.defined[0]);
    CHECK(od0.defined[1]);
  }
}

TEST_CASE("reversed posterior reweights the marginal by the flipped discriminator") {
  const Dist disc = {0.8, 0.3, 0.5};
  const Dist p_x = {0.2, 0.5, 0.3};
  const Dist y0 = tabular::reversed_posterior(disc, p_x, 0);
  const Dist y1 = tabular::reversed_posterior(disc, p_x, 1);
  CHECK(y0[0] == doctest::Approx(0.34782608695652173).epsilon(1e-15));
  CHECK(y0[1] == doctest::Approx(0.3260869565217391).epsilon(1e-15));
  CHECK(y0[2] == doctest::Approx(0.3260869565217391).epsilon(1e-15));
  CHECK(y1[0] == doctest::Approx(0.07407407407407407).epsilon(1e-15));
  CHECK(y1[1] == doctest::Approx(0.6481481481481483).epsilon(1e-15));
  CHECK(y1[2] == doctest::Approx(0.2777777777777778).epsilon(1e-15));
  CHECK_NOTHROW(tabular::validate_dist(y0, "y0"));
  CHECK_NOTHROW(tabular::validate_dist(y1, "y1"));
}

TEST_CASE("reversed posterior at the optimal discriminator recovers the two densities") {
  RngStream rng(17, "rp");
  for (int i = 0; i < 20; ++i) {
    const Dist p_g = tabular::random_dist(16, rng);
    const Dist p_d = tabular::random_dist(16, rng);
    const Dist p_x = tabular::marginal_prior(p_g, p_d);
    const auto od = tabular::optimal_discriminator(p_g, p_d);
    // y=0 flips to "real": d(x)·p_x ∝ p_data. y=1 flips to "fake": (1−d)·p_x ∝ p_g.
    const Dist back_real = tabular::reversed_posterior(od.prob_real, p_x, 0);
    const Dist back_fake = tabular::reversed_posterior(od.prob_real, p_x, 1);
    for (std::size_t k = 0; k < p_g.size(); ++k) {
      CHECK(back_real[k] == doctest::Approx(p_d[k]).epsilon(1e-12));
      CHECK(back_fake[k] == doctest::Approx(p_g[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("reversed posterior at a uniform discriminator returns the marginal for both y") {
  RngStream rng(23, "rp-uniform");
  const Dist p_x = tabular::random_dist(9, rng);
  const Dist half(9, 0.5);
  const Dist y0 = tabular::reversed_posterior(half, p_x, 0);
  const Dist y1 = tabular::reversed_posterior(half, p_x, 1);
  for (std::size_t k = 0; k < p_x.size(); ++k) {
    CHECK(y0[k] == doctest::Approx(p_x[k]).epsilon(1e-14));
    CHECK(y1[k] == doctest::Approx(p_x[k]).epsilon(1e-14));
  }
}

TEST_CASE("reversed posterior rejects bad labels, ranges, and degenerate discriminators") {
  const Dist p_x = {0.5, 0.5};
  CHECK_THROWS_WITH_AS(tabular::reversed_posterior({0.5, 0.5}, p_x, 2),
                       "reversed_posterior: y must be 0 or 1", std::invalid_argument);
  CHECK_THROWS_AS(tabular::reversed_posterior({1.5, 0.5}, p_x, 0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      tabular::reversed_posterior({0.0, 0.0}, p_x, 0),
      "reversed_posterior: zero normalizer (discriminator degenerate on the full support)",
      std::domain_error);
  // The same discriminator is fine for the other label.
  CHECK_NOTHROW(tabular::reversed_posterior({0.0, 0.0}, p_x, 1));
  CHECK_THROWS_AS(tabular::reversed_posterior({0.5}, p_x, 0), std::invalid_argument);
}
