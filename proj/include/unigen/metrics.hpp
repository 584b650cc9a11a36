#pragma once

#include <cstddef>
#include <vector>

#include "unigen/datasets.hpp"
#include "unigen/objectives.hpp"
#include "unigen/tensor.hpp"

namespace unigen {

struct ModeCoverageReport {
  std::vector<double> per_mode_hit_fraction;
  int covered_modes = 0;            // modes whose hit fraction meets the threshold
  double high_quality_fraction = 0.0;  // samples within radius of any mode
};

/// A sample hits mode m when it lies within radius_multiplier * std_m of the
/// mode mean. A mode counts as covered when at least coverage_threshold of
/// the batch hits it.
ModeCoverageReport mode_coverage(const Tensor& samples, const MixtureSpec& spec,
                                 double radius_multiplier = 3.0,
                                 double coverage_threshold = 0.01);

/// Bounded histogram grid shared by two sample sets. lo/hi/bins have one
/// entry per sample dimension (1 or 2 supported). Out-of-range samples are
/// clamped into the edge bins so no mass is dropped.
struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> bins;
};

struct HistDivergences {
  double kl = 0.0;   // KL(hist_p || hist_q)
  double jsd = 0.0;  // JSD(hist_p, hist_q)
};

/// Laplace-smoothed (pseudocount alpha per bin) histogram estimates of
/// KL and JSD between the two sample distributions.
HistDivergences histogram_divergences(const Tensor& samples_p, const Tensor& samples_q,
                                      const GridSpec& grid, double alpha = 1.0);

/// Mean single-sample evidence lower bound over the test set, averaged over
/// samples_per_x fresh latent draws per example. Evaluated batch by batch on
/// throwaway tapes; no gradients.
double test_set_elbo(const VaeNets& nets, const ParamSet& params, const Tensor& test_x,
                     RngStream& rng, std::size_t samples_per_x = 1,
                     std::size_t eval_batch = 256);

}  // namespace unigen
