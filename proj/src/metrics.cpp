#include "unigen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "unigen/tabular.hpp"
#include "unigen/tape.hpp"

namespace unigen {

ModeCoverageReport mode_coverage(const Tensor& samples, const MixtureSpec& spec,
                                 double radius_multiplier, double coverage_threshold) {
  validate_mixture(spec);
  if (samples.rank() != 2 || samples.cols() != 2) {
    throw std::invalid_argument("mode_coverage: samples must be [n,2], got " +
                                shape_str(samples.shape()));
  }
  if (samples.rows() == 0) throw std::invalid_argument("mode_coverage: empty sample batch");
  const std::size_t n = samples.rows();
  const std::size_t k = spec.means.size();
  ModeCoverageReport report;
  report.per_mode_hit_fraction.assign(k, 0.0);
  std::size_t high_quality = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t m = 0; m < k; ++m) {
      const double dx = samples.at(i, 0) - spec.means[m][0];
      const double dy = samples.at(i, 1) - spec.means[m][1];
      const double radius = radius_multiplier * spec.stds[m];
      if (dx * dx + dy * dy <= radius * radius) {
        report.per_mode_hit_fraction[m] += 1.0;
        any = true;
      }
    }
    if (any) ++high_quality;
  }
  for (std::size_t m = 0; m < k; ++m) {
    report.per_mode_hit_fraction[m] /= static_cast<double>(n);
    if (report.per_mode_hit_fraction[m] >= coverage_threshold) ++report.covered_modes;
  }
  report.high_quality_fraction = static_cast<double>(high_quality) / static_cast<double>(n);
  return report;
}

namespace {

std::size_t bin_index(const Tensor& samples, std::size_t row, const GridSpec& grid) {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < grid.bins.size(); ++d) {
    const double lo = grid.lo[d];
    const double hi = grid.hi[d];
    const double v = samples.at(row, d);
    const double t = (v - lo) / (hi - lo);
    long b = static_cast<long>(std::floor(t * static_cast<double>(grid.bins[d])));
    b = std::clamp<long>(b, 0, static_cast<long>(grid.bins[d]) - 1);
    flat = flat * grid.bins[d] + static_cast<std::size_t>(b);
  }
  return flat;
}

tabular::Dist smoothed_histogram(const Tensor& samples, const GridSpec& grid, double alpha,
                                 std::size_t total_bins) {
  std::vector<double> counts(total_bins, alpha);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    counts[bin_index(samples, i, grid)] += 1.0;
  }
  return tabular::normalize(counts);
}

}  // namespace

HistDivergences histogram_divergences(const Tensor& samples_p, const Tensor& samples_q,
                                      const GridSpec& grid, double alpha) {
  const std::size_t dims = grid.bins.size();
  if (dims == 0 || dims > 2) {
    throw std::invalid_argument("histogram_divergences: grid must be 1D or 2D");
  }
  if (grid.lo.size() != dims || grid.hi.size() != dims) {
    throw std::invalid_argument("histogram_divergences: grid lo/hi/bins length mismatch");
  }
  std::size_t total_bins = 1;
  for (std::size_t d = 0; d < dims; ++d) {
    if (grid.bins[d] == 0) throw std::invalid_argument("histogram_divergences: zero bin count");
    if (!(grid.hi[d] > grid.lo[d])) {
      throw std::invalid_argument("histogram_divergences: grid bounds must satisfy lo < hi");
    }
    total_bins *= grid.bins[d];
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("histogram_divergences: smoothing alpha must be positive");
  }
  auto check = [&](const Tensor& s, const char* name) {
    if (s.rank() != 2 || s.cols() != dims) {
      throw std::invalid_argument(std::string("histogram_divergences: ") + name +
                                  " must be [n," + std::to_string(dims) + "], got " +
                                  shape_str(s.shape()));
    }
    if (s.rows() == 0) {
      throw std::invalid_argument(std::string("histogram_divergences: empty ") + name);
    }
  };
  check(samples_p, "samples_p");
  check(samples_q, "samples_q");
  const tabular::Dist hp = smoothed_histogram(samples_p, grid, alpha, total_bins);
  const tabular::Dist hq = smoothed_histogram(samples_q, grid, alpha, total_bins);
  HistDivergences out;
  out.kl = tabular::kl(hp, hq);  // smoothing keeps hq strictly positive
  out.jsd = tabular::jsd(hp, hq);
  return out;
}

double test_set_elbo(const VaeNets& nets, const ParamSet& params, const Tensor& test_x,
                     RngStream& rng, std::size_t samples_per_x, std::size_t eval_batch) {
  if (test_x.rank() != 2 || test_x.rows() == 0) {
    throw std::invalid_argument("test_set_elbo: test_x must be a non-empty [n,d] batch");
  }
  if (samples_per_x == 0) throw std::invalid_argument("test_set_elbo: samples_per_x must be >= 1");
  if (eval_batch == 0) throw std::invalid_argument("test_set_elbo: eval_batch must be >= 1");
  const std::size_t n = test_x.rows();
  const std::size_t d = test_x.cols();
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += eval_batch) {
    const std::size_t stop = std::min(n, start + eval_batch);
    const std::size_t b = stop - start;
    std::vector<double> chunk(b * d);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < d; ++j) chunk[i * d + j] = test_x.at(start + i, j);
    }
    const Tensor batch({b, d}, chunk);
    for (std::size_t s = 0; s < samples_per_x; ++s) {
      Tape tape;
      const MlpVars enc_vars = bind_mlp(tape, nets.enc, params, false);
      const MlpVars dec_vars = bind_mlp(tape, nets.dec, params, false);
      Var per = elbo_per_example(tape, nets, enc_vars, dec_vars, batch, rng);
      for (std::size_t i = 0; i < b; ++i) total += per.value.at(i);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(samples_per_x));
}

}  // namespace unigen
