#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "unigen/rng.hpp"
#include "unigen/tabular.hpp"
#include "unigen/tensor.hpp"

namespace unigen {

/// 2D Gaussian mixture: component means, mixing weights (sum to 1), and
/// per-component isotropic standard deviations.
struct MixtureSpec {
  std::vector<std::array<double, 2>> means;
  std::vector<double> weights;
  std::vector<double> stds;
};
void validate_mixture(const MixtureSpec& spec);

/// The asymmetric two-mode benchmark: means (-2,0) and (+2,0), weights
/// (0.75, 0.25), std 0.3. Small enough to train on in seconds, skewed enough
/// that mode-dropping behavior is visible.
MixtureSpec canonical_mixture();

/// n draws: component by weight, then isotropic Gaussian. Shape [n,2].
Tensor sample_mixture_2d(const MixtureSpec& spec, std::size_t n, RngStream& rng);

/// 1D samples from a finite distribution, mapped to bin centers
/// (i + 0.5)/K on [0,1]. Shape [n,1].
Tensor sample_tabular_1d(const tabular::Dist& probs, std::size_t n, RngStream& rng);

struct IdxDataset {
  Tensor images;  // [N, rows*cols], values in [0,1] (binarized to {0,1} on request)
  std::vector<int> labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Reads an IDX image/label pair (big-endian, magics 0x00000803/0x00000801),
/// scales pixels to [0,1], optionally binarizes at the threshold, and keeps a
/// seed-deterministic subset drawn without replacement.
IdxDataset load_mnist_idx(const std::filesystem::path& image_path,
                          const std::filesystem::path& label_path, double subset_fraction,
                          std::uint64_t seed, bool binarize, double threshold = 0.5);

/// Writes a deterministic procedural raster corpus (seven-segment style
/// digit glyphs with jitter and noise) in IDX format:
/// train-images-idx3-ubyte / train-labels-idx1-ubyte / t10k-... in dir.
/// Stands in for the real handwritten corpus when it is not on disk.
void write_synthetic_idx(const std::filesystem::path& dir, std::size_t n_train,
                         std::size_t n_test, std::uint64_t seed);

}  // namespace unigen
