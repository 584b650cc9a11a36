#include "unigen/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

namespace unigen {

namespace {

std::string path_str(const std::filesystem::path& p) { return p.string(); }

std::uint32_t read_be_u32(std::istream& in, const std::filesystem::path& p, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) {
    throw std::runtime_error("idx: truncated header while reading " + std::string(what) + " in " +
                             path_str(p));
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

void validate_mixture(const MixtureSpec& spec) {
  const std::size_t k = spec.means.size();
  if (k == 0) throw std::invalid_argument("mixture: no components");
  if (spec.weights.size() != k || spec.stds.size() != k) {
    throw std::invalid_argument("mixture: means/weights/stds length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(spec.weights[i] >= 0.0)) {
      throw std::invalid_argument("mixture: negative weight at component " + std::to_string(i));
    }
    if (!(spec.stds[i] >= 0.0)) {
      throw std::invalid_argument("mixture: negative std at component " + std::to_string(i));
    }
    if (!std::isfinite(spec.means[i][0]) || !std::isfinite(spec.means[i][1])) {
      throw std::invalid_argument("mixture: non-finite mean at component " + std::to_string(i));
    }
    total += spec.weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("mixture: weights sum to " + std::to_string(total) + ", expected 1");
  }
}

MixtureSpec canonical_mixture() {
  MixtureSpec spec;
  spec.means = {{-2.0, 0.0}, {2.0, 0.0}};
  spec.weights = {0.75, 0.25};
  spec.stds = {0.3, 0.3};
  return spec;
}

Tensor sample_mixture_2d(const MixtureSpec& spec, std::size_t n, RngStream& rng) {
  validate_mixture(spec);
  Tensor out = Tensor::zeros({n, 2});
  const std::size_t k = spec.means.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t comp = k - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      acc += spec.weights[c];
      if (u < acc) {
        comp = c;
        break;
      }
    }
    out.at(i, 0) = spec.means[comp][0] + spec.stds[comp] * rng.normal();
    out.at(i, 1) = spec.means[comp][1] + spec.stds[comp] * rng.normal();
  }
  return out;
}

Tensor sample_tabular_1d(const tabular::Dist& probs, std::size_t n, RngStream& rng) {
  tabular::validate_dist(probs, "sample_tabular_1d probs");
  const std::size_t k = probs.size();
  Tensor out = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t bin = k - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      acc += probs[c];
      if (u < acc) {
        bin = c;
        break;
      }
    }
    out.at(i, 0) = (static_cast<double>(bin) + 0.5) / static_cast<double>(k);
  }
  return out;
}

IdxDataset load_mnist_idx(const std::filesystem::path& image_path,
                          const std::filesystem::path& label_path, double subset_fraction,
                          std::uint64_t seed, bool binarize, double threshold) {
  if (!(subset_fraction > 0.0) || subset_fraction > 1.0) {
    throw std::invalid_argument("idx: subset_fraction must be in (0, 1], got " +
                                std::to_string(subset_fraction));
  }
  std::ifstream img(image_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open image file " + path_str(image_path));
  const std::uint32_t img_magic = read_be_u32(img, image_path, "image magic");
  if (img_magic != 0x00000803u) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", img_magic);
    throw std::runtime_error("idx: bad image magic " + std::string(buf) + " in " +
                             path_str(image_path) + " (expected 0x00000803)");
  }
  const std::uint32_t n_img = read_be_u32(img, image_path, "image count");
  const std::uint32_t rows = read_be_u32(img, image_path, "row count");
  const std::uint32_t cols = read_be_u32(img, image_path, "column count");
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
    throw std::runtime_error("idx: implausible image dimensions " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " in " + path_str(image_path));
  }
  const std::size_t pixels = std::size_t(rows) * std::size_t(cols);
  std::vector<unsigned char> raw(std::size_t(n_img) * pixels);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(img.gcount()) != raw.size()) {
    throw std::runtime_error("idx: truncated image payload in " + path_str(image_path) +
                             " (expected " + std::to_string(raw.size()) + " bytes, got " +
                             std::to_string(img.gcount()) + ")");
  }

  std::ifstream lab(label_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open label file " + path_str(label_path));
  const std::uint32_t lab_magic = read_be_u32(lab, label_path, "label magic");
  if (lab_magic != 0x00000801u) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", lab_magic);
    throw std::runtime_error("idx: bad label magic " + std::string(buf) + " in " +
                             path_str(label_path) + " (expected 0x00000801)");
  }
  const std::uint32_t n_lab = read_be_u32(lab, label_path, "label count");
  if (n_lab != n_img) {
    throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(n_img) + " vs " +
                             std::to_string(n_lab) + ")");
  }
  std::vector<unsigned char> raw_labels(n_lab);
  lab.read(reinterpret_cast<char*>(raw_labels.data()),
           static_cast<std::streamsize>(raw_labels.size()));
  if (static_cast<std::size_t>(lab.gcount()) != raw_labels.size()) {
    throw std::runtime_error("idx: truncated label payload in " + path_str(label_path));
  }

  // Seeded subset without replacement: partial Fisher-Yates over indices.
  std::size_t keep = static_cast<std::size_t>(
      std::llround(subset_fraction * static_cast<double>(n_img)));
  keep = std::clamp<std::size_t>(keep, 1, n_img);
  std::vector<std::uint32_t> order(n_img);
  std::iota(order.begin(), order.end(), 0u);
  RngStream rng(seed, "idx-subset");
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n_img - i));
    std::swap(order[i], order[j]);
  }

  IdxDataset out;
  out.rows = rows;
  out.cols = cols;
  out.images = Tensor::zeros({keep, pixels});
  out.labels.resize(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t src = order[i];
    out.labels[i] = static_cast<int>(raw_labels[src]);
    const unsigned char* px = raw.data() + src * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = static_cast<double>(px[p]) / 255.0;
      out.images.at(i, p) = binarize ? (v >= threshold ? 1.0 : 0.0) : v;
    }
  }
  return out;
}

namespace {

// Seven-segment layout on a 28x28 canvas. Segments: 0 top, 1 top-right,
// 2 bottom-right, 3 bottom, 4 bottom-left, 5 top-left, 6 middle.
constexpr std::array<std::uint8_t, 10> kSegmentMask = {
    0b0111111,  // 0
    0b0000110,  // 1
    0b1011011,  // 2
    0b1001111,  // 3
    0b1100110,  // 4
    0b1101101,  // 5
    0b1111101,  // 6
    0b0000111,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

struct Stroke {
  double r0, c0, r1, c1;  // capsule endpoints in canvas coordinates
  double half_width;
  double intensity;
};

// Segment endpoints of the upright glyph skeleton, before deformation.
std::array<std::array<double, 4>, 7> segment_lines() {
  const double top = 4.5, mid = 13.5, bot = 22.5;
  const double left = 8.5, right = 19.5;
  return {{
      {top, left, top, right},    // top bar
      {top, right, mid, right},   // top-right column
      {mid, right, bot, right},   // bottom-right column
      {bot, left, bot, right},    // bottom bar
      {mid, left, bot, left},     // bottom-left column
      {top, left, mid, left},     // top-left column
      {mid, left, mid, right},    // middle bar
  }};
}

double capsule_distance(double r, double c, const Stroke& s) {
  const double vr = s.r1 - s.r0, vc = s.c1 - s.c0;
  const double wr = r - s.r0, wc = c - s.c0;
  const double vv = vr * vr + vc * vc;
  double t = vv > 0.0 ? (wr * vr + wc * vc) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(wr - t * vr, wc - t * vc);
}

void render_digit(int digit, RngStream& rng, unsigned char* out28x28) {
  // Handwriting-like variation: a global affine (rotation, slant, anisotropic
  // scale, translation) composed with per-segment endpoint wobble, stroke
  // width, and ink intensity. Occasional faint strokes break up after
  // thresholding, like dry-pen gaps.
  const double dr = rng.uniform(-1.8, 1.8);
  const double dc = rng.uniform(-1.8, 1.8);
  const double rot = rng.uniform(-0.20, 0.20);
  const double shear = rng.uniform(-0.42, 0.42);
  const double scale_r = rng.uniform(0.82, 1.14);
  const double scale_c = rng.uniform(0.82, 1.14);

  // Forward map: center, scale, shear columns by row, rotate, translate.
  const double cr = std::cos(rot), sr = std::sin(rot);
  // A = R(rot) * [[scale_r, 0], [shear, scale_c]]
  const double a00 = cr * scale_r - sr * shear;
  const double a01 = -sr * scale_c;
  const double a10 = sr * scale_r + cr * shear;
  const double a11 = cr * scale_c;

  const auto lines = segment_lines();
  const std::uint8_t mask = kSegmentMask[static_cast<std::size_t>(digit)];
  std::array<Stroke, 7> strokes;
  std::size_t n_strokes = 0;
  const double mid = 13.5;
  for (int s = 0; s < 7; ++s) {
    // Draw variation for every segment so the stream stays aligned across
    // digits with different masks.
    const double j0r = rng.uniform(-1.2, 1.2), j0c = rng.uniform(-1.2, 1.2);
    const double j1r = rng.uniform(-1.2, 1.2), j1c = rng.uniform(-1.2, 1.2);
    const double width = rng.uniform(0.85, 1.9);
    const bool faint = rng.uniform() < 0.08;
    const double intensity = faint ? rng.uniform(0.3, 0.5) : rng.uniform(0.6, 1.0);
    if (!(mask & (1u << s))) continue;
    const auto& ln = lines[static_cast<std::size_t>(s)];
    auto map = [&](double r, double c, double& mr, double& mc) {
      const double ur = r - mid, uc = c - mid;
      mr = a00 * ur + a01 * uc + mid + dr;
      mc = a10 * ur + a11 * uc + mid + dc;
    };
    Stroke& st = strokes[n_strokes++];
    map(ln[0] + j0r, ln[1] + j0c, st.r0, st.c0);
    map(ln[2] + j1r, ln[3] + j1c, st.r1, st.c1);
    st.half_width = width;
    st.intensity = intensity;
  }

  std::array<double, 28 * 28> canvas{};
  for (std::size_t si = 0; si < n_strokes; ++si) {
    const Stroke& st = strokes[si];
    const int rlo = std::max(0, int(std::floor(std::min(st.r0, st.r1) - st.half_width - 1.5)));
    const int rhi = std::min(27, int(std::ceil(std::max(st.r0, st.r1) + st.half_width + 1.5)));
    const int clo = std::max(0, int(std::floor(std::min(st.c0, st.c1) - st.half_width - 1.5)));
    const int chi = std::min(27, int(std::ceil(std::max(st.c0, st.c1) + st.half_width + 1.5)));
    for (int r = rlo; r <= rhi; ++r) {
      for (int c = clo; c <= chi; ++c) {
        // Soft edge: full intensity inside, linear falloff over one pixel.
        const double d = capsule_distance(r, c, st) - st.half_width;
        if (d < 1.0) {
          const std::size_t idx = std::size_t(r) * 28 + std::size_t(c);
          canvas[idx] = std::max(canvas[idx], st.intensity * std::min(1.0, 1.0 - d));
        }
      }
    }
  }
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double noisy = std::clamp(canvas[i] + 0.05 * rng.normal(), 0.0, 1.0);
    out28x28[i] = static_cast<unsigned char>(std::lround(noisy * 255.0));
  }
}

void write_idx_pair(const std::filesystem::path& dir, const std::string& image_name,
                    const std::string& label_name, std::size_t n, RngStream& rng) {
  std::ofstream img(dir / image_name, std::ios::binary);
  std::ofstream lab(dir / label_name, std::ios::binary);
  if (!img || !lab) {
    throw std::runtime_error("idx: cannot create output files in " + dir.string());
  }
  write_be_u32(img, 0x00000803u);
  write_be_u32(img, static_cast<std::uint32_t>(n));
  write_be_u32(img, 28u);
  write_be_u32(img, 28u);
  write_be_u32(lab, 0x00000801u);
  write_be_u32(lab, static_cast<std::uint32_t>(n));
  unsigned char pixels[28 * 28];
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.next_below(10));
    render_digit(digit, rng, pixels);
    img.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
    const unsigned char lb = static_cast<unsigned char>(digit);
    lab.write(reinterpret_cast<const char*>(&lb), 1);
  }
  if (!img || !lab) throw std::runtime_error("idx: write failure in " + dir.string());
}

}  // namespace

void write_synthetic_idx(const std::filesystem::path& dir, std::size_t n_train,
                         std::size_t n_test, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  RngStream train_rng(seed, "synthetic-idx-train");
  RngStream test_rng(seed, "synthetic-idx-test");
  write_idx_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", n_train, train_rng);
  write_idx_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", n_test, test_rng);
}

}  // namespace unigen
