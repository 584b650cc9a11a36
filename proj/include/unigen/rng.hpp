#pragma once

#include <cstdint>
#include <string_view>

namespace unigen {

/// Counter-based pseudo-random stream. Streams are keyed by a root seed plus
/// a label path, so independent substreams ("data", "init", ...) can be
/// derived deterministically from one experiment seed. Same seed and draw
/// sequence always yields identical values, independent of platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed, std::string_view label = "");

  /// Derive an independent substream; the parent stream is unaffected.
  RngStream substream(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform draw in [0, 1).
  double uniform();
  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal draw (Box-Muller; pairs cached inside the stream).
  double normal();
  /// Integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t key() const { return key_; }

 private:
  RngStream(std::uint64_t key, std::uint64_t counter);

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace unigen
