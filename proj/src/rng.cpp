#include "unigen/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace unigen {
namespace {

// splitmix64 finalizer; full-period, passes standard bit-mixing tests.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::uint64_t key, std::string_view label) {
  std::uint64_t h = mix64(key ^ 0x517cc1b727220a95ULL);
  for (unsigned char c : label) h = mix64(h ^ c);
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, std::string_view label)
    : key_(hash_label(mix64(root_seed), label)), counter_(0) {}

RngStream::RngStream(std::uint64_t key, std::uint64_t counter)
    : key_(key), counter_(counter) {}

RngStream RngStream::substream(std::string_view label) const {
  return RngStream(hash_label(key_, label), 0);
}

std::uint64_t RngStream::next_u64() { return mix64(key_ ^ mix64(counter_++)); }

double RngStream::uniform() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 nudged away from zero so log() stays finite.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(a);
  have_cached_normal_ = true;
  return r * std::cos(a);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = n * (~0ULL / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace unigen
