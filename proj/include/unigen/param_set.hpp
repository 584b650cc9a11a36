#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unigen/tensor.hpp"

namespace unigen {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named parameter collection with per-parameter Adam state. Shapes are fixed
/// at registration; name iteration order is lexicographic, so every walk over
/// the set is deterministic.
class ParamSet {
 public:
  struct Slot {
    Tensor value;
    Tensor m;  // first-moment accumulator
    Tensor v;  // second-moment accumulator
    std::int64_t step = 0;
  };

  void add(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return slots_.contains(name); }
  std::size_t size() const { return slots_.size(); }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;

  std::vector<std::string> names() const;

 private:
  std::map<std::string, Slot> slots_;
};

using GradMap = std::map<std::string, Tensor>;

/// One bias-corrected Adam update over the given gradients. Every gradient
/// key must name a registered parameter of matching shape. A non-finite
/// gradient entry aborts with an error naming the offending parameter.
void adam_step(ParamSet& params, const GradMap& grads, const AdamConfig& cfg);

/// Versioned JSON checkpoint; doubles are stored as base64 little-endian
/// bytes so save/load round-trips bit for bit.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace unigen
