#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace unigen {

/// Dense row-major tensor of doubles, rank 0..2 in practice (rank is not
/// restricted here, but the op library only builds rank-1/rank-2 values).
/// External inputs go through from_external(), which rejects NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  /// Validating constructor for data that crosses the library boundary
  /// (files, user configs, python). Throws on non-finite entries.
  static Tensor from_external(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  bool is_scalar() const { return size() == 1; }
  /// Value of a single-element tensor; throws otherwise.
  double item() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// "[2,3]" style rendering for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace unigen
