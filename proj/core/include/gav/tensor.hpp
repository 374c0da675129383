#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace gav {

/// Error type for all contract violations (bad shapes, domain errors,
/// file-format problems). Carries a plain what() message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major multidimensional array of doubles.
/// Values are immutable by convention once an array has been handed to the
/// tape; mutation is only used while constructing inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
  }
  Tensor(Shape shape, std::vector<double> data);

  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t extent(int64_t axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty() && shape_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at2(int64_t i, int64_t j) {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  double at2(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool bit_equal(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

  /// Throws Error naming `what` and the offending flat index when any value
  /// is NaN or infinite.
  void check_finite(const char* what) const;

  Tensor reshaped(Shape s) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace gav
