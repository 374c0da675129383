#include "gav/tensor.hpp"

#include <cmath>
#include <sstream>

namespace gav {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    if (e < 0) throw Error("negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
    throw Error("data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(static_cast<size_t>(shape_numel(t.shape_)), v);
  return t;
}

void Tensor::check_finite(const char* what) const {
  for (size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(std::string(what) + ": non-finite value at flat index " +
                  std::to_string(i));
    }
  }
}

Tensor Tensor::reshaped(Shape s) const {
  if (shape_numel(s) != size()) {
    throw Error("reshape " + shape_str(shape_) + " -> " + shape_str(s) +
                ": element count mismatch");
  }
  Tensor t;
  t.shape_ = std::move(s);
  t.data_ = data_;
  return t;
}

}  // namespace gav
