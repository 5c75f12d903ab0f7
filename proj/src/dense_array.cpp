#include "tofu/dense_array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tofu {

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

static void check_shape(const std::vector<int64_t>& shape) {
  if (shape.size() > 5) throw std::invalid_argument("DenseArray supports at most 5 axes");
  for (int64_t e : shape)
    if (e < 1) throw std::invalid_argument("DenseArray extents must be >= 1");
}

DenseArray::DenseArray(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0);
}

DenseArray::DenseArray(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != static_cast<int64_t>(data_.size()))
    throw std::invalid_argument("DenseArray data length does not match shape " + shape_str());
}

DenseArray DenseArray::scalar(double v) { return DenseArray({}, {v}); }

DenseArray DenseArray::zeros_like(const DenseArray& other) { return DenseArray(other.shape_); }

void DenseArray::fill(double v) { data_.assign(data_.size(), v); }

bool DenseArray::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string DenseArray::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? ", " : "") << shape_[i];
  os << "]";
  return os.str();
}

}  // namespace tofu
