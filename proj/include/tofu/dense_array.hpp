#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tofu {

// Contiguous row-major array of 64-bit floats, up to 5 axes.
// A rank-0 array holds a single scalar.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<int64_t> shape);
  DenseArray(std::vector<int64_t> shape, std::vector<double> data);

  static DenseArray scalar(double v);
  static DenseArray zeros_like(const DenseArray& other);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }
  void fill(double v);
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);

}  // namespace tofu
