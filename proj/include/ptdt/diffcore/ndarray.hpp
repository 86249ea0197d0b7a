#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ptdt/common/errors.hpp"

namespace ptdt::diff {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major array. Value type: copying copies the data.
template <typename T>
class NdArray {
 public:
  using value_type = T;

  NdArray() = default;

  explicit NdArray(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(numel(shape_), fill);
  }

  NdArray(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != numel(shape_)) {
      throw ShapeError("NdArray: shape " + diff::to_string(shape_) + " needs " +
                       std::to_string(numel(shape_)) + " values, got " +
                       std::to_string(data_.size()));
    }
  }

  static NdArray scalar(T v) { return NdArray(Shape{1}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessor (row, col) on the last two axes flattened as rows x last.
  T& at(std::size_t row, std::size_t col) { return data_[row * last() + col]; }
  const T& at(std::size_t row, std::size_t col) const { return data_[row * last() + col]; }

  std::size_t last() const { return shape_.empty() ? 1 : static_cast<std::size_t>(shape_.back()); }
  std::size_t rows() const { return last() == 0 ? 0 : data_.size() / last(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  NdArray reshaped(Shape shape) const {
    if (numel(shape) != data_.size()) {
      throw ShapeError("reshape: cannot view " + diff::to_string(shape_) + " as " +
                       diff::to_string(shape));
    }
    return NdArray(std::move(shape), data_);
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  NdArray<U> cast() const {
    return NdArray<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const NdArray& a, const NdArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("NdArray: non-positive extent in shape " + diff::to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace ptdt::diff
