#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ganomaly/errors.hpp"

namespace ganomaly {

/// Dense row-major tensor. Data is always contiguous; the shape is dynamic.
/// This is deliberately minimal: the math lives in kernels.hpp, layers own
/// their scratch space, and views/strides are not needed anywhere.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), T(0));
  }

  Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Convenience accessors for the common layouts in this codebase.
  T& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * dim(1) + j)]; }
  const T& at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * dim(1) + j)]; }

  T& at(int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>((c * dim(1) + h) * dim(2) + w)];
  }
  const T& at(int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>((c * dim(1) + h) * dim(2) + w)];
  }

  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void zero() { fill(T(0)); }

  /// Reinterprets the buffer with a new shape of identical element count.
  Tensor reshaped(std::vector<int64_t> shape) const {
    if (count(shape) != numel()) {
      throw ShapeError("reshape: element count mismatch (" + shape_str(shape_) + " -> " +
                       shape_str(shape) + ")");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void require_shape(const std::vector<int64_t>& expect, const char* what) const {
    if (shape_ != expect) {
      throw ShapeError(std::string(what) + ": expected shape " + shape_str(expect) + ", got " +
                       shape_str(shape_));
    }
  }

  static std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

 private:
  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
      n *= d;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

}  // namespace ganomaly
