#pragma once

// Dense float32 tensor of rank 1..4, row-major, NCHW axis order.
// Tensors are plain values: copyable, immutable-by-convention once built.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace denfuse {

inline std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_count(shape_), 0.0f) {}

  Tensor(std::vector<int> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_count(shape_)) {
      throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  // rank-2 [H,W]
  float& at(int i, int j) { return data_[idx2(i, j)]; }
  float at(int i, int j) const { return data_[idx2(i, j)]; }
  // rank-3 [C,H,W]
  float& at(int c, int i, int j) { return data_[idx3(c, i, j)]; }
  float at(int c, int i, int j) const { return data_[idx3(c, i, j)]; }
  // rank-4 [N,C,H,W]
  float& at(int n, int c, int i, int j) { return data_[idx4(n, c, i, j)]; }
  float at(int n, int c, int i, int j) const { return data_[idx4(n, c, i, j)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // same data, new shape (element count must match)
  Tensor reshaped(std::vector<int> shape) const {
    if (checked_count(shape) != data_.size()) {
      throw std::invalid_argument("reshape from " + shape_string(shape_) + " to " +
                                  shape_string(shape) + " changes element count");
    }
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  static std::size_t checked_count(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4) {
      throw std::invalid_argument("tensor rank must be 1..4, got shape " + shape_string(shape));
    }
    std::size_t count = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor dims must be positive: " + shape_string(shape));
      count *= static_cast<std::size_t>(d);
    }
    return count;
  }

  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * shape_[1] + j;
  }
  std::size_t idx3(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j;
  }
  std::size_t idx4(int n, int c, int i, int j) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * static_cast<std::size_t>(shape_[2]) + i) *
               shape_[3] +
           j;
  }

  std::vector<int> shape_;
  std::vector<float> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Tensor scale(const Tensor& a, float s) {
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

inline Tensor clamp01(const Tensor& a) {
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = std::min(1.0f, std::max(0.0f, a[i]));
  return out;
}

inline double sum_double(const Tensor& a) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += a[i];
  return acc;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return a.raw() == b.raw();
}

}  // namespace denfuse
