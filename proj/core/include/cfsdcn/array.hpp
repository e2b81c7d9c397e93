#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfsdcn {

/// Thrown whenever two operands disagree on a dimension.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (batch, channels, height, width).
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense row-major NCHW buffer. Plain value type: copying copies the data.
template <typename T>
class Array4 {
 public:
  using value_type = T;

  Array4() = default;
  explicit Array4(Shape4 shape, T fill = T{0});
  Array4(Shape4 shape, std::vector<T> data);

  const Shape4& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }
  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  void fill(T v);
  bool all_finite() const;

  template <typename U>
  Array4<U> cast() const {
    Array4<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return out;
  }

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

/// Throws ShapeError with `what` prefixed when shapes differ.
void require_same_shape(const Shape4& a, const Shape4& b, const char* what);

extern template class Array4<float>;
extern template class Array4<double>;

}  // namespace cfsdcn
