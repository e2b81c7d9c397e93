#include "cfsdcn/array.hpp"

#include <algorithm>
#include <cmath>

namespace cfsdcn {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
Array4<T>::Array4(Shape4 shape, T fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative dimension in shape " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

template <typename T>
Array4<T>::Array4(Shape4 shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("buffer of " + std::to_string(data_.size()) +
                     " values does not match shape " + shape_.str());
  }
}

template <typename T>
void Array4<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Array4<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T v) { return std::isfinite(v); });
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape " + a.str() +
                     " does not match " + b.str());
  }
}

template class Array4<float>;
template class Array4<double>;

}  // namespace cfsdcn
