#pragma once

#include <cstddef>

namespace cfsdcn::detail {

// Fixed-order reductions with eight independent lanes. The lane split lets
// the compiler vectorize without reassociation flags while keeping results
// independent of thread count and identical run to run.
inline constexpr std::size_t kLanes = 8;

template <typename T>
T combine_lanes(const T (&lane)[kLanes]) {
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) lane[j] += a[i + j] * b[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return combine_lanes(lane) + tail;
}

// sum_i a[i] * b[i * stride]
template <typename T>
T dot_strided(const T* a, const T* b, std::size_t n, std::size_t stride) {
  if (stride == 1) return dot(a, b, n);
  T lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) lane[j] += a[i + j] * b[(i + j) * stride];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i * stride];
  return combine_lanes(lane) + tail;
}

template <typename T>
T sum(const T* a, std::size_t n) {
  T lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) lane[j] += a[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i];
  return combine_lanes(lane) + tail;
}

}  // namespace cfsdcn::detail
