#pragma once

#include <cstdint>

namespace cfsdcn::detail {

// Every caller partitions work so that each index writes a disjoint slice of
// the output and reduces in a fixed order. Results are therefore identical for
// any thread count.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
#if defined(CFSDCN_HAVE_OPENMP)
#pragma omp parallel for schedule(static) if (count > 1)
  for (std::int64_t i = 0; i < count; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < count; ++i) fn(i);
#endif
}

}  // namespace cfsdcn::detail
