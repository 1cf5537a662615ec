#ifndef MPEP_PARALLEL_HPP
#define MPEP_PARALLEL_HPP

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpep {

// Execution policy for the numeric kernels.  Both policies walk the same
// fixed block decomposition and combine block results in block order, so
// results are bit-identical regardless of policy or thread count.
enum class Exec { serial, parallel };

namespace par {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Fixed block count for deterministic reductions.  Independent of the
// number of threads: only the work distribution changes with threads,
// never the summation tree.
inline std::size_t block_count(std::size_t n) {
  const std::size_t max_blocks = 64;
  return n < max_blocks ? (n > 0 ? n : 1) : max_blocks;
}

struct BlockRange {
  std::size_t begin, end;
};

inline BlockRange block_range(std::size_t n, std::size_t block, std::size_t n_blocks) {
  const std::size_t base = n / n_blocks, rem = n % n_blocks;
  const std::size_t begin = block * base + (block < rem ? block : rem);
  return {begin, begin + base + (block < rem ? 1 : 0)};
}

// Deterministic blocked reduction: fn(block, begin, end) returns the partial
// sum over [begin, end); partials are combined in block order.
template <class Fn>
double blocked_sum(std::size_t n, Exec exec, Fn &&fn) {
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
  for (long long b = 0; b < static_cast<long long>(nb); ++b) {
    const auto r = block_range(n, static_cast<std::size_t>(b), nb);
    partial[static_cast<std::size_t>(b)] =
        fn(static_cast<int>(b), static_cast<int>(r.begin),
           static_cast<int>(r.end));
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

// Plain parallel loop over [0, n) with independent iterations.
template <class Fn>
void parallel_for(std::size_t n, Exec exec, Fn &&fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
}

}  // namespace par
}  // namespace mpep

#endif
