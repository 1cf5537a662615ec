#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mpep {

// Conflict diagnostic for one aggregation unit (typically a year).
struct ConsistencyUnit {
  std::string unit;
  std::vector<double> delta;  // paired A - B draws
  double pr_positive = 0.0;   // empirical Pr(delta > 0)
  double p_value = 1.0;
};

struct ConsistencyResult {
  std::vector<ConsistencyUnit> units;
};

// Two-tailed tail probability 2 * min{Pr(delta > 0), 1 - Pr(delta > 0)}.
double two_tailed_pvalue(const std::vector<double> &delta);

// Pairs the draws of two independently fitted posteriors after shuffling
// each fit's draw order, then forms delta = A - B per unit.  `draws_a[u]`
// and `draws_b[u]` hold the per-draw values of unit u; units must match.
// Each fit's permutation is derived from the seed and the fit's own draws,
// so swapping the arguments flips the sign of delta and leaves every
// p-value unchanged.
ConsistencyResult consistency_pvalue(
    const std::vector<std::vector<double>> &draws_a,
    const std::vector<std::vector<double>> &draws_b,
    const std::vector<std::string> &units, std::uint64_t seed);

}  // namespace mpep
