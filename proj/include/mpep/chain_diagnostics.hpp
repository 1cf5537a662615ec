#pragma once

#include <vector>

namespace mpep {

// Convergence diagnostics for one parameter's draws across chains.
// `chains` holds one equal-length series per chain.

// Rank-normalized split R-hat: the maximum of the bulk statistic and the
// folded (median-absolute-deviation) statistic.  A chain with zero variance
// is flagged as +infinity.
double rhat(const std::vector<std::vector<double>> &chains);

// Bulk effective sample size: rank-normalized split chains, combined
// autocovariance, Geyer initial-monotone-positive-sequence truncation.
// A constant parameter yields 0.
double ess_bulk(const std::vector<std::vector<double>> &chains);

// Standard normal quantile function.
double inv_phi(double p);

}  // namespace mpep
