#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpep/model.hpp"
#include "mpep/params.hpp"
#include "mpep/sampler.hpp"

namespace mpep {

// Post-warmup draws of every chain plus the labels and reporting transforms
// needed to interpret them.  Draws are stored on the unconstrained scale;
// accessors apply the per-parameter transform.
class PosteriorDraws {
 public:
  std::vector<std::string> names;
  std::vector<Xform> xforms;
  int dim = 0;
  int n_draws = 0;                          // per chain
  std::vector<std::vector<double>> chains;  // per chain, n_draws * dim

  // Per-chain sampler metadata.
  std::vector<long long> divergences;
  std::vector<long long> max_depth_hits;
  std::vector<double> step_sizes;
  std::vector<double> accept_rates;
  std::vector<std::vector<double>> inv_metrics;

  int n_chains() const { return static_cast<int>(chains.size()); }
  long long total_draws() const {
    return static_cast<long long>(n_chains()) * n_draws;
  }
  long long total_divergences() const;

  double unconstrained(int chain, int draw, int param) const {
    return chains[chain][static_cast<std::size_t>(draw) * dim + param];
  }
  double reported(int chain, int draw, int param) const {
    return apply_xform(xforms[param], unconstrained(chain, draw, param));
  }

  // One series per chain, on the reporting scale.
  std::vector<std::vector<double>> reported_series(int param) const;
  // Posterior mean of every coordinate on the unconstrained scale.
  std::vector<double> unconstrained_mean() const;
};

PosteriorDraws collect_draws(const ParameterIndex &index,
                             const SampleResult &result);

// Derived quantities evaluated at every draw: per chain, a flat
// n_draws x n_derived matrix in the model's derived-name order.
std::vector<std::vector<double>> compute_derived(const Model &model,
                                                 const PosteriorDraws &draws);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  double rhat = 0.0;
  double ess = 0.0;
};

// Equal-tailed quantile of a sorted sample (linear interpolation).
double sorted_quantile(const std::vector<double> &sorted, double p);

SummaryRow summarize_series(const std::string &name,
                            const std::vector<std::vector<double>> &series);

// Parameter rows in index order.
std::vector<SummaryRow> summarize_parameters(const PosteriorDraws &draws);
// Parameter rows followed by derived rows (stratum prevalences and sizes,
// then yearly totals aggregated draw-wise before quantiles).
std::vector<SummaryRow> summarize(const Model &model,
                                  const PosteriorDraws &draws);

// The run-level convergence gate over all sampled parameters.
struct ConvergenceReport {
  bool pass = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::string worst_rhat_param;
  std::string worst_ess_param;
  double rhat_limit = 0.0;
  double ess_floor = 0.0;
};

ConvergenceReport convergence_gate(const std::vector<SummaryRow> &params,
                                   double rhat_limit = 1.05,
                                   double ess_floor = 400.0);

void write_draws_csv(const std::string &path, const PosteriorDraws &draws);
void write_summary_csv(const std::string &path,
                       const std::vector<SummaryRow> &rows);

}  // namespace mpep
