#pragma once

#include <atomic>
#include <limits>
#include <string>
#include <vector>

#include "mpep/config.hpp"
#include "mpep/design.hpp"
#include "mpep/params.hpp"
#include "mpep/parallel.hpp"
#include "mpep/rng.hpp"
#include "mpep/strata.hpp"

namespace mpep {

// One count data point: observed count, fitted expectation, and the family
// parameters it was evaluated under.
struct PointRecord {
  long long x = 0;
  double mu = 0.0;
  double theta = 1.0;
  double pi = 0.0;
  Family family = Family::poisson;
  double log_lik = 0.0;
};

struct EvalResult {
  double log_post = -std::numeric_limits<double>::infinity();
  double log_lik = 0.0;  // data likelihood including the binomial cohort terms
};

// Joint posterior of the full model: cohort event counts, other-cause exits,
// extra (unlinked) counts, the binomial cohort-size terms, and all priors.
// Immutable and reentrant; chains may evaluate it concurrently.
class Model {
 public:
  Model(StrataDataset dataset, ModelConfig config);

  const StrataDataset &dataset() const { return dataset_; }
  const ModelConfig &config() const { return config_; }
  const Design &design() const { return design_; }
  const ParameterIndex &index() const { return index_; }

  int n_params() const { return index_.size(); }
  int n_strata() const { return static_cast<int>(dataset_.n_strata()); }
  int n_events() const { return static_cast<int>(config_.event_types.size()); }

  // Count data points, enumerated group-major: the on-treatment cohort
  // groups (one per event), the off-treatment groups, other-cause exits,
  // then the extra groups.  Every group has one point per stratum.
  int n_groups() const { return 3 * n_events() + 1; }
  int n_points() const { return n_groups() * n_strata(); }
  const std::vector<std::string> &group_names() const { return group_names_; }

  double log_posterior(const std::vector<double> &q,
                       Exec exec = Exec::parallel) const;
  double log_posterior_grad(const std::vector<double> &q,
                            std::vector<double> &grad,
                            Exec exec = Exec::parallel) const;
  // Full evaluation; fills per-point records when `points` is given.
  EvalResult evaluate(const std::vector<double> &q, Exec exec,
                      std::vector<PointRecord> *points) const;

  // Serial re-walk identifying the first non-finite contribution.
  std::string explain_nonfinite(const std::vector<double> &q) const;

  // Draws a starting point: uniform(-jitter, jitter) around zero on the
  // unconstrained scale.
  std::vector<double> initial_point(Rng &rng, double jitter = 1.0) const;

  // Derived quantities per parameter draw: per-stratum Prev_c, Prev_e and N,
  // then per-year N and per-year prevalence.
  const std::vector<std::string> &derived_names() const { return derived_names_; }
  int n_derived() const { return static_cast<int>(derived_names_.size()); }
  void derived_quantities(const std::vector<double> &q, double *out) const;
  // Offsets into the derived vector.
  int derived_year_n_offset() const { return 3 * n_strata(); }
  int derived_year_prev_offset() const { return 3 * n_strata() + n_years(); }
  int n_years() const { return dataset_.header.n_year(); }

  // Soft-handling counters accumulated across evaluations (run reporting).
  long long floored_ne_count() const { return floored_ne_.load(); }
  long long prev_sum_ge1_count() const { return prev_sum_ge1_.load(); }

 private:
  double eval_core(const double *q, double *grad, PointRecord *points,
                   double *log_lik_out, Exec exec) const;
  double log_priors(const double *q, double *grad) const;

  StrataDataset dataset_;
  ModelConfig config_;
  Design design_;
  ParameterIndex index_;
  std::vector<std::string> group_names_;
  std::vector<std::string> derived_names_;
  std::vector<double> binom_const_;        // per stratum log C(P, n_c)
  std::vector<std::vector<int>> bias_param_;  // [event][stratum] -> index or -1
  std::vector<double> year_population_;    // per year sum of P
  mutable std::atomic<long long> floored_ne_{0};
  mutable std::atomic<long long> prev_sum_ge1_{0};
};

}  // namespace mpep
