#ifndef MPEP_SURVIVAL_HPP
#define MPEP_SURVIVAL_HPP

#include <cmath>
#include <stdexcept>

namespace mpep {

// Series/closed-form switch for the one-year restricted mean survival time.
inline constexpr double rmst_series_cutoff = 1e-6;
// The derivative's closed form cancels catastrophically for small rates
// (absolute error ~eps/lambda), so its series region is much wider.
inline constexpr double rmst_deriv_series_cutoff = 5e-2;

// Average fraction of a year survived at constant exit hazard `lambda`:
// (1 - exp(-lambda)) / lambda, with the lambda -> 0 limit equal to 1.
inline double rmst(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("rmst: rate must be >= 0");
  if (lambda < rmst_series_cutoff) {
    return 1.0 - lambda / 2.0 + lambda * lambda / 6.0;
  }
  return -std::expm1(-lambda) / lambda;
}

// d rmst / d lambda, continuous across the series switch.
inline double rmst_deriv(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("rmst_deriv: rate must be >= 0");
  if (lambda < rmst_deriv_series_cutoff) {
    // Alternating series k*(-lambda)^(k-1)/(k+1)!; truncation < 2e-14 at the
    // cutoff, where the closed form is already accurate to ~1e-13.
    return -0.5 +
           lambda *
               (1.0 / 3.0 +
                lambda * (-1.0 / 8.0 +
                          lambda * (1.0 / 30.0 +
                                    lambda * (-1.0 / 144.0 +
                                              lambda * (1.0 / 840.0 -
                                                        lambda / 5760.0)))));
  }
  const double e = std::exp(-lambda);
  return (e - (1.0 - e) / lambda) / lambda;
}

// Person-years at risk for an extra population of size `n_e`, of whom the
// aggregate pre-death fraction `t_d` is known, exposed to other-cause exit
// hazard `lambda_o`: t_d + (n_e - t_d) * rmst(lambda_o).  A proposal with
// n_e < t_d floors the second term at zero; callers may count occurrences.
inline double extra_time_at_risk(double n_e, double t_d, double lambda_o,
                                 bool *floored = nullptr) {
  const double remainder = n_e - t_d;
  if (remainder <= 0.0) {
    if (floored != nullptr) *floored = remainder < 0.0;
    return t_d;
  }
  if (floored != nullptr) *floored = false;
  return t_d + remainder * rmst(lambda_o);
}

}  // namespace mpep

#endif
