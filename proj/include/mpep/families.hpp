#ifndef MPEP_FAMILIES_HPP
#define MPEP_FAMILIES_HPP

#include <string>

namespace mpep {

// Count likelihood families for the event sub-models.  `theta` is the
// negative-binomial dispersion (variance mu + mu^2/theta), `pi` the
// zero-inflation probability; each is read only where the family uses it.
enum class Family { poisson, nb, zip, zinb };

bool family_has_theta(Family f);
bool family_has_pi(Family f);
Family family_from_string(const std::string &name);
std::string family_to_string(Family f);

// Exact log-density of a count x under the family with expectation
// parameter mu (the count-scale mean of the uninflated component).
double log_lik_count(long long x, double mu, Family f, double theta = 1.0,
                     double pi = 0.0);

struct CountGrad {
  double d_mu = 0.0;
  double d_theta = 0.0;
  double d_pi = 0.0;
};

// Log-density together with its partials in (mu, theta, pi).
double log_lik_count_grad(long long x, double mu, Family f, double theta,
                          double pi, CountGrad &grad);

// Per-point residual deviance, 2 * (saturated - fitted log likelihood).
// The saturated model sets mu = x at the same (theta, pi); its x = 0
// log likelihood is 0 for every family.
double resdev_contribution(long long x, double mu, Family f, double theta = 1.0,
                           double pi = 0.0);

double digamma(double x);

}  // namespace mpep

#endif
