#include "mpep/families.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mpep/errors.hpp"

namespace mpep {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

void check_domain(long long x, double mu, Family f, double theta, double pi) {
  if (x < 0) throw std::invalid_argument("count must be >= 0");
  if (!(mu >= 0.0)) throw std::invalid_argument("mu must be >= 0");
  if (family_has_theta(f) && !(theta > 0.0))
    throw std::invalid_argument("theta must be > 0");
  if (family_has_pi(f) && !(pi >= 0.0 && pi < 1.0))
    throw std::invalid_argument("pi must be in [0, 1)");
}

double log_poisson(long long x, double mu) {
  if (mu == 0.0) return x == 0 ? 0.0 : neg_inf;
  return static_cast<double>(x) * std::log(mu) - mu - std::lgamma(static_cast<double>(x) + 1.0);
}

// log (theta / (theta + mu))^theta, stable for large theta.
double log_p0_nb(double mu, double theta) { return -theta * std::log1p(mu / theta); }

double log_nb(long long x, double mu, double theta) {
  if (mu == 0.0) return x == 0 ? 0.0 : neg_inf;
  const double xd = static_cast<double>(x);
  return std::lgamma(xd + theta) - std::lgamma(theta) - std::lgamma(xd + 1.0) +
         log_p0_nb(mu, theta) + xd * (std::log(mu) - std::log(theta + mu));
}

double log_sum_exp(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log(pi + (1 - pi) * exp(log_p0)); exact passthrough when pi == 0 so the
// inflated families reduce to their base family bit for bit.
double log_zero_mix(double pi, double log_p0) {
  if (pi == 0.0) return log_p0;
  return log_sum_exp(std::log(pi), std::log1p(-pi) + log_p0);
}

}  // namespace

bool family_has_theta(Family f) { return f == Family::nb || f == Family::zinb; }
bool family_has_pi(Family f) { return f == Family::zip || f == Family::zinb; }

Family family_from_string(const std::string &name) {
  if (name == "poisson") return Family::poisson;
  if (name == "nb") return Family::nb;
  if (name == "zip") return Family::zip;
  if (name == "zinb") return Family::zinb;
  throw validation_error("unknown likelihood family '" + name +
                         "' (expected poisson, nb, zip, or zinb)");
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::poisson: return "poisson";
    case Family::nb: return "nb";
    case Family::zip: return "zip";
    case Family::zinb: return "zinb";
  }
  return "?";
}

double log_lik_count(long long x, double mu, Family f, double theta, double pi) {
  check_domain(x, mu, f, theta, pi);
  switch (f) {
    case Family::poisson:
      return log_poisson(x, mu);
    case Family::nb:
      return log_nb(x, mu, theta);
    case Family::zip:
      if (x == 0) return log_zero_mix(pi, -mu);
      return (pi == 0.0 ? 0.0 : std::log1p(-pi)) + log_poisson(x, mu);
    case Family::zinb:
      if (x == 0) return log_zero_mix(pi, log_p0_nb(mu, theta));
      return (pi == 0.0 ? 0.0 : std::log1p(-pi)) + log_nb(x, mu, theta);
  }
  return neg_inf;
}

double log_lik_count_grad(long long x, double mu, Family f, double theta,
                          double pi, CountGrad &grad) {
  check_domain(x, mu, f, theta, pi);
  if (!(mu > 0.0)) throw std::invalid_argument("gradient requires mu > 0");
  const double xd = static_cast<double>(x);
  grad = CountGrad{};
  switch (f) {
    case Family::poisson: {
      grad.d_mu = xd / mu - 1.0;
      return log_poisson(x, mu);
    }
    case Family::nb: {
      grad.d_mu = xd / mu - (xd + theta) / (theta + mu);
      grad.d_theta = digamma(xd + theta) - digamma(theta) -
                     std::log1p(mu / theta) + 1.0 - (xd + theta) / (theta + mu);
      return log_nb(x, mu, theta);
    }
    case Family::zip: {
      if (x == 0) {
        const double p0 = std::exp(-mu);
        const double denom = pi + (1.0 - pi) * p0;
        grad.d_mu = -(1.0 - pi) * p0 / denom;
        grad.d_pi = (1.0 - p0) / denom;
        return log_zero_mix(pi, -mu);
      }
      grad.d_mu = xd / mu - 1.0;
      grad.d_pi = -1.0 / (1.0 - pi);
      return (pi == 0.0 ? 0.0 : std::log1p(-pi)) + log_poisson(x, mu);
    }
    case Family::zinb: {
      if (x == 0) {
        const double lp0 = log_p0_nb(mu, theta);
        const double p0 = std::exp(lp0);
        const double denom = pi + (1.0 - pi) * p0;
        grad.d_mu = -(1.0 - pi) * p0 * theta / ((theta + mu) * denom);
        grad.d_theta =
            (1.0 - pi) * p0 * (-std::log1p(mu / theta) + mu / (theta + mu)) / denom;
        grad.d_pi = (1.0 - p0) / denom;
        return log_zero_mix(pi, lp0);
      }
      CountGrad nb_grad;
      const double ll = log_lik_count_grad(x, mu, Family::nb, theta, 0.0, nb_grad);
      grad.d_mu = nb_grad.d_mu;
      grad.d_theta = nb_grad.d_theta;
      grad.d_pi = -1.0 / (1.0 - pi);
      return (pi == 0.0 ? 0.0 : std::log1p(-pi)) + ll;
    }
  }
  return neg_inf;
}

double resdev_contribution(long long x, double mu, Family f, double theta, double pi) {
  check_domain(x, mu, f, theta, pi);
  const double xd = static_cast<double>(x);
  double dev = 0.0;
  switch (f) {
    case Family::poisson:
      dev = x == 0 ? 2.0 * mu : 2.0 * (xd * std::log(xd / mu) + mu - xd);
      break;
    case Family::nb:
      dev = x == 0 ? 2.0 * theta * std::log1p(mu / theta)
                   : 2.0 * (xd * std::log(xd / mu) +
                            (theta + xd) * std::log((theta + mu) / (theta + xd)));
      break;
    case Family::zip:
      dev = x == 0 ? -2.0 * log_zero_mix(pi, -mu)
                   : 2.0 * (xd * std::log(xd / mu) + mu - xd);
      break;
    case Family::zinb:
      dev = x == 0 ? -2.0 * log_zero_mix(pi, log_p0_nb(mu, theta))
                   : 2.0 * (xd * std::log(xd / mu) +
                            (theta + xd) * std::log((theta + mu) / (theta + xd)));
      break;
  }
  // Analytically >= 0; absorb rounding at the mu == x minimum.
  return dev < 0.0 ? 0.0 : dev;
}

double digamma(double x) {
  // Recurrence up to the asymptotic regime, then the standard expansion.
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return result;
}

}  // namespace mpep
