#include "mpep/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpep {

namespace {

// Inversion for a Poisson mean small enough that exp(-mu) is comfortably
// above the underflow threshold.
long long poisson_small(Rng &rng, double mu) {
  const double u = rng.uniform();
  double p = std::exp(-mu);
  double cdf = p;
  long long k = 0;
  while (u > cdf) {
    ++k;
    p *= mu / static_cast<double>(k);
    cdf += p;
    if (p <= 0.0 && u > cdf) return k;  // ran out of precision in the far tail
  }
  return k;
}

long long binomial_small(Rng &rng, long long n, double p) {
  // pmf recursion from k = 0; caller guarantees n*|log1p(-p)| is moderate.
  const double u = rng.uniform();
  const double odds = p / (1.0 - p);
  double f = std::exp(static_cast<double>(n) * std::log1p(-p));
  double cdf = f;
  long long k = 0;
  while (u > cdf && k < n) {
    ++k;
    f *= odds * static_cast<double>(n - k + 1) / static_cast<double>(k);
    cdf += f;
    if (f <= 0.0 && u > cdf) return k;
  }
  return k;
}

}  // namespace

long long Rng::poisson(double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
  if (mu == 0.0) return 0;
  long long total = 0;
  const double chunk = 500.0;
  while (mu > chunk) {
    total += poisson_small(*this, chunk);
    mu -= chunk;
  }
  return total + poisson_small(*this, mu);
}

long long Rng::binomial(long long n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0) throw std::invalid_argument("binomial: bad arguments");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  // Split n so each chunk's zero-probability stays representable.
  const double per_trial = -std::log1p(-p);
  const long long max_chunk = std::max<long long>(1, static_cast<long long>(500.0 / per_trial));
  long long total = 0;
  while (n > max_chunk) {
    total += binomial_small(*this, max_chunk, p);
    n -= max_chunk;
  }
  return total + binomial_small(*this, n, p);
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma: bad arguments");
  if (shape < 1.0) {
    // Boost to shape + 1 and scale back.
    const double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

}  // namespace mpep
