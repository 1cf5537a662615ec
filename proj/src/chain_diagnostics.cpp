#include "mpep/chain_diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mpep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Split every chain into halves; the middle draw is dropped when the length
// is odd so both halves match.
std::vector<std::vector<double>> split_chains(
    const std::vector<std::vector<double>> &chains) {
  std::vector<std::vector<double>> out;
  out.reserve(2 * chains.size());
  for (const auto &c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Pooled average ranks (ties share the mean rank), mapped through the normal
// quantile with the (r - 3/8) / (S + 1/4) offset.
std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>> &seqs) {
  struct Entry {
    double value;
    std::size_t seq;
    std::size_t idx;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
  for (const auto &s : seqs) total += s.size();
  entries.reserve(total);
  for (std::size_t m = 0; m < seqs.size(); ++m)
    for (std::size_t i = 0; i < seqs[m].size(); ++i)
      entries.push_back({seqs[m][i], m, i});
  std::sort(entries.begin(), entries.end(),
            [](const Entry &a, const Entry &b) { return a.value < b.value; });

  std::vector<std::vector<double>> out(seqs.size());
  for (std::size_t m = 0; m < seqs.size(); ++m) out[m].resize(seqs[m].size());

  const double denom = static_cast<double>(total) + 0.25;
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].value == entries[i].value) ++j;
    // Average of 1-based ranks i+1 .. j.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    const double z = inv_phi((rank - 0.375) / denom);
    for (std::size_t k = i; k < j; ++k)
      out[entries[k].seq][entries[k].idx] = z;
    i = j;
  }
  return out;
}

double pooled_median(const std::vector<std::vector<double>> &seqs) {
  std::vector<double> all;
  for (const auto &s : seqs) all.insert(all.end(), s.begin(), s.end());
  if (all.empty()) throw std::invalid_argument("median of empty draw set");
  std::sort(all.begin(), all.end());
  const std::size_t n = all.size();
  if (n % 2 == 1) return all[n / 2];
  return 0.5 * (all[n / 2 - 1] + all[n / 2]);
}

struct SeqMoments {
  std::vector<double> means;
  std::vector<double> vars;  // unbiased per-sequence variances
  double w = 0.0;            // mean within-sequence variance
  double var_means = 0.0;    // unbiased variance of sequence means
};

SeqMoments sequence_moments(const std::vector<std::vector<double>> &seqs) {
  SeqMoments mo;
  for (const auto &s : seqs) {
    const double n = static_cast<double>(s.size());
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    mo.means.push_back(mean);
    mo.vars.push_back(n > 1 ? ss / (n - 1.0) : 0.0);
  }
  const double m = static_cast<double>(seqs.size());
  mo.w = std::accumulate(mo.vars.begin(), mo.vars.end(), 0.0) / m;
  if (seqs.size() > 1) {
    const double grand =
        std::accumulate(mo.means.begin(), mo.means.end(), 0.0) / m;
    double ss = 0.0;
    for (double mu : mo.means) ss += (mu - grand) * (mu - grand);
    mo.var_means = ss / (m - 1.0);
  }
  return mo;
}

// Classic split R-hat on already-prepared sequences: sqrt(var_plus / W).
double basic_rhat(const std::vector<std::vector<double>> &seqs) {
  const std::size_t len = seqs.front().size();
  const SeqMoments mo = sequence_moments(seqs);
  if (!(mo.w > 0.0)) return kInf;
  const double n = static_cast<double>(len);
  const double var_plus = (n - 1.0) / n * mo.w + mo.var_means;
  return std::sqrt(var_plus / mo.w);
}

// Biased (1/n) autocovariance of one sequence at the given lag.
double autocov(const std::vector<double> &seq, double mean, std::size_t lag) {
  const std::size_t n = seq.size();
  if (lag >= n) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i)
    sum += (seq[i] - mean) * (seq[i + lag] - mean);
  return sum / static_cast<double>(n);
}

// Combined-chain ESS with Geyer's initial monotone positive sequence.
double ess_sequences(const std::vector<std::vector<double>> &seqs) {
  const std::size_t m = seqs.size();
  const std::size_t len = seqs.front().size();
  if (len < 4) return 0.0;
  const SeqMoments mo = sequence_moments(seqs);
  const double n = static_cast<double>(len);
  const double var_plus = (n - 1.0) / n * mo.w + mo.var_means;
  if (!(var_plus > 0.0)) return 0.0;

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c)
      acov += autocov(seqs[c], mo.means[c], lag);
    acov /= static_cast<double>(m);
    return 1.0 - (mo.w - acov) / var_plus;
  };

  // Sum paired correlations Gamma_k = rho(2k) + rho(2k+1) while positive,
  // enforcing the monotone decrease of the initial sequence.
  double tau = 0.0;
  double prev_gamma = kInf;
  for (std::size_t k = 0; 2 * k + 1 < len - 2; ++k) {
    double gamma = rho(2 * k) + rho(2 * k + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev_gamma);
    tau += 2.0 * gamma;
    prev_gamma = gamma;
  }
  tau -= 1.0;  // rho(0) = 1 is counted twice by the pairing
  if (!(tau > 0.0)) return 0.0;
  const double total = static_cast<double>(m) * n;
  return total / tau;
}

bool has_constant_chain(const std::vector<std::vector<double>> &chains) {
  for (const auto &c : chains) {
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    if (*lo == *hi) return true;
  }
  return false;
}

void check_input(const std::vector<std::vector<double>> &chains) {
  if (chains.empty()) throw std::invalid_argument("no chains supplied");
  const std::size_t len = chains.front().size();
  if (len < 4) throw std::invalid_argument("chains too short for diagnostics");
  for (const auto &c : chains)
    if (c.size() != len)
      throw std::invalid_argument("chains have unequal lengths");
}

}  // namespace

double inv_phi(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::invalid_argument("inv_phi: probability outside [0, 1]");
  }
  // Safeguarded Newton iteration on the normal CDF; the bracket shrinks with
  // every evaluation so convergence is guaranteed.
  double lo = -40.0, hi = 40.0, x = 0.0;
  const double inv_sqrt_2pi = 0.3989422804014326779;
  for (int it = 0; it < 200; ++it) {
    const double f = normal_cdf(x);
    if (f < p)
      lo = x;
    else
      hi = x;
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
    double next = pdf > 0.0 ? x - (f - p) / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

double rhat(const std::vector<std::vector<double>> &chains) {
  check_input(chains);
  if (has_constant_chain(chains)) return kInf;
  const auto split = split_chains(chains);

  const double bulk = basic_rhat(rank_normalize(split));

  const double med = pooled_median(split);
  std::vector<std::vector<double>> folded = split;
  for (auto &s : folded)
    for (double &v : s) v = std::abs(v - med);
  const double tail = basic_rhat(rank_normalize(folded));

  return std::max(bulk, tail);
}

double ess_bulk(const std::vector<std::vector<double>> &chains) {
  check_input(chains);
  bool constant = true;
  const double first = chains.front().front();
  for (const auto &c : chains)
    for (double v : c)
      if (v != first) {
        constant = false;
        break;
      }
  if (constant) return 0.0;
  return ess_sequences(rank_normalize(split_chains(chains)));
}

}  // namespace mpep
