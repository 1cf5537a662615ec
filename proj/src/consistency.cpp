#include "mpep/consistency.hpp"

#include <algorithm>

#include "mpep/errors.hpp"
#include "mpep/rng.hpp"

namespace mpep {

namespace {

std::uint64_t fnv1a_bytes(const void *data, std::size_t size,
                          std::uint64_t hash) {
  const unsigned char *bytes = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::uint64_t content_hash(const std::vector<std::vector<double>> &draws) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const auto &unit : draws)
    hash = fnv1a_bytes(unit.data(), unit.size() * sizeof(double), hash);
  return hash;
}

// Fisher-Yates permutation of 0..n-1 from the fit's own stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                          std::uint64_t stream) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed, stream);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

double two_tailed_pvalue(const std::vector<double> &delta) {
  if (delta.empty()) throw validation_error("p-value of an empty draw set");
  std::size_t positive = 0;
  for (double d : delta) positive += d > 0.0 ? 1 : 0;
  // Computed from the counts so that negating every delta (swapping the
  // sources) gives the exact same value.
  const std::size_t smaller = std::min(positive, delta.size() - positive);
  return 2.0 * static_cast<double>(smaller) / static_cast<double>(delta.size());
}

ConsistencyResult consistency_pvalue(
    const std::vector<std::vector<double>> &draws_a,
    const std::vector<std::vector<double>> &draws_b,
    const std::vector<std::string> &units, std::uint64_t seed) {
  if (draws_a.size() != units.size() || draws_b.size() != units.size())
    throw validation_error("consistency inputs disagree on aggregation units");
  if (units.empty())
    throw validation_error("consistency requires at least one unit");
  const std::size_t n_a = draws_a.front().size();
  const std::size_t n_b = draws_b.front().size();
  for (const auto &unit : draws_a)
    if (unit.size() != n_a)
      throw validation_error("fit A units have unequal draw counts");
  for (const auto &unit : draws_b)
    if (unit.size() != n_b)
      throw validation_error("fit B units have unequal draw counts");
  const std::size_t n = std::min(n_a, n_b);
  if (n == 0) throw validation_error("consistency requires non-empty draws");

  // One permutation per fit, shared by all units so each fit's joint draw
  // structure is preserved.
  const auto perm_a = shuffled_indices(n_a, seed, content_hash(draws_a));
  const auto perm_b = shuffled_indices(n_b, seed, content_hash(draws_b));

  ConsistencyResult result;
  for (std::size_t u = 0; u < units.size(); ++u) {
    ConsistencyUnit unit;
    unit.unit = units[u];
    unit.delta.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      unit.delta[j] = draws_a[u][perm_a[j]] - draws_b[u][perm_b[j]];
    std::size_t positive = 0;
    for (double d : unit.delta) positive += d > 0.0 ? 1 : 0;
    unit.pr_positive = static_cast<double>(positive) / static_cast<double>(n);
    unit.p_value = two_tailed_pvalue(unit.delta);
    result.units.push_back(std::move(unit));
  }
  return result;
}

}  // namespace mpep
