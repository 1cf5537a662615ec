#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpep/config.hpp"
#include "mpep/params.hpp"
#include "mpep/strata.hpp"

namespace mpep {

// Factor layout and person-time conventions of a generated dataset.  Level
// name lists are optional; empty lists get generated names (a1.., y1.., r1..).
struct SyntheticShape {
  std::vector<std::string> age_levels;
  std::vector<std::string> year_levels;
  std::vector<std::string> region_levels;
  int n_age = 3;
  int n_year = 3;
  int n_region = 2;

  // Stratum population: one shared value or one per stratum (canonical order).
  std::vector<long long> population{50000};
  // Cohort person-time: each cohort member contributes one person-year,
  // split t_on = share * n_c unless fixed person-times are given (>= 0).
  double t_on_share = 0.35;
  double fixed_t_on = -1.0;
  double fixed_t_off = -1.0;
};

// Draws a full dataset from known parameter values (unconstrained scale, in
// ParameterIndex order): n_c ~ Binomial(P, Prev^c), cohort and exit counts at
// the implied rates, extra counts at the extra-population time at risk with
// the pre-death time fed back from the drawn death count.  Deterministic
// given the seed: one RNG stream, strata in canonical order.
StrataDataset generate_synthetic(const ModelConfig &config,
                                 const SyntheticShape &shape,
                                 const std::vector<double> &truth,
                                 std::uint64_t seed);

// Truth-file plumbing: shape plus a complete parameter vector from JSON.
// Recognized keys: shape {age, year, region}, population (number or array),
// t_on_share, t_on, t_off, params {name: value}, broadcast keys
// prevc_logit_all / bias_all / re_raw_all / re_log_scale_all, and
// zero_unset (unlisted parameters default to 0 instead of erroring).
// Explicit level lists in the config's [dataset] section override the shape.
SyntheticShape shape_from_json(const nlohmann::json &truth,
                               const ModelConfig &config);
std::vector<double> truth_vector_from_json(const nlohmann::json &truth,
                                           const ParameterIndex &index);
StrataDataset generate_synthetic_json(const ModelConfig &config,
                                      const nlohmann::json &truth,
                                      std::uint64_t seed);

}  // namespace mpep
