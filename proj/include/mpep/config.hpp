#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpep/dataset_io.hpp"
#include "mpep/families.hpp"
#include "mpep/strata.hpp"

namespace mpep {

// Stratification factors usable as regression terms.  Treatment is only
// meaningful inside the cohort, so it is restricted to event-rate regressions.
enum class Factor { treatment = 0, sex, age, year, region };

Factor factor_from_string(const std::string &name);
std::string factor_to_string(Factor f);

// A product of distinct factors: one factor is a main effect, several form an
// interaction.  Dummy columns are products over non-baseline levels.
struct Term {
  std::vector<Factor> factors;

  bool operator==(const Term &other) const = default;
  bool contains(Factor f) const;
  std::string name() const;  // e.g. "year" or "year:treatment"
};

// Fixed terms plus random-effect interaction blocks for one regression.
// Every RE block gets one shared scale with levels exchangeable.
struct RegressionSpec {
  std::vector<Term> fixed;
  std::vector<Term> random;
};

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

struct PriorSettings {
  NormalPrior fixed_effect{0.0, 10.0};   // regression coefficients
  double re_scale_sd = 1.0;              // half-normal scale for RE scales
  NormalPrior log_theta{0.0, 5.0};       // log-dispersion
  NormalPrior logit_pi{-3.0, 2.0};       // logit zero-inflation
  NormalPrior prevc_logit{0.0, 10.0};    // per-stratum logit cohort prevalence
  NormalPrior bias{0.0, 10.0};           // reporting-bias terms
  std::optional<NormalPrior> pmatch_logit;  // required when pmatch is enabled
};

// Selects extra cells whose expectation carries a reporting-bias factor.
// Empty level strings are wildcards; labels are matched against the dataset.
struct BiasCell {
  std::string event;
  std::string sex, age_group, year, region;

  std::string describe() const;
};

struct Extensions {
  bool pmatch_on = false;
  std::vector<BiasCell> bias_cells;
};

// Full model specification: one sub-model per event type, the other-cause
// exit regression, and the extra-prevalence regression.
struct ModelConfig {
  std::vector<std::string> event_types;       // declared order
  std::vector<Family> event_families;         // aligned with event_types
  std::vector<RegressionSpec> event_regressions;
  Family exit_family = Family::poisson;
  RegressionSpec exit_regression;
  RegressionSpec prevalence_regression;
  PriorSettings priors;
  Extensions extensions;
  DatasetLoadOptions dataset_options;

  int event_index(const std::string &name) const;
  // Checks term admissibility: all main effects present, RE blocks involve
  // year or region, treatment confined to event-rate regressions.
  void validate() const;
};

// One step of forward selection: a term to try adding to a regression.
struct CandidateTerm {
  std::string target;  // event-type name, "exit", or "prevalence"
  Term term;
  bool random = false;

  std::string describe() const;
};

ModelConfig config_from_toml(const nlohmann::ordered_json &root,
                             const std::string &source_name);
ModelConfig load_model_config(const std::string &path);
nlohmann::ordered_json config_to_json(const ModelConfig &config);
std::string config_to_toml_text(const ModelConfig &config);

std::vector<CandidateTerm> candidates_from_toml(const nlohmann::ordered_json &root,
                                                const std::string &source_name);
std::vector<CandidateTerm> load_candidates(const std::string &path);

// Applies a retained candidate to a config copy.
ModelConfig with_candidate(const ModelConfig &config, const CandidateTerm &candidate);

}  // namespace mpep
