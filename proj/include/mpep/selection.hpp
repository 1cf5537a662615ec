#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpep/config.hpp"
#include "mpep/sampler.hpp"
#include "mpep/strata.hpp"

namespace mpep {

// One candidate evaluation in the forward-selection pass.
struct SelectionStep {
  CandidateTerm candidate;
  bool converged = false;
  bool retained = false;
  double mean_resdev = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  double delta_dic = 0.0;  // against the model selected so far
  std::string note;        // set when the fit was skipped
};

struct SelectionResult {
  ModelConfig selected;
  double base_mean_resdev = 0.0;
  double base_pd = 0.0;
  double base_dic = 0.0;
  std::vector<SelectionStep> steps;
};

// Forward selection: candidates are tried in declared order, except that
// event-rate and exit candidates all precede prevalence candidates (the
// rate structures are settled first, then held while the prevalence
// regression is selected).  A candidate is retained when the fit's
// mean residual deviance + pD drops by at least `improvement` points; a
// fit that fails to converge is skipped and flagged, never retained.
SelectionResult stepwise_select(const StrataDataset &dataset,
                                const ModelConfig &base,
                                const std::vector<CandidateTerm> &candidates,
                                const SamplerConfig &sampler,
                                double improvement = 3.0);

nlohmann::ordered_json selection_trace_json(const SelectionResult &result);

}  // namespace mpep
