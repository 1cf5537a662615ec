#include "mpep/selection.hpp"

#include <utility>

#include "mpep/errors.hpp"
#include "mpep/fit.hpp"

namespace mpep {

SelectionResult stepwise_select(const StrataDataset &dataset,
                                const ModelConfig &base,
                                const std::vector<CandidateTerm> &candidates,
                                const SamplerConfig &sampler,
                                double improvement) {
  // Rate-model candidates first, then prevalence, each group in declared
  // order.
  std::vector<CandidateTerm> ordered;
  for (const CandidateTerm &c : candidates)
    if (c.target != "prevalence") ordered.push_back(c);
  for (const CandidateTerm &c : candidates)
    if (c.target == "prevalence") ordered.push_back(c);

  SelectionResult result;
  result.selected = base;

  FitResult base_fit = run_fit(dataset, base, sampler);
  if (!base_fit.gate.pass)
    throw convergence_error(
        "base model failed the convergence gate (max R-hat " +
        std::to_string(base_fit.gate.max_rhat) + " on " +
        base_fit.gate.worst_rhat_param + ")");
  result.base_mean_resdev = base_fit.deviance.mean_resdev;
  result.base_pd = base_fit.deviance.pd;
  result.base_dic = base_fit.deviance.dic;
  double current_dic = base_fit.deviance.dic;

  for (const CandidateTerm &candidate : ordered) {
    SelectionStep step;
    step.candidate = candidate;
    const ModelConfig trial = with_candidate(result.selected, candidate);
    try {
      FitResult fit = run_fit(dataset, trial, sampler);
      step.mean_resdev = fit.deviance.mean_resdev;
      step.pd = fit.deviance.pd;
      step.dic = fit.deviance.dic;
      step.delta_dic = fit.deviance.dic - current_dic;
      step.converged = fit.gate.pass && fit.deviance.plugin_finite;
      if (!step.converged)
        step.note = !fit.gate.pass
                        ? "skipped: convergence gate failed (max R-hat " +
                              std::to_string(fit.gate.max_rhat) + ", min ESS " +
                              std::to_string(fit.gate.min_ess) + ")"
                        : "skipped: " + fit.deviance.note;
    } catch (const numerical_error &err) {
      step.note = std::string("skipped: ") + err.what();
    }
    if (step.converged && step.delta_dic <= -improvement) {
      step.retained = true;
      result.selected = trial;
      current_dic = step.dic;
    }
    result.steps.push_back(std::move(step));
  }
  return result;
}

nlohmann::ordered_json selection_trace_json(const SelectionResult &result) {
  nlohmann::ordered_json out;
  out["base"] = {{"mean_resdev", result.base_mean_resdev},
                 {"pd", result.base_pd},
                 {"dic", result.base_dic}};
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const SelectionStep &step : result.steps) {
    nlohmann::ordered_json s;
    s["target"] = step.candidate.target;
    s["term"] = step.candidate.term.name();
    s["random"] = step.candidate.random;
    s["converged"] = step.converged;
    s["retained"] = step.retained;
    if (step.converged) {
      s["mean_resdev"] = step.mean_resdev;
      s["pd"] = step.pd;
      s["dic"] = step.dic;
      s["delta_dic"] = step.delta_dic;
    }
    if (!step.note.empty()) s["note"] = step.note;
    steps.push_back(std::move(s));
  }
  out["steps"] = std::move(steps);
  out["selected"] = config_to_json(result.selected);
  return out;
}

}  // namespace mpep
