#include "mpep/fit.hpp"

#include <utility>

namespace mpep {

FitResult run_fit(StrataDataset dataset, ModelConfig config,
                  const SamplerConfig &sampler) {
  FitResult fit;
  fit.model = std::make_unique<Model>(std::move(dataset), std::move(config));
  ModelDensity density(*fit.model);
  const SampleResult sample =
      run_chains(density, sampler,
                 uniform_init(density.dim(), sampler.init_jitter));
  fit.draws = collect_draws(fit.model->index(), sample);
  fit.param_rows = summarize_parameters(fit.draws);
  fit.gate = convergence_gate(fit.param_rows);
  fit.deviance = residual_deviance(*fit.model, fit.draws);
  return fit;
}

std::vector<std::string> fit_warnings(const FitResult &fit) {
  std::vector<std::string> warnings;
  const long long total = fit.draws.total_draws();
  const long long divergent = fit.draws.total_divergences();
  if (total > 0 && divergent * 100 > total)
    warnings.push_back(std::to_string(divergent) + " of " +
                       std::to_string(total) +
                       " post-warmup iterations diverged (> 1%)");
  long long depth_hits = 0;
  for (long long h : fit.draws.max_depth_hits) depth_hits += h;
  if (depth_hits > 0)
    warnings.push_back(std::to_string(depth_hits) +
                       " iterations hit the maximum tree depth");
  if (fit.model->floored_ne_count() > 0)
    warnings.push_back("extra population smaller than pre-death time in " +
                       std::to_string(fit.model->floored_ne_count()) +
                       " evaluations (floored)");
  if (fit.model->prev_sum_ge1_count() > 0)
    warnings.push_back("cohort plus extra prevalence reached 1 in " +
                       std::to_string(fit.model->prev_sum_ge1_count()) +
                       " evaluations");
  if (!fit.deviance.plugin_finite) warnings.push_back(fit.deviance.note);
  return warnings;
}

}  // namespace mpep
