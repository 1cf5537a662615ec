#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mpep/deviance.hpp"
#include "mpep/draws.hpp"
#include "mpep/model.hpp"
#include "mpep/sampler.hpp"

namespace mpep {

// Sampler-facing view of a model posterior.  The inner evaluation policy is
// serial by default because chains already run in parallel.
class ModelDensity : public LogDensity {
 public:
  explicit ModelDensity(const Model &model, Exec exec = Exec::serial)
      : model_(model), exec_(exec) {}
  int dim() const override { return model_.n_params(); }
  double value_grad(const std::vector<double> &q,
                    std::vector<double> &grad) const override {
    return model_.log_posterior_grad(q, grad, exec_);
  }

 private:
  const Model &model_;
  Exec exec_;
};

// One complete posterior fit with its standard post-processing.
struct FitResult {
  std::unique_ptr<Model> model;
  PosteriorDraws draws;
  std::vector<SummaryRow> param_rows;  // parameters only
  ConvergenceReport gate;
  DevianceReport deviance;
};

FitResult run_fit(StrataDataset dataset, ModelConfig config,
                  const SamplerConfig &sampler);

// Run-report warnings: the post-warmup divergence share (flagged above 1%),
// tree-depth saturation, and the model's soft-handling counters.
std::vector<std::string> fit_warnings(const FitResult &fit);

}  // namespace mpep
