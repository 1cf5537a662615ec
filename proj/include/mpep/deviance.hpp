#pragma once

#include <string>
#include <vector>

#include "mpep/draws.hpp"
#include "mpep/model.hpp"
#include <nlohmann/json.hpp>

namespace mpep {

// Deviance breakdown for one count sub-model (an on/off-treatment event
// group, the other-cause exits, or an extra-count group).
struct GroupDeviance {
  std::string name;
  int n_points = 0;
  double mean_resdev = 0.0;       // posterior mean of the summed deviance
  double resdev_at_plugin = 0.0;  // at the unconstrained posterior mean
  double pd = 0.0;                // mean_resdev - resdev_at_plugin
  double dic = 0.0;               // mean_resdev + pd
  std::vector<double> point_contributions;  // posterior mean per data point
};

// Table-shaped report over the count sub-models.  The binomial cohort-size
// terms carry no saturated-deviance convention here and are excluded.
struct DevianceReport {
  std::vector<GroupDeviance> groups;
  double mean_resdev = 0.0;
  double resdev_at_plugin = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  long long n_points = 0;
  long long n_draws = 0;
  // When false the plug-in log likelihood was non-finite: pd and dic are
  // NaN and `note` explains why.
  bool plugin_finite = true;
  std::string note;
};

// Posterior mean residual deviance per data point and group, plus the
// effective parameter count pD = 2(l(theta-hat) - mean l) computed as the
// deviance drop at the plug-in, and DIC = mean ResDev + pD (the deviance is
// measured against the saturated model throughout).
DevianceReport residual_deviance(const Model &model, const PosteriorDraws &draws,
                                 Exec exec = Exec::parallel);

nlohmann::ordered_json deviance_report_json(const DevianceReport &report);
// Aligned text table: one row per sub-model plus a totals row.
std::string deviance_report_text(const DevianceReport &report);

}  // namespace mpep
