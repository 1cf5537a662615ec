#include "mpep/deviance.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mpep/errors.hpp"
#include "mpep/families.hpp"
#include "mpep/parallel.hpp"

namespace mpep {

namespace {

// Per-point residual deviance for one draw, written into `out` (n_points).
void point_resdev(const Model &model, const std::vector<PointRecord> &points,
                  double *out) {
  const int n = model.n_points();
  for (int p = 0; p < n; ++p) {
    const PointRecord &rec = points[p];
    out[p] = resdev_contribution(rec.x, rec.mu, rec.family, rec.theta, rec.pi);
  }
}

}  // namespace

DevianceReport residual_deviance(const Model &model,
                                 const PosteriorDraws &draws, Exec exec) {
  const int n_points = model.n_points();
  const int n_groups = model.n_groups();
  const int per_group = model.n_strata();
  const long long total_draws = draws.total_draws();
  if (total_draws == 0)
    throw validation_error("residual deviance requires at least one draw");

  // Accumulate per-point sums block-by-block over draws; blocks are combined
  // in order so the result does not depend on the thread count.
  const std::size_t nb = par::block_count(static_cast<std::size_t>(total_draws));
  std::vector<std::vector<double>> block_sums(
      nb, std::vector<double>(n_points, 0.0));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
  for (long long b = 0; b < static_cast<long long>(nb); ++b) {
    const auto range = par::block_range(static_cast<std::size_t>(total_draws),
                                        static_cast<std::size_t>(b), nb);
    std::vector<PointRecord> points(n_points);
    std::vector<double> q(draws.dim);
    std::vector<double> dev(n_points);
    for (std::size_t k = range.begin; k < range.end; ++k) {
      const int chain = static_cast<int>(k / draws.n_draws);
      const int iter = static_cast<int>(k % draws.n_draws);
      const double *row = draws.chains[chain].data() +
                          static_cast<std::size_t>(iter) * draws.dim;
      q.assign(row, row + draws.dim);
      model.evaluate(q, Exec::serial, &points);
      point_resdev(model, points, dev.data());
      for (int p = 0; p < n_points; ++p) block_sums[b][p] += dev[p];
    }
  }
  std::vector<double> point_mean(n_points, 0.0);
  for (const auto &block : block_sums)
    for (int p = 0; p < n_points; ++p) point_mean[p] += block[p];
  for (double &v : point_mean) v /= static_cast<double>(total_draws);

  // Plug-in deviance at the unconstrained posterior mean.
  std::vector<PointRecord> plugin_points(n_points);
  std::vector<double> plugin_dev(n_points, 0.0);
  const std::vector<double> q_hat = draws.unconstrained_mean();
  const EvalResult at_mean = model.evaluate(q_hat, exec, &plugin_points);
  DevianceReport report;
  report.n_draws = total_draws;
  report.n_points = n_points;
  if (std::isfinite(at_mean.log_lik)) {
    point_resdev(model, plugin_points, plugin_dev.data());
  } else {
    report.plugin_finite = false;
    report.note = "log likelihood non-finite at the posterior mean; "
                  "pD and DIC are undefined: " +
                  model.explain_nonfinite(q_hat);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int g = 0; g < n_groups; ++g) {
    GroupDeviance group;
    group.name = model.group_names()[g];
    group.n_points = per_group;
    group.point_contributions.assign(
        point_mean.begin() + static_cast<std::ptrdiff_t>(g) * per_group,
        point_mean.begin() + static_cast<std::ptrdiff_t>(g + 1) * per_group);
    for (double v : group.point_contributions) group.mean_resdev += v;
    if (report.plugin_finite) {
      for (int j = 0; j < per_group; ++j)
        group.resdev_at_plugin += plugin_dev[g * per_group + j];
      group.pd = group.mean_resdev - group.resdev_at_plugin;
      group.dic = group.mean_resdev + group.pd;
    } else {
      group.resdev_at_plugin = nan;
      group.pd = nan;
      group.dic = nan;
    }
    report.mean_resdev += group.mean_resdev;
    report.groups.push_back(std::move(group));
  }
  if (report.plugin_finite) {
    for (const GroupDeviance &group : report.groups) {
      report.resdev_at_plugin += group.resdev_at_plugin;
      report.pd += group.pd;
    }
    report.dic = report.mean_resdev + report.pd;
  } else {
    report.resdev_at_plugin = nan;
    report.pd = nan;
    report.dic = nan;
  }
  return report;
}

nlohmann::ordered_json deviance_report_json(const DevianceReport &report) {
  nlohmann::ordered_json out;
  out["n_draws"] = report.n_draws;
  out["n_points"] = report.n_points;
  out["plugin_finite"] = report.plugin_finite;
  if (!report.note.empty()) out["note"] = report.note;
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const GroupDeviance &group : report.groups) {
    nlohmann::ordered_json g;
    g["group"] = group.name;
    g["n_points"] = group.n_points;
    g["mean_resdev"] = group.mean_resdev;
    g["resdev_at_plugin"] = group.resdev_at_plugin;
    g["pd"] = group.pd;
    g["dic"] = group.dic;
    g["point_contributions"] = group.point_contributions;
    groups.push_back(std::move(g));
  }
  out["groups"] = std::move(groups);
  out["total"] = {{"mean_resdev", report.mean_resdev},
                  {"resdev_at_plugin", report.resdev_at_plugin},
                  {"pd", report.pd},
                  {"dic", report.dic}};
  return out;
}

std::string deviance_report_text(const DevianceReport &report) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "sub-model" << std::right
      << std::setw(8) << "points" << std::setw(14) << "mean ResDev"
      << std::setw(10) << "pD" << std::setw(12) << "DIC" << '\n';
  auto line = [&](const std::string &name, int n, double dev, double pd,
                  double dic) {
    out << std::left << std::setw(24) << name << std::right << std::setw(8)
        << n << std::fixed << std::setprecision(1) << std::setw(14) << dev
        << std::setw(10) << pd << std::setw(12) << dic << '\n';
  };
  for (const GroupDeviance &group : report.groups)
    line(group.name, group.n_points, group.mean_resdev, group.pd, group.dic);
  line("total", static_cast<int>(report.n_points), report.mean_resdev,
       report.pd, report.dic);
  if (!report.note.empty()) out << report.note << '\n';
  return out.str();
}

}  // namespace mpep
