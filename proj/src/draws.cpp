#include "mpep/draws.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mpep/chain_diagnostics.hpp"
#include "mpep/errors.hpp"
#include "mpep/text.hpp"

namespace mpep {

long long PosteriorDraws::total_divergences() const {
  return std::accumulate(divergences.begin(), divergences.end(), 0LL);
}

std::vector<std::vector<double>> PosteriorDraws::reported_series(
    int param) const {
  std::vector<std::vector<double>> out(chains.size());
  for (int c = 0; c < n_chains(); ++c) {
    out[c].resize(n_draws);
    for (int i = 0; i < n_draws; ++i) out[c][i] = reported(c, i, param);
  }
  return out;
}

std::vector<double> PosteriorDraws::unconstrained_mean() const {
  std::vector<double> mean(dim, 0.0);
  for (const auto &chain : chains)
    for (std::size_t i = 0; i < chain.size(); ++i)
      mean[i % dim] += chain[i];
  const double total = static_cast<double>(total_draws());
  for (double &v : mean) v /= total;
  return mean;
}

PosteriorDraws collect_draws(const ParameterIndex &index,
                             const SampleResult &result) {
  PosteriorDraws out;
  out.names = index.names();
  out.dim = index.size();
  out.xforms.resize(out.dim);
  for (int i = 0; i < out.dim; ++i) out.xforms[i] = index.xform(i);

  for (const ChainResult &chain : result.chains) {
    out.n_draws = static_cast<int>(chain.draws.size());
    std::vector<double> flat;
    flat.reserve(chain.draws.size() * out.dim);
    for (const auto &draw : chain.draws) {
      if (static_cast<int>(draw.size()) != out.dim)
        throw validation_error("draw dimension does not match parameter count");
      flat.insert(flat.end(), draw.begin(), draw.end());
    }
    out.chains.push_back(std::move(flat));
    out.divergences.push_back(chain.divergences);
    out.max_depth_hits.push_back(chain.max_depth_hits);
    out.step_sizes.push_back(chain.step_size);
    out.accept_rates.push_back(chain.accept_rate);
    out.inv_metrics.push_back(chain.inv_metric);
  }
  for (const ChainResult &chain : result.chains)
    if (static_cast<int>(chain.draws.size()) != out.n_draws)
      throw validation_error("chains returned unequal draw counts");
  return out;
}

std::vector<std::vector<double>> compute_derived(const Model &model,
                                                 const PosteriorDraws &draws) {
  const int nd = model.n_derived();
  std::vector<std::vector<double>> out(draws.n_chains());
  std::vector<double> q(draws.dim);
  for (int c = 0; c < draws.n_chains(); ++c) {
    out[c].resize(static_cast<std::size_t>(draws.n_draws) * nd);
    for (int i = 0; i < draws.n_draws; ++i) {
      const double *row = draws.chains[c].data() +
                          static_cast<std::size_t>(i) * draws.dim;
      q.assign(row, row + draws.dim);
      model.derived_quantities(q, out[c].data() +
                                      static_cast<std::size_t>(i) * nd);
    }
  }
  return out;
}

double sorted_quantile(const std::vector<double> &sorted, double p) {
  if (sorted.empty()) throw validation_error("quantile of empty sample");
  const double h = p * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SummaryRow summarize_series(const std::string &name,
                            const std::vector<std::vector<double>> &series) {
  SummaryRow row;
  row.name = name;

  std::vector<double> pooled;
  for (const auto &s : series) pooled.insert(pooled.end(), s.begin(), s.end());
  if (pooled.empty()) throw validation_error("summary of empty draw set");
  row.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) /
             static_cast<double>(pooled.size());
  std::sort(pooled.begin(), pooled.end());
  row.median = sorted_quantile(pooled, 0.5);
  row.lo95 = sorted_quantile(pooled, 0.025);
  row.hi95 = sorted_quantile(pooled, 0.975);

  if (series.front().size() >= 4) {
    row.rhat = rhat(series);
    row.ess = ess_bulk(series);
  } else {
    row.rhat = std::numeric_limits<double>::quiet_NaN();
    row.ess = 0.0;
  }
  return row;
}

std::vector<SummaryRow> summarize_parameters(const PosteriorDraws &draws) {
  std::vector<SummaryRow> rows;
  rows.reserve(draws.dim);
  for (int p = 0; p < draws.dim; ++p)
    rows.push_back(summarize_series(draws.names[p], draws.reported_series(p)));
  return rows;
}

std::vector<SummaryRow> summarize(const Model &model,
                                  const PosteriorDraws &draws) {
  std::vector<SummaryRow> rows = summarize_parameters(draws);
  const auto derived = compute_derived(model, draws);
  const int nd = model.n_derived();
  std::vector<std::vector<double>> series(draws.n_chains());
  for (int d = 0; d < nd; ++d) {
    for (int c = 0; c < draws.n_chains(); ++c) {
      series[c].resize(draws.n_draws);
      for (int i = 0; i < draws.n_draws; ++i)
        series[c][i] = derived[c][static_cast<std::size_t>(i) * nd + d];
    }
    rows.push_back(summarize_series(model.derived_names()[d], series));
  }
  return rows;
}

ConvergenceReport convergence_gate(const std::vector<SummaryRow> &params,
                                   double rhat_limit, double ess_floor) {
  ConvergenceReport report;
  report.rhat_limit = rhat_limit;
  report.ess_floor = ess_floor;
  if (params.empty()) throw validation_error("convergence gate without rows");
  report.max_rhat = -std::numeric_limits<double>::infinity();
  report.min_ess = std::numeric_limits<double>::infinity();
  for (const SummaryRow &row : params) {
    // An undefined R-hat counts as a failure, not a pass-by-NaN.
    const double r = std::isnan(row.rhat)
                         ? std::numeric_limits<double>::infinity()
                         : row.rhat;
    const double e = std::isnan(row.ess) ? 0.0 : row.ess;
    if (r > report.max_rhat) {
      report.max_rhat = r;
      report.worst_rhat_param = row.name;
    }
    if (e < report.min_ess) {
      report.min_ess = e;
      report.worst_ess_param = row.name;
    }
  }
  report.pass = report.max_rhat < rhat_limit && report.min_ess >= ess_floor;
  return report;
}

void write_draws_csv(const std::string &path, const PosteriorDraws &draws) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write draws file: " + path);
  out << "chain,iter";
  for (const std::string &name : draws.names) out << ',' << name;
  out << '\n';
  for (int c = 0; c < draws.n_chains(); ++c) {
    for (int i = 0; i < draws.n_draws; ++i) {
      out << (c + 1) << ',' << (i + 1);
      for (int p = 0; p < draws.dim; ++p)
        out << ',' << format_real(draws.reported(c, i, p));
      out << '\n';
    }
  }
  if (!out) throw validation_error("failed writing draws file: " + path);
}

void write_summary_csv(const std::string &path,
                       const std::vector<SummaryRow> &rows) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write summary file: " + path);
  out << "parameter,mean,median,ci2.5,ci97.5,rhat,ess\n";
  for (const SummaryRow &row : rows) {
    out << row.name << ',' << format_real(row.mean) << ','
        << format_real(row.median) << ',' << format_real(row.lo95) << ','
        << format_real(row.hi95) << ',' << format_real(row.rhat) << ','
        << format_real(row.ess) << '\n';
  }
  if (!out) throw validation_error("failed writing summary file: " + path);
}

}  // namespace mpep
