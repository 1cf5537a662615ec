#include "mpep/synthetic.hpp"

#include <cmath>
#include <limits>

#include "mpep/design.hpp"
#include "mpep/errors.hpp"
#include "mpep/rng.hpp"
#include "mpep/survival.hpp"

namespace mpep {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::string> level_names(const std::vector<std::string> &given,
                                     int count, const char *prefix,
                                     const char *what) {
  if (!given.empty()) return given;
  if (count < 1)
    throw validation_error(std::string("synthetic shape needs at least one ") +
                           what + " level");
  std::vector<std::string> names;
  for (int i = 1; i <= count; ++i)
    names.push_back(prefix + std::to_string(i));
  return names;
}

// Header + population-only rows: enough for design and parameter layout.
StrataDataset skeleton_dataset(const ModelConfig &config,
                               const SyntheticShape &shape) {
  StrataDataset dataset;
  dataset.header.sex_levels = {"female", "male"};
  dataset.header.age_levels =
      level_names(shape.age_levels, shape.n_age, "a", "age");
  dataset.header.year_levels =
      level_names(shape.year_levels, shape.n_year, "y", "year");
  dataset.header.region_levels =
      level_names(shape.region_levels, shape.n_region, "r", "region");
  dataset.header.event_types = config.event_types;
  if (!config.dataset_options.deaths_event.empty()) {
    dataset.header.deaths_event =
        dataset.header.event_index(config.dataset_options.deaths_event);
    if (dataset.header.deaths_event < 0)
      throw validation_error("deaths event '" +
                             config.dataset_options.deaths_event +
                             "' is not an event type");
  } else {
    dataset.header.deaths_event = dataset.header.event_index("deaths");
  }

  const std::size_t S = dataset.header.n_strata();
  if (shape.population.size() != 1 && shape.population.size() != S)
    throw validation_error("population must be one value or one per stratum");
  for (long long p : shape.population)
    if (p < 1) throw validation_error("population must be >= 1");
  dataset.rows.resize(S);
  for (std::size_t j = 0; j < S; ++j) {
    dataset.rows[j].P =
        shape.population[shape.population.size() == 1 ? 0 : j];
    dataset.rows[j].x_c.assign(config.event_types.size(), {0, 0});
    dataset.rows[j].x_e.assign(config.event_types.size(), 0);
  }
  return dataset;
}

long long draw_count(Rng &rng, Family family, double mu, double theta,
                     double pi) {
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw validation_error("truth implies a non-finite or negative mean");
  if (mu == 0.0) return 0;
  switch (family) {
    case Family::poisson:
      return rng.poisson(mu);
    case Family::nb:
      return rng.poisson(rng.gamma(theta, mu / theta));
    case Family::zip:
      // The inflation draw is skipped at pi = 0 so the draw path matches
      // the Poisson family exactly.
      if (pi > 0.0 && rng.uniform() < pi) return 0;
      return rng.poisson(mu);
    case Family::zinb:
      if (pi > 0.0 && rng.uniform() < pi) return 0;
      return rng.poisson(rng.gamma(theta, mu / theta));
  }
  throw validation_error("unknown family");
}

double checked_rate(double eta, const std::string &what) {
  const double rate = std::exp(eta);
  if (!std::isfinite(rate) || !(rate > 0.0))
    throw validation_error("truth implies a rate <= 0 or overflow for " + what);
  return rate;
}

}  // namespace

StrataDataset generate_synthetic(const ModelConfig &config,
                                 const SyntheticShape &shape,
                                 const std::vector<double> &truth,
                                 std::uint64_t seed) {
  config.validate();
  if (!(shape.t_on_share >= 0.0 && shape.t_on_share <= 1.0))
    throw validation_error("t_on_share must lie in [0, 1]");
  const bool fixed_times = shape.fixed_t_on >= 0.0 || shape.fixed_t_off >= 0.0;
  if (fixed_times && (shape.fixed_t_on < 0.0 || shape.fixed_t_off < 0.0))
    throw validation_error("fixed person-times need both t_on and t_off");

  StrataDataset dataset = skeleton_dataset(config, shape);
  const Design design = build_design(config, dataset);
  const ParameterIndex index(config, design, dataset);
  if (static_cast<int>(truth.size()) != index.size())
    throw validation_error("truth has " + std::to_string(truth.size()) +
                           " values but the model has " +
                           std::to_string(index.size()) + " parameters");
  for (double v : truth)
    if (!std::isfinite(v))
      throw validation_error("truth contains a non-finite value");

  const int S = static_cast<int>(dataset.n_strata());
  const int E = static_cast<int>(config.event_types.size());
  const int deaths = dataset.header.deaths_event;

  auto eta_for = [&](const RegressionDesign &d, const RegressionParams &rp,
                     int row) {
    double eta = 0.0;
    for (int c : d.rows[row].columns) eta += truth[rp.beta + c];
    for (std::size_t b = 0; b < d.blocks.size(); ++b) {
      const int level = d.rows[row].block_level[b];
      if (level >= 0)
        eta += std::exp(truth[rp.block_u[b]]) * truth[rp.block_z[b] + level];
    }
    return eta;
  };

  const int pm_off = index.pmatch_offset();
  const double pm = pm_off >= 0 ? logistic(truth[pm_off]) : 1.0;
  const bool pmatch_on = pm_off >= 0;

  std::vector<double> theta(E + 1, 1.0), pi(E + 1, 0.0);
  for (int r = 0; r <= E; ++r) {
    const RegressionParams &rp = index.regression(r);
    if (rp.log_theta >= 0) theta[r] = std::exp(truth[rp.log_theta]);
    if (rp.logit_pi >= 0) pi[r] = logistic(truth[rp.logit_pi]);
  }

  std::vector<std::vector<double>> bias_factor(
      E, std::vector<double>(S, 1.0));
  for (std::size_t cell = 0; cell < design.bias_cells.size(); ++cell) {
    const auto &[event, stratum] = design.bias_cells[cell];
    bias_factor[event][stratum] = std::exp(truth[index.bias_offset(cell)]);
  }

  Rng rng(seed, 0);
  std::vector<double> lambda_on(E), lambda_off(E);
  for (int j = 0; j < S; ++j) {
    StratumCounts &row = dataset.rows[j];
    const double P = static_cast<double>(row.P);
    const std::string label = dataset.key_label(dataset.key_of(j));

    const double pc = logistic(truth[index.prevc_offset(j)]);
    const double pe =
        logistic(eta_for(design.prevalence,
                         index.regression(index.prevalence_regression()), j));
    if (!(pc > 0.0 && pc < 1.0) || !(pe > 0.0 && pe < 1.0))
      throw validation_error("truth implies a prevalence outside (0,1) in " +
                             label);
    if (pc + pe >= 1.0)
      throw validation_error("truth implies total prevalence >= 1 in " + label);

    for (int e = 0; e < E; ++e) {
      const RegressionDesign &dg = design.event_rates[e];
      const RegressionParams &rp = index.regression(e);
      lambda_off[e] = checked_rate(eta_for(dg, rp, j * 2 + status_off),
                                   config.event_types[e] + " in " + label);
      lambda_on[e] = checked_rate(eta_for(dg, rp, j * 2 + status_on),
                                  config.event_types[e] + " in " + label);
    }
    const double lambda_o =
        checked_rate(eta_for(design.exit,
                             index.regression(index.exit_regression()), j),
                     "exit in " + label);

    row.n_c = rng.binomial(row.P, pc);
    if (fixed_times) {
      row.t_on = shape.fixed_t_on;
      row.t_off = shape.fixed_t_off;
    } else {
      // Each cohort member contributes one person-year within the stratum.
      row.t_on = shape.t_on_share * static_cast<double>(row.n_c);
      row.t_off = static_cast<double>(row.n_c) - row.t_on;
    }
    row.t_o = row.t_off;

    for (int e = 0; e < E; ++e)
      for (int s = 0; s < 2; ++s) {
        const double t = s == status_on ? row.t_on : row.t_off;
        const double lambda = s == status_on ? lambda_on[e] : lambda_off[e];
        row.x_c[e][s] =
            draw_count(rng, config.event_families[e], pm * lambda * t,
                       theta[e], pi[e]);
      }
    row.x_o = draw_count(rng, config.exit_family, lambda_o * row.t_o, theta[E],
                         pi[E]);

    // Extra counts: the death count feeds the pre-death person-time, so
    // deaths are drawn first from the no-deaths time at risk.
    const double n_e = pe * P;
    auto extra_mean = [&](int e, double t_e) {
      const double a = lambda_off[e] * t_e * bias_factor[e][j];
      if (!pmatch_on) return a;
      const double b = lambda_off[e] * row.t_off + lambda_on[e] * row.t_on;
      return pm * a + (1.0 - pm) * b;
    };
    double t_e = extra_time_at_risk(n_e, 0.0, lambda_o);
    if (deaths >= 0) {
      row.x_e[deaths] = draw_count(rng, config.event_families[deaths],
                                   extra_mean(deaths, t_e), theta[deaths],
                                   pi[deaths]);
      row.t_d = 0.5 * static_cast<double>(row.x_e[deaths]);
      t_e = extra_time_at_risk(n_e, row.t_d, lambda_o);
    }
    for (int e = 0; e < E; ++e) {
      if (e == deaths) continue;
      row.x_e[e] = draw_count(rng, config.event_families[e], extra_mean(e, t_e),
                              theta[e], pi[e]);
    }
  }

  dataset.validate();
  return dataset;
}

SyntheticShape shape_from_json(const nlohmann::json &truth,
                               const ModelConfig &config) {
  SyntheticShape shape;
  shape.age_levels = config.dataset_options.age_levels;
  shape.year_levels = config.dataset_options.year_levels;
  shape.region_levels = config.dataset_options.region_levels;
  if (truth.contains("shape")) {
    const auto &s = truth.at("shape");
    shape.n_age = s.value("age", shape.n_age);
    shape.n_year = s.value("year", shape.n_year);
    shape.n_region = s.value("region", shape.n_region);
  }
  if (truth.contains("population")) {
    const auto &p = truth.at("population");
    if (p.is_array())
      shape.population = p.get<std::vector<long long>>();
    else
      shape.population = {p.get<long long>()};
  }
  shape.t_on_share = truth.value("t_on_share", shape.t_on_share);
  shape.fixed_t_on = truth.value("t_on", shape.fixed_t_on);
  shape.fixed_t_off = truth.value("t_off", shape.fixed_t_off);
  return shape;
}

std::vector<double> truth_vector_from_json(const nlohmann::json &truth,
                                           const ParameterIndex &index) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values(index.size(), nan);
  auto broadcast = [&](const char *key, ParamKind kind) {
    if (!truth.contains(key)) return;
    const double v = truth.at(key).get<double>();
    for (int i = 0; i < index.size(); ++i)
      if (index.kinds()[i] == kind) values[i] = v;
  };
  broadcast("prevc_logit_all", ParamKind::prevc_logit);
  broadcast("bias_all", ParamKind::bias);
  broadcast("re_raw_all", ParamKind::re_raw);
  broadcast("re_log_scale_all", ParamKind::re_log_scale);

  if (truth.contains("params")) {
    for (const auto &[name, value] : truth.at("params").items()) {
      bool found = false;
      for (int i = 0; i < index.size(); ++i)
        if (index.names()[i] == name) {
          values[i] = value.get<double>();
          found = true;
          break;
        }
      if (!found)
        throw validation_error("truth parameter '" + name +
                               "' is not in the model");
    }
  }

  const bool zero_unset = truth.value("zero_unset", false);
  for (int i = 0; i < index.size(); ++i)
    if (std::isnan(values[i])) {
      if (zero_unset)
        values[i] = 0.0;
      else
        throw validation_error("truth is missing parameter '" +
                               index.names()[i] +
                               "' (set zero_unset to default the rest to 0)");
    }
  return values;
}

StrataDataset generate_synthetic_json(const ModelConfig &config,
                                      const nlohmann::json &truth,
                                      std::uint64_t seed) {
  const SyntheticShape shape = shape_from_json(truth, config);
  // Parameter layout comes from the same skeleton the generator uses.
  StrataDataset dataset = skeleton_dataset(config, shape);
  const Design design = build_design(config, dataset);
  const ParameterIndex index(config, design, dataset);
  return generate_synthetic(config, shape,
                            truth_vector_from_json(truth, index), seed);
}

}  // namespace mpep
