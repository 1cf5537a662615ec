#include "mpep/config.hpp"

#include <algorithm>

#include "mpep/errors.hpp"
#include "mpep/toml_lite.hpp"

namespace mpep {

namespace {

using json = nlohmann::ordered_json;

const Factor main_effect_factors[] = {Factor::treatment, Factor::sex,
                                      Factor::age, Factor::year, Factor::region};

Term term_from_json(const json &value, const std::string &where) {
  Term term;
  if (value.is_string()) {
    term.factors.push_back(factor_from_string(value.get<std::string>()));
  } else if (value.is_array()) {
    for (const json &item : value) {
      if (!item.is_string())
        throw validation_error(where + ": term entries must be factor names");
      term.factors.push_back(factor_from_string(item.get<std::string>()));
    }
  } else {
    throw validation_error(where + ": a term is a factor name or a list of them");
  }
  if (term.factors.empty())
    throw validation_error(where + ": empty term");
  for (std::size_t i = 0; i < term.factors.size(); ++i)
    for (std::size_t j = i + 1; j < term.factors.size(); ++j)
      if (term.factors[i] == term.factors[j])
        throw validation_error(where + ": factor '" +
                               factor_to_string(term.factors[i]) +
                               "' repeated within a term");
  return term;
}

json term_to_json(const Term &term) {
  if (term.factors.size() == 1) return factor_to_string(term.factors[0]);
  json out = json::array();
  for (Factor f : term.factors) out.push_back(factor_to_string(f));
  return out;
}

RegressionSpec regression_from_json(const json &table, const std::string &where) {
  RegressionSpec spec;
  if (table.contains("fixed"))
    for (const json &value : table.at("fixed"))
      spec.fixed.push_back(term_from_json(value, where + ".fixed"));
  if (table.contains("re"))
    for (const json &value : table.at("re"))
      spec.random.push_back(term_from_json(value, where + ".re"));
  return spec;
}

double get_number(const json &table, const std::string &key, double fallback) {
  if (!table.contains(key)) return fallback;
  const json &value = table.at(key);
  if (!value.is_number())
    throw validation_error("priors." + key + " must be a number");
  return value.get<double>();
}

std::vector<std::string> get_string_list(const json &value, const std::string &where) {
  std::vector<std::string> out;
  if (!value.is_array())
    throw validation_error(where + " must be a list of strings");
  for (const json &item : value) {
    if (!item.is_string())
      throw validation_error(where + " must be a list of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

void check_regression(const RegressionSpec &spec, const std::string &name,
                      bool treatment_allowed) {
  for (Factor f : main_effect_factors) {
    if (f == Factor::treatment && !treatment_allowed) continue;
    const Term main{{f}};
    if (std::find(spec.fixed.begin(), spec.fixed.end(), main) == spec.fixed.end())
      throw validation_error("regression '" + name + "' must include the " +
                             factor_to_string(f) + " main effect");
  }
  auto check_term = [&](const Term &term, bool random) {
    if (!treatment_allowed && term.contains(Factor::treatment))
      throw validation_error("regression '" + name +
                             "' cannot involve treatment status");
    if (random) {
      if (term.factors.size() < 2)
        throw validation_error("regression '" + name + "': RE block '" +
                               term.name() + "' must be an interaction");
      if (!term.contains(Factor::year) && !term.contains(Factor::region))
        throw validation_error("regression '" + name + "': RE block '" +
                               term.name() + "' must involve year or region");
    }
  };
  for (const Term &term : spec.fixed) check_term(term, false);
  for (const Term &term : spec.random) check_term(term, true);
  for (std::size_t i = 0; i < spec.fixed.size(); ++i)
    for (std::size_t j = i + 1; j < spec.fixed.size(); ++j)
      if (spec.fixed[i] == spec.fixed[j])
        throw validation_error("regression '" + name + "': fixed term '" +
                               spec.fixed[i].name() + "' listed twice");
  for (std::size_t i = 0; i < spec.random.size(); ++i)
    for (std::size_t j = i + 1; j < spec.random.size(); ++j)
      if (spec.random[i] == spec.random[j])
        throw validation_error("regression '" + name + "': RE block '" +
                               spec.random[i].name() + "' listed twice");
}

}  // namespace

Factor factor_from_string(const std::string &name) {
  if (name == "treatment") return Factor::treatment;
  if (name == "sex") return Factor::sex;
  if (name == "age") return Factor::age;
  if (name == "year") return Factor::year;
  if (name == "region") return Factor::region;
  throw validation_error("unknown factor '" + name +
                         "' (expected treatment, sex, age, year, or region)");
}

std::string factor_to_string(Factor f) {
  switch (f) {
    case Factor::treatment: return "treatment";
    case Factor::sex: return "sex";
    case Factor::age: return "age";
    case Factor::year: return "year";
    case Factor::region: return "region";
  }
  return "?";
}

bool Term::contains(Factor f) const {
  return std::find(factors.begin(), factors.end(), f) != factors.end();
}

std::string Term::name() const {
  std::string out;
  for (Factor f : factors) {
    if (!out.empty()) out += ":";
    out += factor_to_string(f);
  }
  return out;
}

std::string BiasCell::describe() const {
  std::string out = "event=" + event;
  if (!sex.empty()) out += ", sex=" + sex;
  if (!age_group.empty()) out += ", age_group=" + age_group;
  if (!year.empty()) out += ", year=" + year;
  if (!region.empty()) out += ", region=" + region;
  return out;
}

std::string CandidateTerm::describe() const {
  return target + (random ? " re " : " fixed ") + term.name();
}

int ModelConfig::event_index(const std::string &name) const {
  for (std::size_t e = 0; e < event_types.size(); ++e)
    if (event_types[e] == name) return static_cast<int>(e);
  return -1;
}

void ModelConfig::validate() const {
  if (event_types.empty())
    throw validation_error("config declares no event types ([model.<event>] tables)");
  if (event_families.size() != event_types.size() ||
      event_regressions.size() != event_types.size())
    throw validation_error("event sub-model lists are inconsistent");
  for (std::size_t e = 0; e < event_types.size(); ++e)
    for (std::size_t f = e + 1; f < event_types.size(); ++f)
      if (event_types[e] == event_types[f])
        throw validation_error("event type '" + event_types[e] + "' declared twice");
  for (std::size_t e = 0; e < event_types.size(); ++e)
    check_regression(event_regressions[e], event_types[e], true);
  check_regression(exit_regression, "exit", false);
  check_regression(prevalence_regression, "prevalence", false);
  if (extensions.pmatch_on && !priors.pmatch_logit)
    throw validation_error(
        "pmatch is enabled but no informative prior is given "
        "(priors.pmatch_mean / priors.pmatch_sd)");
  for (const BiasCell &cell : extensions.bias_cells) {
    if (cell.event.empty())
      throw validation_error("bias cell without an event type");
    if (event_index(cell.event) < 0)
      throw validation_error("bias cell references unknown event type '" +
                             cell.event + "'");
  }
  auto check_prior_sd = [](double sd, const std::string &name) {
    if (!(sd > 0.0))
      throw validation_error("prior scale " + name + " must be > 0");
  };
  check_prior_sd(priors.fixed_effect.sd, "fixed_sd");
  check_prior_sd(priors.re_scale_sd, "re_scale_sd");
  check_prior_sd(priors.log_theta.sd, "log_theta_sd");
  check_prior_sd(priors.logit_pi.sd, "logit_pi_sd");
  check_prior_sd(priors.prevc_logit.sd, "prevc_sd");
  check_prior_sd(priors.bias.sd, "bias_sd");
  if (priors.pmatch_logit) check_prior_sd(priors.pmatch_logit->sd, "pmatch_sd");
}

ModelConfig config_from_toml(const json &root, const std::string &source_name) {
  auto fail = [&](const std::string &what) {
    throw validation_error(source_name + ": " + what);
  };
  ModelConfig config;
  if (!root.contains("model") || !root.at("model").is_object())
    fail("missing [model.<event>] tables");
  for (const auto &[event, table] : root.at("model").items()) {
    if (!table.is_object()) fail("[model." + event + "] must be a table");
    config.event_types.push_back(event);
    const std::string family =
        table.contains("family") ? table.at("family").get<std::string>() : "poisson";
    config.event_families.push_back(family_from_string(family));
    config.event_regressions.push_back(
        regression_from_json(table, "model." + event));
  }
  if (root.contains("exit")) {
    const json &table = root.at("exit");
    config.exit_family = family_from_string(
        table.contains("family") ? table.at("family").get<std::string>() : "poisson");
    config.exit_regression = regression_from_json(table, "exit");
  } else {
    fail("missing [exit] table");
  }
  if (root.contains("prevalence")) {
    config.prevalence_regression =
        regression_from_json(root.at("prevalence"), "prevalence");
  } else {
    fail("missing [prevalence] table");
  }

  PriorSettings &priors = config.priors;
  if (root.contains("priors")) {
    const json &table = root.at("priors");
    priors.fixed_effect.mean = get_number(table, "fixed_mean", 0.0);
    priors.fixed_effect.sd = get_number(table, "fixed_sd", 10.0);
    priors.re_scale_sd = get_number(table, "re_scale_sd", 1.0);
    priors.log_theta.mean = get_number(table, "log_theta_mean", 0.0);
    priors.log_theta.sd = get_number(table, "log_theta_sd", 5.0);
    priors.logit_pi.mean = get_number(table, "logit_pi_mean", -3.0);
    priors.logit_pi.sd = get_number(table, "logit_pi_sd", 2.0);
    priors.prevc_logit.mean = get_number(table, "prevc_mean", 0.0);
    priors.prevc_logit.sd = get_number(table, "prevc_sd", 10.0);
    priors.bias.mean = get_number(table, "bias_mean", 0.0);
    priors.bias.sd = get_number(table, "bias_sd", 10.0);
    if (table.contains("pmatch_mean") || table.contains("pmatch_sd")) {
      NormalPrior pmatch;
      pmatch.mean = get_number(table, "pmatch_mean", 0.0);
      pmatch.sd = get_number(table, "pmatch_sd", 1.0);
      priors.pmatch_logit = pmatch;
    }
  }

  if (root.contains("extensions")) {
    const json &table = root.at("extensions");
    if (table.contains("pmatch"))
      config.extensions.pmatch_on = table.at("pmatch").get<bool>();
    if (table.contains("bias")) {
      for (const json &entry : table.at("bias")) {
        BiasCell cell;
        if (entry.contains("event")) cell.event = entry.at("event").get<std::string>();
        if (entry.contains("sex")) cell.sex = entry.at("sex").get<std::string>();
        if (entry.contains("age_group"))
          cell.age_group = entry.at("age_group").get<std::string>();
        if (entry.contains("year")) cell.year = entry.at("year").get<std::string>();
        if (entry.contains("region"))
          cell.region = entry.at("region").get<std::string>();
        config.extensions.bias_cells.push_back(std::move(cell));
      }
    }
  }

  if (root.contains("dataset")) {
    const json &table = root.at("dataset");
    DatasetLoadOptions &opts = config.dataset_options;
    if (table.contains("deaths_event"))
      opts.deaths_event = table.at("deaths_event").get<std::string>();
    if (table.contains("age_levels"))
      opts.age_levels = get_string_list(table.at("age_levels"), "dataset.age_levels");
    if (table.contains("year_levels"))
      opts.year_levels = get_string_list(table.at("year_levels"), "dataset.year_levels");
    if (table.contains("region_levels"))
      opts.region_levels =
          get_string_list(table.at("region_levels"), "dataset.region_levels");
  }

  config.validate();
  return config;
}

ModelConfig load_model_config(const std::string &path) {
  return config_from_toml(parse_toml_file(path), path);
}

json config_to_json(const ModelConfig &config) {
  json root = json::object();
  json &model = root["model"];
  model = json::object();
  for (std::size_t e = 0; e < config.event_types.size(); ++e) {
    json table = json::object();
    table["family"] = family_to_string(config.event_families[e]);
    json fixed = json::array();
    for (const Term &term : config.event_regressions[e].fixed)
      fixed.push_back(term_to_json(term));
    table["fixed"] = std::move(fixed);
    json random = json::array();
    for (const Term &term : config.event_regressions[e].random)
      random.push_back(term_to_json(term));
    table["re"] = std::move(random);
    model[config.event_types[e]] = std::move(table);
  }
  auto regression_json = [](const RegressionSpec &spec) {
    json table = json::object();
    json fixed = json::array();
    for (const Term &term : spec.fixed) fixed.push_back(term_to_json(term));
    table["fixed"] = std::move(fixed);
    json random = json::array();
    for (const Term &term : spec.random) random.push_back(term_to_json(term));
    table["re"] = std::move(random);
    return table;
  };
  root["exit"] = regression_json(config.exit_regression);
  root["exit"]["family"] = family_to_string(config.exit_family);
  root["prevalence"] = regression_json(config.prevalence_regression);

  json priors = json::object();
  priors["fixed_mean"] = config.priors.fixed_effect.mean;
  priors["fixed_sd"] = config.priors.fixed_effect.sd;
  priors["re_scale_sd"] = config.priors.re_scale_sd;
  priors["log_theta_mean"] = config.priors.log_theta.mean;
  priors["log_theta_sd"] = config.priors.log_theta.sd;
  priors["logit_pi_mean"] = config.priors.logit_pi.mean;
  priors["logit_pi_sd"] = config.priors.logit_pi.sd;
  priors["prevc_mean"] = config.priors.prevc_logit.mean;
  priors["prevc_sd"] = config.priors.prevc_logit.sd;
  priors["bias_mean"] = config.priors.bias.mean;
  priors["bias_sd"] = config.priors.bias.sd;
  if (config.priors.pmatch_logit) {
    priors["pmatch_mean"] = config.priors.pmatch_logit->mean;
    priors["pmatch_sd"] = config.priors.pmatch_logit->sd;
  }
  root["priors"] = std::move(priors);

  json extensions = json::object();
  extensions["pmatch"] = config.extensions.pmatch_on;
  if (!config.extensions.bias_cells.empty()) {
    json cells = json::array();
    for (const BiasCell &cell : config.extensions.bias_cells) {
      json entry = json::object();
      entry["event"] = cell.event;
      if (!cell.sex.empty()) entry["sex"] = cell.sex;
      if (!cell.age_group.empty()) entry["age_group"] = cell.age_group;
      if (!cell.year.empty()) entry["year"] = cell.year;
      if (!cell.region.empty()) entry["region"] = cell.region;
      cells.push_back(std::move(entry));
    }
    extensions["bias"] = std::move(cells);
  }
  root["extensions"] = std::move(extensions);

  const DatasetLoadOptions &opts = config.dataset_options;
  if (!opts.deaths_event.empty() || !opts.age_levels.empty() ||
      !opts.year_levels.empty() || !opts.region_levels.empty()) {
    json dataset = json::object();
    if (!opts.deaths_event.empty()) dataset["deaths_event"] = opts.deaths_event;
    if (!opts.age_levels.empty()) dataset["age_levels"] = opts.age_levels;
    if (!opts.year_levels.empty()) dataset["year_levels"] = opts.year_levels;
    if (!opts.region_levels.empty()) dataset["region_levels"] = opts.region_levels;
    root["dataset"] = std::move(dataset);
  }
  return root;
}

std::string config_to_toml_text(const ModelConfig &config) {
  return to_toml(config_to_json(config));
}

std::vector<CandidateTerm> candidates_from_toml(const json &root,
                                                const std::string &source_name) {
  std::vector<CandidateTerm> out;
  if (!root.contains("candidate")) return out;
  const json &list = root.at("candidate");
  if (!list.is_array())
    throw validation_error(source_name + ": [[candidate]] must be a table array");
  for (const json &entry : list) {
    CandidateTerm candidate;
    if (!entry.contains("target") || !entry.at("target").is_string())
      throw validation_error(source_name + ": candidate without a target");
    candidate.target = entry.at("target").get<std::string>();
    if (!entry.contains("term"))
      throw validation_error(source_name + ": candidate without a term");
    candidate.term = term_from_json(entry.at("term"), source_name + ": candidate");
    if (entry.contains("random")) candidate.random = entry.at("random").get<bool>();
    out.push_back(std::move(candidate));
  }
  return out;
}

std::vector<CandidateTerm> load_candidates(const std::string &path) {
  return candidates_from_toml(parse_toml_file(path), path);
}

ModelConfig with_candidate(const ModelConfig &config, const CandidateTerm &candidate) {
  ModelConfig out = config;
  RegressionSpec *spec = nullptr;
  if (candidate.target == "exit") {
    spec = &out.exit_regression;
  } else if (candidate.target == "prevalence") {
    spec = &out.prevalence_regression;
  } else {
    const int e = out.event_index(candidate.target);
    if (e < 0)
      throw validation_error("candidate targets unknown regression '" +
                             candidate.target + "'");
    spec = &out.event_regressions[e];
  }
  if (candidate.random)
    spec->random.push_back(candidate.term);
  else
    spec->fixed.push_back(candidate.term);
  out.validate();
  return out;
}

}  // namespace mpep
