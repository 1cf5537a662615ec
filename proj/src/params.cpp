#include "mpep/params.hpp"

#include <cmath>

namespace mpep {

Xform xform_for(ParamKind kind) {
  switch (kind) {
    case ParamKind::re_log_scale:
    case ParamKind::log_theta:
      return Xform::exp;
    case ParamKind::logit_pi:
    case ParamKind::pmatch_logit:
      return Xform::logistic;
    default:
      return Xform::identity;
  }
}

double apply_xform(Xform xform, double value) {
  switch (xform) {
    case Xform::identity: return value;
    case Xform::exp: return std::exp(value);
    case Xform::logistic: return 1.0 / (1.0 + std::exp(-value));
  }
  return value;
}

ParameterIndex::ParameterIndex(const ModelConfig &config, const Design &design,
                               const StrataDataset &dataset) {
  auto push = [&](const std::string &name, ParamKind kind) {
    const int offset = static_cast<int>(names_.size());
    names_.push_back(name);
    kinds_.push_back(kind);
    return offset;
  };

  auto add_regression = [&](const RegressionDesign &regression, Family family,
                            bool has_family, const std::string &prefix) {
    RegressionParams params;
    params.beta = static_cast<int>(names_.size());
    for (const FixedColumn &column : regression.fixed)
      push(prefix + "." + column.name, ParamKind::coef);
    for (const REBlock &block : regression.blocks) {
      params.block_z.push_back(static_cast<int>(names_.size()));
      for (const std::string &level : block.level_names)
        push(prefix + ".re." + block.name + "[" + level + "]", ParamKind::re_raw);
      params.block_u.push_back(
          push(prefix + ".re_scale." + block.name, ParamKind::re_log_scale));
    }
    if (has_family && family_has_theta(family))
      params.log_theta = push(prefix + ".theta", ParamKind::log_theta);
    if (has_family && family_has_pi(family))
      params.logit_pi = push(prefix + ".pi", ParamKind::logit_pi);
    regressions_.push_back(std::move(params));
  };

  for (std::size_t e = 0; e < config.event_types.size(); ++e)
    add_regression(design.event_rates[e], config.event_families[e], true,
                   config.event_types[e]);
  add_regression(design.exit, config.exit_family, true, "exit");
  add_regression(design.prevalence, Family::poisson, false, "prev");

  bias_ = static_cast<int>(names_.size());
  n_bias_ = static_cast<int>(design.bias_cells.size());
  for (const auto &[event, stratum] : design.bias_cells) {
    const StratumKey key = dataset.key_of(stratum);
    const DatasetHeader &header = dataset.header;
    push("bias[" + config.event_types[event] + ";" +
             header.sex_levels[key.sex] + ";" + header.age_levels[key.age] +
             ";" + header.year_levels[key.year] + ";" +
             header.region_levels[key.region] + "]",
         ParamKind::bias);
  }
  if (config.extensions.pmatch_on)
    pmatch_ = push("pmatch", ParamKind::pmatch_logit);

  prevc_ = static_cast<int>(names_.size());
  for (std::size_t j = 0; j < dataset.n_strata(); ++j) {
    const StratumKey key = dataset.key_of(j);
    const DatasetHeader &header = dataset.header;
    push("prevc_logit[" + header.sex_levels[key.sex] + ";" +
             header.age_levels[key.age] + ";" + header.year_levels[key.year] +
             ";" + header.region_levels[key.region] + "]",
         ParamKind::prevc_logit);
  }
}

}  // namespace mpep
