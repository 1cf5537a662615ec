#include "mpep/design.hpp"

#include <Eigen/Dense>

#include "mpep/errors.hpp"

namespace mpep {

namespace {

// Level labels for one factor; treatment is synthesized since it is not a
// dataset dimension.
const std::vector<std::string> &factor_levels(Factor f, const DatasetHeader &header) {
  static const std::vector<std::string> treatment_levels = {"off", "on"};
  switch (f) {
    case Factor::treatment: return treatment_levels;
    case Factor::sex: return header.sex_levels;
    case Factor::age: return header.age_levels;
    case Factor::year: return header.year_levels;
    case Factor::region: return header.region_levels;
  }
  return treatment_levels;
}

int row_level(Factor f, const StratumKey &key, int status) {
  switch (f) {
    case Factor::treatment: return status;
    case Factor::sex: return key.sex;
    case Factor::age: return key.age;
    case Factor::year: return key.year;
    case Factor::region: return key.region;
  }
  return 0;
}

// Expands a term into dummy columns: the cartesian product of non-baseline
// levels, first factor slowest.
void append_term_columns(const Term &term, const DatasetHeader &header,
                         std::vector<FixedColumn> &columns) {
  // A factor with a single level has no non-baseline dummies; any term
  // involving it is vacuous and contributes no columns.
  for (Factor f : term.factors)
    if (factor_levels(f, header).size() < 2) return;
  std::vector<int> level(term.factors.size(), 1);
  while (true) {
    FixedColumn column;
    for (std::size_t i = 0; i < term.factors.size(); ++i) {
      const Factor f = term.factors[i];
      column.conditions.emplace_back(f, level[i]);
      if (!column.name.empty()) column.name += ":";
      column.name += factor_to_string(f) + "[" +
                     factor_levels(f, header)[level[i]] + "]";
    }
    columns.push_back(std::move(column));
    // Advance the mixed-radix counter over non-baseline levels.
    std::size_t i = term.factors.size();
    while (i > 0) {
      --i;
      const int n = static_cast<int>(factor_levels(term.factors[i], header).size());
      if (++level[i] < n) break;
      level[i] = 1;
      if (i == 0) return;
    }
  }
}

REBlock make_block(const Term &term, const DatasetHeader &header) {
  REBlock block;
  block.term = term;
  block.name = term.name();
  block.n_levels = 1;
  for (Factor f : term.factors)
    block.n_levels *= static_cast<int>(factor_levels(f, header).size()) - 1;
  std::vector<int> level(term.factors.size(), 1);
  for (int l = 0; l < block.n_levels; ++l) {
    std::string name;
    for (std::size_t i = 0; i < term.factors.size(); ++i) {
      if (!name.empty()) name += ":";
      name += factor_levels(term.factors[i], header)[level[i]];
    }
    block.level_names.push_back(std::move(name));
    std::size_t i = term.factors.size();
    while (i > 0) {
      --i;
      const int n = static_cast<int>(factor_levels(term.factors[i], header).size());
      if (++level[i] < n) break;
      level[i] = 1;
    }
  }
  return block;
}

int block_level_for(const REBlock &block, const DatasetHeader &header,
                    const StratumKey &key, int status) {
  int index = 0;
  for (Factor f : block.term.factors) {
    const int l = row_level(f, key, status);
    if (l == 0) return -1;
    const int n = static_cast<int>(factor_levels(f, header).size()) - 1;
    index = index * n + (l - 1);
  }
  return index;
}

DesignRow make_row(const RegressionDesign &design, const DatasetHeader &header,
                   const StratumKey &key, int status) {
  DesignRow row;
  for (int c = 0; c < design.n_fixed(); ++c) {
    bool active = true;
    for (const auto &[factor, level] : design.fixed[c].conditions)
      if (row_level(factor, key, status) != level) {
        active = false;
        break;
      }
    if (active) row.columns.push_back(c);
  }
  for (const REBlock &block : design.blocks)
    row.block_level.push_back(block_level_for(block, header, key, status));
  return row;
}

RegressionDesign build_regression(const std::string &name,
                                  const RegressionSpec &spec,
                                  const StrataDataset &dataset,
                                  bool by_treatment_status) {
  const DatasetHeader &header = dataset.header;
  RegressionDesign design;
  design.name = name;
  design.fixed.push_back(FixedColumn{{}, "intercept"});
  for (const Term &term : spec.fixed)
    append_term_columns(term, header, design.fixed);
  for (const Term &term : spec.random)
    design.blocks.push_back(make_block(term, header));
  const int statuses = by_treatment_status ? 2 : 1;
  design.rows.reserve(dataset.n_strata() * statuses);
  for (std::size_t j = 0; j < dataset.n_strata(); ++j) {
    const StratumKey key = dataset.key_of(j);
    for (int s = 0; s < statuses; ++s)
      design.rows.push_back(make_row(design, header, key, s));
  }
  return design;
}

void check_full_rank(const RegressionDesign &design) {
  Eigen::MatrixXd matrix =
      Eigen::MatrixXd::Zero(design.n_rows(), design.n_fixed());
  for (int r = 0; r < design.n_rows(); ++r)
    for (int c : design.rows[r].columns) matrix(r, c) = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(matrix);
  if (qr.rank() < design.n_fixed())
    throw validation_error("design for regression '" + design.name +
                           "' is rank deficient (" + std::to_string(qr.rank()) +
                           " of " + std::to_string(design.n_fixed()) +
                           " independent columns)");
}

bool level_matches(const std::string &wanted, const std::string &label) {
  return wanted.empty() || wanted == label;
}

}  // namespace

Design build_design(const ModelConfig &config, const StrataDataset &dataset) {
  config.validate();
  const DatasetHeader &header = dataset.header;
  for (const std::string &event : config.event_types)
    if (header.event_index(event) < 0)
      throw validation_error("config sub-model '" + event +
                             "' has no matching event type in the dataset");
  for (const std::string &event : header.event_types)
    if (config.event_index(event) < 0)
      throw validation_error("dataset event type '" + event +
                             "' has no [model." + event + "] sub-model");

  Design design;
  for (std::size_t e = 0; e < config.event_types.size(); ++e)
    design.event_rates.push_back(build_regression(
        config.event_types[e], config.event_regressions[e], dataset, true));
  design.exit = build_regression("exit", config.exit_regression, dataset, false);
  design.prevalence =
      build_regression("prevalence", config.prevalence_regression, dataset, false);

  for (const RegressionDesign &regression : design.event_rates)
    check_full_rank(regression);
  check_full_rank(design.exit);
  check_full_rank(design.prevalence);

  // Expand bias predicates into concrete (event, stratum) cells.
  std::vector<std::vector<char>> flagged(
      config.event_types.size(), std::vector<char>(dataset.n_strata(), 0));
  for (const BiasCell &cell : config.extensions.bias_cells) {
    const int event = config.event_index(cell.event);
    auto check_level = [&](const std::string &value, const std::vector<std::string> &levels,
                           const std::string &factor) {
      if (value.empty()) return;
      for (const std::string &level : levels)
        if (level == value) return;
      throw validation_error("bias cell (" + cell.describe() + "): " + factor +
                             " level '" + value + "' not present in the dataset");
    };
    check_level(cell.sex, header.sex_levels, "sex");
    check_level(cell.age_group, header.age_levels, "age_group");
    check_level(cell.year, header.year_levels, "year");
    check_level(cell.region, header.region_levels, "region");
    for (std::size_t j = 0; j < dataset.n_strata(); ++j) {
      const StratumKey key = dataset.key_of(j);
      if (level_matches(cell.sex, header.sex_levels[key.sex]) &&
          level_matches(cell.age_group, header.age_levels[key.age]) &&
          level_matches(cell.year, header.year_levels[key.year]) &&
          level_matches(cell.region, header.region_levels[key.region]))
        flagged[event][j] = 1;
    }
  }
  for (std::size_t e = 0; e < flagged.size(); ++e)
    for (std::size_t j = 0; j < flagged[e].size(); ++j)
      if (flagged[e][j])
        design.bias_cells.emplace_back(static_cast<int>(e), j);
  return design;
}

std::vector<double> linear_predictor(const RegressionDesign &design,
                                     const std::vector<double> &beta,
                                     const std::vector<std::vector<double>> &block_values) {
  if (beta.size() != static_cast<std::size_t>(design.n_fixed()))
    throw std::invalid_argument("coefficient vector does not match the design");
  if (block_values.size() != design.blocks.size())
    throw std::invalid_argument("block values do not match the design");
  std::vector<double> eta(design.rows.size(), 0.0);
  for (std::size_t r = 0; r < design.rows.size(); ++r) {
    double value = 0.0;
    for (int c : design.rows[r].columns) value += beta[c];
    for (std::size_t b = 0; b < design.blocks.size(); ++b) {
      const int level = design.rows[r].block_level[b];
      if (level >= 0) value += block_values[b][level];
    }
    eta[r] = value;
  }
  return eta;
}

}  // namespace mpep
