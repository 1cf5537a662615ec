#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpep/config.hpp"
#include "mpep/strata.hpp"

namespace mpep {

// One dummy column: active for a row when every (factor, level) condition
// holds.  The intercept has no conditions.  Levels are stored as indices into
// the dataset header's level vectors (always non-baseline, i.e. > 0).
struct FixedColumn {
  std::vector<std::pair<Factor, int>> conditions;
  std::string name;
};

// A random-effect interaction block.  Each row maps to one of the block's
// levels (the cartesian product of the involved factors' non-baseline
// levels) or to -1 when any involved factor sits at its baseline.
struct REBlock {
  Term term;
  int n_levels = 0;
  std::string name;
  std::vector<std::string> level_names;
};

// Sparse design row: indices of active fixed columns plus the level index
// per RE block.
struct DesignRow {
  std::vector<int> columns;
  std::vector<int> block_level;
};

struct RegressionDesign {
  std::string name;
  std::vector<FixedColumn> fixed;
  std::vector<REBlock> blocks;
  std::vector<DesignRow> rows;

  int n_fixed() const { return static_cast<int>(fixed.size()); }
  int n_rows() const { return static_cast<int>(rows.size()); }
};

// Designs for every regression in the model.  Cohort event-rate regressions
// have one row per stratum x treatment status (row = stratum*2 + status);
// the exit and prevalence regressions have one row per stratum.
struct Design {
  std::vector<RegressionDesign> event_rates;
  RegressionDesign exit;
  RegressionDesign prevalence;
  // Flagged (event, stratum) cells whose extra expectation carries a bias
  // term, in canonical order (event-major).
  std::vector<std::pair<int, std::size_t>> bias_cells;
};

// Builds all designs, expands bias-cell predicates against the dataset
// header, and verifies full column rank of every fixed-effect matrix.
Design build_design(const ModelConfig &config, const StrataDataset &dataset);

// Fixed-effect dot product plus one RE value per block;
// block_values[b] holds the realized values (scale x raw) for block b.
std::vector<double> linear_predictor(const RegressionDesign &design,
                                     const std::vector<double> &beta,
                                     const std::vector<std::vector<double>> &block_values);

}  // namespace mpep
