#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpep/strata.hpp"

namespace mpep {

// Optional controls for dataset loading.  Level orders default to a natural
// sort of the values found in the file (numbers inside labels compare
// numerically, so "year 2" sorts before "year 10"); supplying an explicit
// order pins both the set of levels and the baseline (first element).
struct DatasetLoadOptions {
  std::vector<std::string> age_levels;
  std::vector<std::string> year_levels;
  std::vector<std::string> region_levels;
  // Event type designated as deaths; empty means "deaths" when present.
  std::string deaths_event;
};

StrataDataset load_dataset(const std::string &path,
                           const DatasetLoadOptions &options = {});
StrataDataset load_dataset_csv(std::istream &in, const std::string &source_name,
                               const DatasetLoadOptions &options = {});

void save_dataset(const StrataDataset &dataset, const std::string &path);
void save_dataset_csv(const StrataDataset &dataset, std::ostream &out);

// Order comparison with embedded integers compared numerically.
bool natural_less(const std::string &a, const std::string &b);

}  // namespace mpep
