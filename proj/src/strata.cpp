#include "mpep/strata.hpp"

#include <sstream>

#include "mpep/errors.hpp"

namespace mpep {

int DatasetHeader::event_index(const std::string &name) const {
  for (int e = 0; e < n_events(); ++e)
    if (event_types[e] == name) return e;
  return -1;
}

StratumKey StrataDataset::key_of(std::size_t index) const {
  const std::size_t R = header.region_levels.size();
  const std::size_t Y = header.year_levels.size();
  const std::size_t A = header.age_levels.size();
  StratumKey key;
  key.region = static_cast<int>(index % R);
  index /= R;
  key.year = static_cast<int>(index % Y);
  index /= Y;
  key.age = static_cast<int>(index % A);
  key.sex = static_cast<int>(index / A);
  return key;
}

std::string StrataDataset::key_label(const StratumKey &key) const {
  std::ostringstream out;
  out << "sex=" << header.sex_levels[key.sex]
      << ", age_group=" << header.age_levels[key.age]
      << ", year=" << header.year_levels[key.year]
      << ", region=" << header.region_levels[key.region];
  return out.str();
}

void validate_row(const DatasetHeader &header, const StratumKey &key,
                  const StratumCounts &counts, const std::string &key_label) {
  auto fail = [&](const std::string &what) {
    throw validation_error(what + " (" + key_label + ")");
  };
  (void)key;
  if (counts.n_c < 0) fail("n_c must be >= 0");
  if (counts.P < 0) fail("P must be >= 0");
  if (counts.n_c > counts.P) fail("n_c exceeds the general population P");
  if (counts.x_o < 0) fail("x_o must be >= 0");
  if (!(counts.t_on >= 0.0)) fail("t_on must be >= 0");
  if (!(counts.t_off >= 0.0)) fail("t_off must be >= 0");
  if (!(counts.t_o >= 0.0)) fail("t_o must be >= 0");
  if (!(counts.t_d >= 0.0)) fail("t_d must be >= 0");
  if (counts.t_on + counts.t_off > static_cast<double>(counts.n_c) + 1e-9)
    fail("t_on + t_off exceeds n_c person-years");
  if (counts.x_c.size() != static_cast<std::size_t>(header.n_events()) ||
      counts.x_e.size() != static_cast<std::size_t>(header.n_events()))
    fail("event count vectors do not match the declared event types");
  for (int e = 0; e < header.n_events(); ++e) {
    if (counts.x_c[e][status_off] < 0 || counts.x_c[e][status_on] < 0)
      fail("x_c[" + header.event_types[e] + "] must be >= 0");
    if (counts.x_e[e] < 0) fail("x_e[" + header.event_types[e] + "] must be >= 0");
  }
  if (header.deaths_event >= 0 &&
      counts.t_d > static_cast<double>(counts.x_e[header.deaths_event]))
    fail("t_d exceeds x_e[" + header.event_types[header.deaths_event] +
         "]: pre-death person-time cannot exceed the extra death count");
}

void StrataDataset::validate() const {
  if (header.sex_levels.empty() || header.age_levels.empty() ||
      header.year_levels.empty() || header.region_levels.empty())
    throw validation_error("dataset header declares an empty factor");
  if (header.event_types.empty())
    throw validation_error("dataset header declares no event types");
  if (rows.size() != header.n_strata())
    throw validation_error("dataset has " + std::to_string(rows.size()) +
                           " rows but the cross-classification requires " +
                           std::to_string(header.n_strata()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const StratumKey key = key_of(i);
    validate_row(header, key, rows[i], key_label(key));
  }
}

}  // namespace mpep
