#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mpep {

// Treatment status index within a stratum: exposure and cohort event counts
// are split by whether person-time was spent on or off treatment.
inline constexpr int status_off = 0;
inline constexpr int status_on = 1;

// A cell of the sex x age-group x year x region cross-classification.
// Fields are indices into the level vectors of the DatasetHeader.
struct StratumKey {
  int sex = 0;
  int age = 0;
  int year = 0;
  int region = 0;

  bool operator==(const StratumKey &other) const = default;
};

// Observed inputs for one stratum.  Event-indexed vectors are aligned with
// DatasetHeader::event_types.
struct StratumCounts {
  long long n_c = 0;  // baseline cohort size (persons)
  long long P = 0;    // general population (persons)
  double t_on = 0.0;  // cohort person-years on treatment
  double t_off = 0.0; // cohort person-years off treatment
  double t_o = 0.0;   // denominator person-years for the exit model
  long long x_o = 0;  // other-cause exits
  double t_d = 0.0;   // pre-death person-time of extra deaths
  std::vector<std::array<long long, 2>> x_c;  // cohort events [off, on] per event type
  std::vector<long long> x_e;                 // unlinked (extra) events per event type
};

// Factor levels, event-type names, and the designated deaths event (if any).
struct DatasetHeader {
  std::vector<std::string> sex_levels;     // baseline first (female)
  std::vector<std::string> age_levels;     // baseline first
  std::vector<std::string> year_levels;    // baseline first
  std::vector<std::string> region_levels;  // reference region first
  std::vector<std::string> event_types;
  int deaths_event = -1;  // index into event_types, -1 when not designated

  int n_sex() const { return static_cast<int>(sex_levels.size()); }
  int n_age() const { return static_cast<int>(age_levels.size()); }
  int n_year() const { return static_cast<int>(year_levels.size()); }
  int n_region() const { return static_cast<int>(region_levels.size()); }
  int n_events() const { return static_cast<int>(event_types.size()); }
  std::size_t n_strata() const {
    return sex_levels.size() * age_levels.size() * year_levels.size() *
           region_levels.size();
  }
  int event_index(const std::string &name) const;
};

// Complete cross-classification stored densely in canonical order
// (sex-major, then age, year, region).  Immutable after load.
class StrataDataset {
 public:
  DatasetHeader header;
  std::vector<StratumCounts> rows;

  std::size_t n_strata() const { return rows.size(); }

  std::size_t index_of(const StratumKey &key) const {
    return ((static_cast<std::size_t>(key.sex) * header.age_levels.size() +
             key.age) * header.year_levels.size() + key.year) *
           header.region_levels.size() + key.region;
  }

  StratumKey key_of(std::size_t index) const;

  const StratumCounts &at(const StratumKey &key) const {
    return rows[index_of(key)];
  }

  // Human-readable key using the header's level labels.
  std::string key_label(const StratumKey &key) const;

  // Checks every invariant; throws validation_error naming the first
  // offending stratum.
  void validate() const;
};

// Per-row invariant checks shared by the loader and the generator; throws
// validation_error with the offending field and key label.
void validate_row(const DatasetHeader &header, const StratumKey &key,
                  const StratumCounts &counts, const std::string &key_label);

}  // namespace mpep
