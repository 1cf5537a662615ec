#include "mpep/dataset_io.hpp"

#include "mpep/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "mpep/errors.hpp"

namespace mpep {

namespace {

const char *const fixed_columns[] = {"sex",  "age_group", "year", "region",
                                     "n_c",  "P",         "t_on", "t_off",
                                     "t_o",  "x_o",       "t_d"};
constexpr int n_fixed_columns = 11;

std::string trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

long long parse_count(const std::string &field, const std::string &column,
                      int line_no) {
  long long value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw validation_error("line " + std::to_string(line_no) + ": column '" +
                           column + "' is not an integer: '" + field + "'");
  return value;
}

double parse_real(const std::string &field, const std::string &column,
                  int line_no) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(field, &consumed);
    if (consumed != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception &) {
    throw validation_error("line " + std::to_string(line_no) + ": column '" +
                           column + "' is not a number: '" + field + "'");
  }
}

// Resolves the level order for one factor: explicit order if given (every
// observed value must be listed), otherwise natural sort of observed values.
std::vector<std::string> resolve_levels(const std::string &factor,
                                        const std::vector<std::string> &observed,
                                        const std::vector<std::string> &declared) {
  if (!declared.empty()) {
    for (const std::string &value : observed)
      if (std::find(declared.begin(), declared.end(), value) == declared.end())
        throw validation_error("dataset value '" + value +
                               "' is not in the declared " + factor + " levels");
    return declared;
  }
  std::vector<std::string> levels = observed;
  std::sort(levels.begin(), levels.end(), natural_less);
  return levels;
}

int level_index(const std::vector<std::string> &levels, const std::string &value) {
  const auto it = std::find(levels.begin(), levels.end(), value);
  return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
}

}  // namespace

bool natural_less(const std::string &a, const std::string &b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ia = i, jb = j;
      while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
      while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
      // Compare the digit runs numerically: longer (after leading zeros)
      // wins, equal length decided lexicographically.
      std::size_t pa = i, pb = j;
      while (pa < ia - 1 && a[pa] == '0') ++pa;
      while (pb < jb - 1 && b[pb] == '0') ++pb;
      const std::size_t la = ia - pa, lb = jb - pb;
      if (la != lb) return la < lb;
      const int cmp = a.compare(pa, la, b, pb, lb);
      if (cmp != 0) return cmp < 0;
      i = ia;
      j = jb;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return (a.size() - i) < (b.size() - j);
}

StrataDataset load_dataset(const std::string &path,
                           const DatasetLoadOptions &options) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open dataset file: " + path);
  return load_dataset_csv(in, path, options);
}

StrataDataset load_dataset_csv(std::istream &in, const std::string &source_name,
                               const DatasetLoadOptions &options) {
  auto fail = [&](const std::string &what) {
    throw validation_error(source_name + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) fail("empty file (header row is mandatory)");
  const std::vector<std::string> header_fields = split_csv_line(line);
  if (header_fields.size() < n_fixed_columns)
    fail("header has " + std::to_string(header_fields.size()) +
         " columns; expected at least " + std::to_string(n_fixed_columns));
  for (int c = 0; c < n_fixed_columns; ++c)
    if (header_fields[c] != fixed_columns[c])
      fail("header column " + std::to_string(c + 1) + " is '" +
           header_fields[c] + "', expected '" + fixed_columns[c] + "'");

  // Event types come from the trailing column triplets x_c_on_E, x_c_off_E, x_e_E.
  std::vector<std::string> event_types;
  std::size_t c = n_fixed_columns;
  while (c < header_fields.size()) {
    if (c + 2 >= header_fields.size())
      fail("trailing event columns are incomplete after '" + header_fields[c] + "'");
    const std::string &on_col = header_fields[c];
    if (on_col.rfind("x_c_on_", 0) != 0)
      fail("expected an 'x_c_on_<event>' column, found '" + on_col + "'");
    const std::string event = on_col.substr(7);
    if (header_fields[c + 1] != "x_c_off_" + event)
      fail("expected 'x_c_off_" + event + "' after '" + on_col + "', found '" +
           header_fields[c + 1] + "'");
    if (header_fields[c + 2] != "x_e_" + event)
      fail("expected 'x_e_" + event + "' after 'x_c_off_" + event + "', found '" +
           header_fields[c + 2] + "'");
    event_types.push_back(event);
    c += 3;
  }
  if (event_types.empty()) fail("no event-type columns found");

  struct RawRow {
    std::string sex, age, year, region;
    StratumCounts counts;
    int line_no = 0;
  };
  std::vector<RawRow> raw;
  std::vector<std::string> sex_seen, age_seen, year_seen, region_seen;
  auto note = [](std::vector<std::string> &seen, const std::string &value) {
    if (std::find(seen.begin(), seen.end(), value) == seen.end())
      seen.push_back(value);
  };

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header_fields.size())
      fail("line " + std::to_string(line_no) + " has " +
           std::to_string(fields.size()) + " fields; expected " +
           std::to_string(header_fields.size()));
    RawRow row;
    row.line_no = line_no;
    row.sex = fields[0];
    row.age = fields[1];
    row.year = fields[2];
    row.region = fields[3];
    row.counts.n_c = parse_count(fields[4], "n_c", line_no);
    row.counts.P = parse_count(fields[5], "P", line_no);
    row.counts.t_on = parse_real(fields[6], "t_on", line_no);
    row.counts.t_off = parse_real(fields[7], "t_off", line_no);
    row.counts.t_o = fields[8].empty() ? row.counts.t_off
                                       : parse_real(fields[8], "t_o", line_no);
    row.counts.x_o = parse_count(fields[9], "x_o", line_no);
    row.counts.t_d = parse_real(fields[10], "t_d", line_no);
    row.counts.x_c.resize(event_types.size());
    row.counts.x_e.resize(event_types.size());
    for (std::size_t e = 0; e < event_types.size(); ++e) {
      const std::size_t base = n_fixed_columns + 3 * e;
      row.counts.x_c[e][status_on] =
          parse_count(fields[base], header_fields[base], line_no);
      row.counts.x_c[e][status_off] =
          parse_count(fields[base + 1], header_fields[base + 1], line_no);
      row.counts.x_e[e] =
          parse_count(fields[base + 2], header_fields[base + 2], line_no);
    }
    note(sex_seen, row.sex);
    note(age_seen, row.age);
    note(year_seen, row.year);
    note(region_seen, row.region);
    raw.push_back(std::move(row));
  }
  if (raw.empty()) fail("no data rows");

  StrataDataset dataset;
  DatasetHeader &header = dataset.header;
  for (const std::string &value : sex_seen)
    if (value != "female" && value != "male")
      fail("unknown sex level '" + value + "' (expected female or male)");
  header.sex_levels = {"female", "male"};
  header.age_levels = resolve_levels("age_group", age_seen, options.age_levels);
  header.year_levels = resolve_levels("year", year_seen, options.year_levels);
  header.region_levels = resolve_levels("region", region_seen, options.region_levels);
  header.event_types = event_types;
  const std::string deaths_name =
      options.deaths_event.empty() ? "deaths" : options.deaths_event;
  header.deaths_event = header.event_index(deaths_name);
  if (!options.deaths_event.empty() && header.deaths_event < 0)
    fail("designated deaths event '" + options.deaths_event +
         "' is not among the dataset's event types");

  std::vector<std::optional<StratumCounts>> cells(header.n_strata());
  std::vector<int> cell_line(header.n_strata(), 0);
  for (RawRow &row : raw) {
    StratumKey key;
    key.sex = level_index(header.sex_levels, row.sex);
    key.age = level_index(header.age_levels, row.age);
    key.year = level_index(header.year_levels, row.year);
    key.region = level_index(header.region_levels, row.region);
    const std::size_t index = dataset.index_of(key);
    if (cells[index])
      fail("line " + std::to_string(row.line_no) + ": duplicate stratum (" +
           dataset.key_label(key) + "), first seen at line " +
           std::to_string(cell_line[index]));
    try {
      validate_row(header, key, row.counts, dataset.key_label(key));
    } catch (const validation_error &err) {
      fail("line " + std::to_string(row.line_no) + ": " + err.what());
    }
    cells[index] = std::move(row.counts);
    cell_line[index] = row.line_no;
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!cells[i])
      fail("missing stratum: " + dataset.key_label(dataset.key_of(i)));

  dataset.rows.reserve(cells.size());
  for (std::optional<StratumCounts> &cell : cells)
    dataset.rows.push_back(std::move(*cell));
  dataset.validate();
  return dataset;
}

void save_dataset(const StrataDataset &dataset, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write dataset file: " + path);
  save_dataset_csv(dataset, out);
}

void save_dataset_csv(const StrataDataset &dataset, std::ostream &out) {
  const DatasetHeader &header = dataset.header;
  for (int c = 0; c < n_fixed_columns; ++c)
    out << (c ? "," : "") << fixed_columns[c];
  for (const std::string &event : header.event_types)
    out << ",x_c_on_" << event << ",x_c_off_" << event << ",x_e_" << event;
  out << "\n";
  for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
    const StratumKey key = dataset.key_of(i);
    const StratumCounts &counts = dataset.rows[i];
    out << header.sex_levels[key.sex] << ',' << header.age_levels[key.age]
        << ',' << header.year_levels[key.year] << ','
        << header.region_levels[key.region] << ',' << counts.n_c << ','
        << counts.P << ',' << format_real(counts.t_on) << ','
        << format_real(counts.t_off) << ',' << format_real(counts.t_o) << ','
        << counts.x_o << ',' << format_real(counts.t_d);
    for (int e = 0; e < header.n_events(); ++e)
      out << ',' << counts.x_c[e][status_on] << ',' << counts.x_c[e][status_off]
          << ',' << counts.x_e[e];
    out << "\n";
  }
}

}  // namespace mpep
