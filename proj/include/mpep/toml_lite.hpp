#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace mpep {

// Parses the TOML subset used by config files into a JSON tree: tables,
// arrays of tables, dotted keys, inline tables, arrays, basic strings,
// integers, floats, and booleans.  Dates and multi-line strings are not
// supported.  Throws validation_error with a line number on malformed input.
nlohmann::ordered_json parse_toml(const std::string &text,
                                  const std::string &source_name = "<toml>");

nlohmann::ordered_json parse_toml_file(const std::string &path);

// Serializes a JSON tree of the same shape back to TOML text.
std::string to_toml(const nlohmann::ordered_json &root);

}  // namespace mpep
