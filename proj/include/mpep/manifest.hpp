#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpep/draws.hpp"

namespace mpep {

// Provenance record written next to every command's artifacts: inputs are
// content-hashed so a rerun can be checked against the exact same data.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  nlohmann::ordered_json sampler = nlohmann::ordered_json::object();
  std::string started;
  std::string finished;
  bool gate_evaluated = false;
  ConvergenceReport gate;
  std::vector<std::string> warnings;

  void add_input(const std::string &label, const std::string &path);
  void set_sampler(const SamplerConfig &config);
  nlohmann::ordered_json to_json() const;
  void write(const std::string &path) const;
};

// FNV-1a 64-bit hash of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string &path);
// Current UTC time, ISO 8601.
std::string utc_timestamp();

}  // namespace mpep
