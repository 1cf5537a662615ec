#include "mpep/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "mpep/errors.hpp"

namespace mpep {

std::string file_hash_hex(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot read file for hashing: " + path);
  std::uint64_t hash = 14695981039346656037ULL;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buffer))) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  return hex;
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::string &label, const std::string &path) {
  inputs[label] = {{"path", path}, {"fnv1a64", file_hash_hex(path)}};
}

void RunManifest::set_sampler(const SamplerConfig &config) {
  seed = config.seed;
  sampler = {{"chains", config.chains},
             {"warmup", config.warmup},
             {"samples", config.samples},
             {"target_accept", config.target_accept},
             {"max_treedepth", config.max_treedepth},
             {"init_jitter", config.init_jitter}};
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json out;
  out["command"] = command;
  out["inputs"] = inputs;
  out["seed"] = seed;
  if (!sampler.empty()) out["sampler"] = sampler;
  out["started"] = started;
  out["finished"] = finished;
  if (gate_evaluated) {
    out["convergence"] = {{"pass", gate.pass},
                          {"max_rhat", gate.max_rhat},
                          {"worst_rhat_param", gate.worst_rhat_param},
                          {"min_ess", gate.min_ess},
                          {"worst_ess_param", gate.worst_ess_param},
                          {"rhat_limit", gate.rhat_limit},
                          {"ess_floor", gate.ess_floor}};
  }
  out["warnings"] = warnings;
  return out;
}

void RunManifest::write(const std::string &path) const {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write manifest: " + path);
  out << to_json().dump(2) << '\n';
  if (!out) throw validation_error("failed writing manifest: " + path);
}

}  // namespace mpep
