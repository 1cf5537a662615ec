#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpep/sampler.hpp"

namespace mpep {

// Shared command plumbing: artifact directory plus sampler settings.
struct CommandOptions {
  std::string out_dir = "mpep-out";
  SamplerConfig sampler;
};

// Each command returns an exit code per the shared contract (errors.hpp):
// 0 success, 2 input error, 3 convergence gate failure (artifacts are still
// written), 4 numerical failure.

// Full joint fit: draws, summaries, yearly table, deviance report, manifest.
int cmd_fit(const std::string &dataset_path, const std::string &config_path,
            const CommandOptions &opts);

// Fits several configs on one dataset and tabulates ResDev/pD/DIC plus the
// dispersion and inflation posteriors per sub-model.
int cmd_compare(const std::string &dataset_path,
                const std::vector<std::string> &config_paths,
                const CommandOptions &opts);

// Node splitting over the two event sources: single-source fits, the joint
// fit, per-year consistency p-values, and optionally a bias-adjusted joint
// refit (`bias_event` names the source whose extra counts get bias terms).
int cmd_consistency(const std::string &dataset_path,
                    const std::string &config_path, const CommandOptions &opts,
                    const std::string &bias_event = "");

// Forward selection over a candidate-term file; writes the selected config
// and the full trace.
int cmd_select(const std::string &dataset_path, const std::string &config_path,
               const std::string &candidates_path, const CommandOptions &opts);

// Draws a synthetic dataset from a truth file.
int cmd_simulate(const std::string &config_path, const std::string &truth_path,
                 std::uint64_t seed, const std::string &out_csv);

// Codes per-person reimbursement dates into treatment episodes.
int cmd_episodes(const std::string &reimbursements_path,
                 long long followup_start, long long followup_end,
                 const std::string &out_dir);

}  // namespace mpep
