#include "mpep/episodes.hpp"

#include <algorithm>
#include <string>

#include "mpep/errors.hpp"

namespace mpep {

namespace {
constexpr long long episode_lead = 60;   // episode opens this many days before a reimbursement
constexpr long long episode_lag = 12;    // and closes this many days before it
constexpr long long merge_gap = 62;      // reimbursement dates closer than this share an episode
}  // namespace

EpisodeCoding code_treatment_episodes(const std::vector<long long> &reimbursement_days,
                                      long long followup_end,
                                      long long followup_start) {
  if (reimbursement_days.empty())
    throw validation_error("no reimbursement days given");
  if (followup_end < followup_start)
    throw validation_error("follow-up window is empty");
  for (std::size_t i = 0; i < reimbursement_days.size(); ++i) {
    if (i > 0 && reimbursement_days[i] <= reimbursement_days[i - 1])
      throw validation_error("reimbursement days must be strictly increasing (day " +
                             std::to_string(reimbursement_days[i]) + " follows day " +
                             std::to_string(reimbursement_days[i - 1]) + ")");
    if (reimbursement_days[i] > followup_end)
      throw validation_error("reimbursement day " +
                             std::to_string(reimbursement_days[i]) +
                             " lies past the end of follow-up");
  }

  EpisodeCoding coding;
  TreatmentEpisode current{reimbursement_days[0] - episode_lead,
                           reimbursement_days[0] - episode_lag};
  for (std::size_t i = 1; i < reimbursement_days.size(); ++i) {
    const long long gap = reimbursement_days[i] - reimbursement_days[i - 1];
    if (gap < merge_gap) {
      current.end = reimbursement_days[i] - episode_lag;
    } else {
      coding.episodes.push_back(current);
      current = {reimbursement_days[i] - episode_lead,
                 reimbursement_days[i] - episode_lag};
    }
  }
  coding.episodes.push_back(current);

  // Clip to the follow-up window and accumulate on-treatment days.
  std::vector<TreatmentEpisode> clipped;
  for (const TreatmentEpisode &ep : coding.episodes) {
    const long long start = std::max(ep.start, followup_start);
    const long long end = std::min(ep.end, followup_end);
    if (start > end) continue;
    clipped.push_back({start, end});
    coding.t_on += end - start + 1;
  }
  coding.episodes = std::move(clipped);
  coding.t_off = (followup_end - followup_start + 1) - coding.t_on;
  return coding;
}

}  // namespace mpep
