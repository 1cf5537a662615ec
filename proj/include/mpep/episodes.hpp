#pragma once

#include <vector>

namespace mpep {

// One continuous treatment episode in integer days, both endpoints included.
struct TreatmentEpisode {
  long long start = 0;
  long long end = 0;

  bool operator==(const TreatmentEpisode &other) const = default;
};

struct EpisodeCoding {
  std::vector<TreatmentEpisode> episodes;
  long long t_on = 0;   // days inside episodes within the follow-up window
  long long t_off = 0;  // remaining follow-up days
};

// Codes reimbursement dates into treatment episodes.  Each reimbursement day
// d opens a provisional episode [d-60, d-12]; consecutive reimbursement dates
// separated by fewer than 62 days belong to one continuous episode spanning
// from the first provisional start to the last provisional end.  Episodes are
// clipped to the closed follow-up window [followup_start, followup_end].
// Requires strictly increasing reimbursement days, none past followup_end.
EpisodeCoding code_treatment_episodes(const std::vector<long long> &reimbursement_days,
                                      long long followup_end,
                                      long long followup_start = 0);

}  // namespace mpep
