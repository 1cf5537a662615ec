#pragma once

#include <string>
#include <vector>

#include "mpep/config.hpp"
#include "mpep/design.hpp"

namespace mpep {

// What a sampled coordinate is, which determines its prior and its
// reporting transform.
enum class ParamKind {
  coef,          // regression coefficient
  re_raw,        // non-centered RE value, standard normal
  re_log_scale,  // log of an RE scale
  log_theta,     // log-dispersion of an NB-type family
  logit_pi,      // logit zero-inflation of a ZI-type family
  bias,          // reporting-bias term of one flagged extra cell
  pmatch_logit,  // logit of the record-linkage match probability
  prevc_logit,   // per-stratum logit cohort prevalence
};

// Transform from the unconstrained sampling scale to the reporting scale.
enum class Xform { identity, exp, logistic };

Xform xform_for(ParamKind kind);
double apply_xform(Xform xform, double value);

// Offsets of one regression's parameters within the flat vector.
struct RegressionParams {
  int beta = -1;               // first fixed coefficient (n_fixed of them)
  std::vector<int> block_z;    // first raw value per RE block
  std::vector<int> block_u;    // log-scale per RE block
  int log_theta = -1;          // -1 when the family has none
  int logit_pi = -1;
};

// Flat layout of every sampled parameter: per-event regressions, then the
// exit and prevalence regressions, bias cells, pmatch, and the per-stratum
// cohort prevalence logits.  The layout partitions the vector exactly.
class ParameterIndex {
 public:
  ParameterIndex() = default;
  ParameterIndex(const ModelConfig &config, const Design &design,
                 const StrataDataset &dataset);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string> &names() const { return names_; }
  const std::vector<ParamKind> &kinds() const { return kinds_; }
  Xform xform(int i) const { return xform_for(kinds_[i]); }

  // Regression r: events in config order, then exit, then prevalence.
  int n_regressions() const { return static_cast<int>(regressions_.size()); }
  int exit_regression() const { return n_regressions() - 2; }
  int prevalence_regression() const { return n_regressions() - 1; }
  const RegressionParams &regression(int r) const { return regressions_[r]; }

  int bias_offset(std::size_t cell) const {
    return bias_ + static_cast<int>(cell);
  }
  int n_bias() const { return n_bias_; }
  int pmatch_offset() const { return pmatch_; }  // -1 when disabled
  int prevc_offset(std::size_t stratum) const {
    return prevc_ + static_cast<int>(stratum);
  }

 private:
  std::vector<std::string> names_;
  std::vector<ParamKind> kinds_;
  std::vector<RegressionParams> regressions_;
  int bias_ = -1;
  int n_bias_ = 0;
  int pmatch_ = -1;
  int prevc_ = -1;
};

}  // namespace mpep
