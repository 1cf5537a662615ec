#include "mpep/model.hpp"

#include <cmath>

#include "mpep/errors.hpp"
#include "mpep/survival.hpp"

namespace mpep {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double log1pexp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_binomial_coefficient(long long n, long long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double normal_lpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

}  // namespace

Model::Model(StrataDataset dataset, ModelConfig config)
    : dataset_(std::move(dataset)), config_(std::move(config)) {
  dataset_.validate();
  config_.validate();
  design_ = build_design(config_, dataset_);
  index_ = ParameterIndex(config_, design_, dataset_);

  for (const std::string &event : config_.event_types)
    group_names_.push_back("on:" + event);
  for (const std::string &event : config_.event_types)
    group_names_.push_back("off:" + event);
  group_names_.push_back("oce");
  for (const std::string &event : config_.event_types)
    group_names_.push_back("extra:" + event);

  binom_const_.resize(dataset_.n_strata());
  for (std::size_t j = 0; j < dataset_.n_strata(); ++j)
    binom_const_[j] =
        log_binomial_coefficient(dataset_.rows[j].P, dataset_.rows[j].n_c);

  bias_param_.assign(config_.event_types.size(),
                     std::vector<int>(dataset_.n_strata(), -1));
  for (std::size_t cell = 0; cell < design_.bias_cells.size(); ++cell) {
    const auto &[event, stratum] = design_.bias_cells[cell];
    bias_param_[event][stratum] = index_.bias_offset(cell);
  }

  const DatasetHeader &header = dataset_.header;
  year_population_.assign(header.n_year(), 0.0);
  for (std::size_t j = 0; j < dataset_.n_strata(); ++j)
    year_population_[dataset_.key_of(j).year] +=
        static_cast<double>(dataset_.rows[j].P);

  for (std::size_t j = 0; j < dataset_.n_strata(); ++j) {
    std::string cell = "[";
    const StratumKey key = dataset_.key_of(j);
    cell += header.sex_levels[key.sex] + ";" + header.age_levels[key.age] +
            ";" + header.year_levels[key.year] + ";" +
            header.region_levels[key.region] + "]";
    derived_names_.push_back("Prev_c" + cell);
  }
  for (std::size_t j = 0; j < dataset_.n_strata(); ++j)
    derived_names_.push_back("Prev_e" + derived_names_[j].substr(6));
  for (std::size_t j = 0; j < dataset_.n_strata(); ++j)
    derived_names_.push_back("N" + derived_names_[j].substr(6));
  for (const std::string &year : header.year_levels)
    derived_names_.push_back("N_year[" + year + "]");
  for (const std::string &year : header.year_levels)
    derived_names_.push_back("prev_year[" + year + "]");
}

double Model::log_posterior(const std::vector<double> &q, Exec exec) const {
  return eval_core(q.data(), nullptr, nullptr, nullptr, exec);
}

double Model::log_posterior_grad(const std::vector<double> &q,
                                 std::vector<double> &grad, Exec exec) const {
  grad.assign(index_.size(), 0.0);
  return eval_core(q.data(), grad.data(), nullptr, nullptr, exec);
}

EvalResult Model::evaluate(const std::vector<double> &q, Exec exec,
                           std::vector<PointRecord> *points) const {
  EvalResult result;
  if (points) points->assign(n_points(), PointRecord{});
  result.log_post = eval_core(q.data(), nullptr, points ? points->data() : nullptr,
                              &result.log_lik, exec);
  return result;
}

// Shared evaluation core.  Likelihood terms are accumulated over fixed
// stratum blocks so the reduction order (and hence the floating-point
// result) is identical for serial and parallel execution.
double Model::eval_core(const double *q, double *grad, PointRecord *points,
                        double *log_lik_out, Exec exec) const {
  const int S = n_strata();
  const int E = n_events();
  const int n = index_.size();
  const int n_blocks = par::block_count(S);

  // Per-block gradient buffers keep the combine order fixed.
  std::vector<double> block_grad;
  if (grad) block_grad.assign(static_cast<std::size_t>(n_blocks) * n, 0.0);

  const int pm_off = index_.pmatch_offset();
  const double pm = pm_off >= 0 ? logistic(q[pm_off]) : 1.0;
  const bool pmatch_on = pm_off >= 0;

  // Family parameters per sub-model (events then exit), on natural scale.
  std::vector<double> theta(E + 1, 1.0), pi(E + 1, 0.0);
  for (int r = 0; r <= E; ++r) {
    const RegressionParams &rp = index_.regression(r);
    if (rp.log_theta >= 0) theta[r] = std::exp(q[rp.log_theta]);
    if (rp.logit_pi >= 0) pi[r] = logistic(q[rp.logit_pi]);
  }

  long long floored = 0, prev_ge1 = 0;

  const double log_lik = par::blocked_sum(S, exec, [&](int block, int j_begin,
                                                       int j_end) {
    double *G = grad ? block_grad.data() + static_cast<std::size_t>(block) * n
                     : nullptr;
    double sum = 0.0;

    auto eta_for = [&](const RegressionDesign &d, const RegressionParams &rp,
                       int row) {
      double eta = 0.0;
      for (int c : d.rows[row].columns) eta += q[rp.beta + c];
      for (std::size_t b = 0; b < d.blocks.size(); ++b) {
        const int level = d.rows[row].block_level[b];
        if (level >= 0)
          eta += std::exp(q[rp.block_u[b]]) * q[rp.block_z[b] + level];
      }
      return eta;
    };
    // Adds g = d(loglik)/d(eta) into the row's coefficients and RE values.
    auto add_eta_grad = [&](const RegressionDesign &d, const RegressionParams &rp,
                            int row, double g) {
      for (int c : d.rows[row].columns) G[rp.beta + c] += g;
      for (std::size_t b = 0; b < d.blocks.size(); ++b) {
        const int level = d.rows[row].block_level[b];
        if (level < 0) continue;
        const double sigma = std::exp(q[rp.block_u[b]]);
        const double z = q[rp.block_z[b] + level];
        G[rp.block_z[b] + level] += g * sigma;
        G[rp.block_u[b]] += g * sigma * z;
      }
    };
    // Count term under sub-model r (an event index or E for the exit model).
    // Returns d(loglik)/d(mu) and accumulates the family-parameter gradient.
    auto count_term = [&](long long x, double mu, int r, int point) {
      const Family family = r < E ? config_.event_families[r] : config_.exit_family;
      if (points && point >= 0)
        points[point] = PointRecord{x, mu, theta[r], pi[r], family, 0.0};
      if (!(mu > 0.0)) {
        if (x == 0 && mu == 0.0) return 0.0;  // exact zero expectation, zero count
        sum += neg_inf;
        if (points && point >= 0) points[point].log_lik = neg_inf;
        return 0.0;
      }
      double ll, g = 0.0;
      if (grad) {
        CountGrad cg;
        ll = log_lik_count_grad(x, mu, family, theta[r], pi[r], cg);
        g = cg.d_mu;
        const RegressionParams &rp = index_.regression(r);
        if (rp.log_theta >= 0) G[rp.log_theta] += cg.d_theta * theta[r];
        if (rp.logit_pi >= 0)
          G[rp.logit_pi] += cg.d_pi * pi[r] * (1.0 - pi[r]);
      } else {
        ll = log_lik_count(x, mu, family, theta[r], pi[r]);
      }
      sum += ll;
      if (points && point >= 0) points[point].log_lik = ll;
      return g;
    };

    std::vector<double> lambda_on(E), lambda_off(E);
    const int exit_r = index_.exit_regression();
    const int prev_r = index_.prevalence_regression();
    const RegressionParams &rp_exit = index_.regression(exit_r);
    const RegressionParams &rp_prev = index_.regression(prev_r);

    for (int j = j_begin; j < j_end; ++j) {
      const StratumCounts &d = dataset_.rows[j];
      const double P = static_cast<double>(d.P);

      // Cohort event terms, by event and treatment status.
      for (int e = 0; e < E; ++e) {
        const RegressionDesign &dg = design_.event_rates[e];
        const RegressionParams &rp = index_.regression(e);
        for (int s = 0; s < 2; ++s) {
          const int row = j * 2 + s;
          const double lambda = std::exp(eta_for(dg, rp, row));
          (s == status_on ? lambda_on[e] : lambda_off[e]) = lambda;
          const double t = s == status_on ? d.t_on : d.t_off;
          const double mu = pm * lambda * t;
          const int point = (s == status_on ? e : E + e) * S + j;
          const double g = count_term(d.x_c[e][s], mu, e, point);
          if (grad && g != 0.0) {
            add_eta_grad(dg, rp, row, g * mu);
            if (pmatch_on) G[pm_off] += g * mu * (1.0 - pm);
          }
        }
      }

      // Other-cause exits.
      const double lambda_o = std::exp(eta_for(design_.exit, rp_exit, j));
      {
        const double mu = lambda_o * d.t_o;
        const double g = count_term(d.x_o, mu, E, 2 * E * S + j);
        if (grad && g != 0.0) add_eta_grad(design_.exit, rp_exit, j, g * mu);
      }

      // Prevalence components and the extra population's time at risk.
      const double eta_p = eta_for(design_.prevalence, rp_prev, j);
      const double pe = logistic(eta_p);
      const double psi = q[index_.prevc_offset(j)];
      const double pc = logistic(psi);
      if (pc + pe >= 1.0) ++prev_ge1;
      const double n_e = pe * P;
      const double diff = n_e > d.t_d ? n_e - d.t_d : 0.0;
      if (n_e < d.t_d) ++floored;
      const double R = rmst(lambda_o);
      const double t_e = d.t_d + diff * R;

      // Extra (unlinked) event terms.
      for (int e = 0; e < E; ++e) {
        const int bias_off = bias_param_[e][j];
        const double eb = bias_off >= 0 ? std::exp(q[bias_off]) : 1.0;
        const double A = lambda_off[e] * t_e;
        const double B = pmatch_on
                             ? lambda_off[e] * d.t_off + lambda_on[e] * d.t_on
                             : 0.0;
        const double mu = pmatch_on ? pm * A * eb + (1.0 - pm) * B : A * eb;
        const double g = count_term(d.x_e[e], mu, e, (2 * E + 1 + e) * S + j);
        if (grad && g != 0.0) {
          const RegressionDesign &dg = design_.event_rates[e];
          const RegressionParams &rp = index_.regression(e);
          const double pm_part = pmatch_on ? pm : 1.0;
          // Through lambda_off: both the extra expectation and the
          // unlinked-cohort part scale with it.
          double d_eta_off = pm_part * A * eb;
          if (pmatch_on) d_eta_off += (1.0 - pm) * lambda_off[e] * d.t_off;
          add_eta_grad(dg, rp, j * 2 + status_off, g * d_eta_off);
          if (pmatch_on)
            add_eta_grad(dg, rp, j * 2 + status_on,
                         g * (1.0 - pm) * lambda_on[e] * d.t_on);
          if (bias_off >= 0) G[bias_off] += g * pm_part * A * eb;
          if (pmatch_on)
            G[pm_off] += g * (A * eb - B) * pm * (1.0 - pm);
          // Through t_e: the other-cause exit rate shortens survival, and
          // the extra prevalence scales the population at risk.
          if (diff > 0.0) {
            const double d_te = g * pm_part * lambda_off[e] * eb;
            add_eta_grad(design_.exit, rp_exit, j,
                         d_te * diff * rmst_deriv(lambda_o) * lambda_o);
            add_eta_grad(design_.prevalence, rp_prev, j,
                         d_te * R * P * pe * (1.0 - pe));
          }
        }
      }

      // Binomial cohort-size term.
      {
        const double ll = binom_const_[j] -
                          static_cast<double>(d.n_c) * log1pexp(-psi) -
                          static_cast<double>(d.P - d.n_c) * log1pexp(psi);
        sum += ll;
        if (grad) G[index_.prevc_offset(j)] += static_cast<double>(d.n_c) - P * pc;
      }
    }
    return sum;
  });

  if (grad)
    for (int b = 0; b < n_blocks; ++b) {
      const double *G = block_grad.data() + static_cast<std::size_t>(b) * n;
      for (int i = 0; i < n; ++i) grad[i] += G[i];
    }

  floored_ne_.fetch_add(floored, std::memory_order_relaxed);
  prev_sum_ge1_.fetch_add(prev_ge1, std::memory_order_relaxed);
  if (log_lik_out) *log_lik_out = log_lik;
  return log_lik + log_priors(q, grad);
}

double Model::log_priors(const double *q, double *grad) const {
  const PriorSettings &priors = config_.priors;
  auto normal_term = [&](int i, const NormalPrior &prior) {
    if (grad) grad[i] += -(q[i] - prior.mean) / (prior.sd * prior.sd);
    return normal_lpdf(q[i], prior.mean, prior.sd);
  };
  double lp = 0.0;
  const std::vector<ParamKind> &kinds = index_.kinds();
  for (int i = 0; i < index_.size(); ++i) {
    switch (kinds[i]) {
      case ParamKind::coef:
        lp += normal_term(i, priors.fixed_effect);
        break;
      case ParamKind::re_raw:
        lp += normal_lpdf(q[i], 0.0, 1.0);
        if (grad) grad[i] += -q[i];
        break;
      case ParamKind::re_log_scale: {
        // Half-normal on sigma = exp(u), with the log|d sigma/d u| Jacobian.
        const double sd = priors.re_scale_sd;
        const double sigma = std::exp(q[i]);
        lp += std::log(2.0) + normal_lpdf(sigma, 0.0, sd) + q[i];
        if (grad) grad[i] += 1.0 - sigma * sigma / (sd * sd);
        break;
      }
      case ParamKind::log_theta:
        lp += normal_term(i, priors.log_theta);
        break;
      case ParamKind::logit_pi:
        lp += normal_term(i, priors.logit_pi);
        break;
      case ParamKind::bias:
        lp += normal_term(i, priors.bias);
        break;
      case ParamKind::pmatch_logit:
        lp += normal_term(i, *priors.pmatch_logit);
        break;
      case ParamKind::prevc_logit:
        lp += normal_term(i, priors.prevc_logit);
        break;
    }
  }
  return lp;
}

std::string Model::explain_nonfinite(const std::vector<double> &q) const {
  for (int i = 0; i < index_.size(); ++i)
    if (!std::isfinite(q[i]))
      return "parameter '" + index_.names()[i] + "' is not finite";
  std::vector<PointRecord> points;
  const EvalResult result = evaluate(q, Exec::serial, &points);
  if (std::isfinite(result.log_post)) return "";
  const int S = n_strata();
  for (int p = 0; p < n_points(); ++p)
    if (!std::isfinite(points[p].log_lik)) {
      const StratumKey key = dataset_.key_of(p % S);
      return "count term " + group_names_[p / S] + " (" +
             dataset_.key_label(key) + "): x = " + std::to_string(points[p].x) +
             ", mu = " + std::to_string(points[p].mu);
    }
  for (int j = 0; j < S; ++j) {
    const double psi = q[index_.prevc_offset(j)];
    const StratumCounts &d = dataset_.rows[j];
    const double ll = binom_const_[j] -
                      static_cast<double>(d.n_c) * log1pexp(-psi) -
                      static_cast<double>(d.P - d.n_c) * log1pexp(psi);
    if (!std::isfinite(ll))
      return "binomial cohort term (" + dataset_.key_label(dataset_.key_of(j)) +
             ")";
  }
  return "prior evaluation is not finite";
}

std::vector<double> Model::initial_point(Rng &rng, double jitter) const {
  std::vector<double> q(index_.size());
  for (double &value : q) value = rng.uniform(-jitter, jitter);
  return q;
}

void Model::derived_quantities(const std::vector<double> &q, double *out) const {
  const int S = n_strata();
  const int Y = n_years();
  std::vector<double> year_n(Y, 0.0);
  for (int j = 0; j < S; ++j) {
    const double pc = logistic(q[index_.prevc_offset(j)]);
    double eta = 0.0;
    const RegressionDesign &dg = design_.prevalence;
    const RegressionParams &rp = index_.regression(index_.prevalence_regression());
    for (int c : dg.rows[j].columns) eta += q[rp.beta + c];
    for (std::size_t b = 0; b < dg.blocks.size(); ++b) {
      const int level = dg.rows[j].block_level[b];
      if (level >= 0)
        eta += std::exp(q[rp.block_u[b]]) * q[rp.block_z[b] + level];
    }
    const double pe = logistic(eta);
    const double N = (pc + pe) * static_cast<double>(dataset_.rows[j].P);
    out[j] = pc;
    out[S + j] = pe;
    out[2 * S + j] = N;
    year_n[dataset_.key_of(j).year] += N;
  }
  for (int y = 0; y < Y; ++y) {
    out[3 * S + y] = year_n[y];
    out[3 * S + Y + y] = year_n[y] / year_population_[y];
  }
}

}  // namespace mpep
