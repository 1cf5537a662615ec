#include "mpep/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mpep/errors.hpp"

namespace mpep {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();
constexpr double divergence_threshold = 1000.0;

double log_sum_exp(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Phase-space point with its cached target value and gradient.
struct State {
  std::vector<double> q, p, grad;
  double logp = neg_inf;
};

// Summary of a trajectory segment: boundary momenta in integration order,
// summed momentum, total weight, and the multinomially chosen proposal.
struct Tree {
  double log_weight = neg_inf;
  std::vector<double> rho;
  std::vector<double> p_beg, p_end;
  std::vector<double> p_sharp_beg, p_sharp_end;
  std::vector<double> proposal;
  double proposal_logp = neg_inf;
};

struct TransitionStats {
  double sum_accept = 0.0;
  long n_leaves = 0;
  bool divergent = false;
  int depth = 0;
};

struct StepsizeAdapter {
  double mu = 0.0, s_bar = 0.0, x_bar = 0.0;
  long counter = 0;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    s_bar = 0.0;
    x_bar = 0.0;
    counter = 0;
  }
  double learn(double accept, double target) {
    ++counter;
    const double eta = 1.0 / (static_cast<double>(counter) + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (target - accept);
    const double x = mu - s_bar * std::sqrt(static_cast<double>(counter)) / gamma;
    const double x_eta = std::pow(static_cast<double>(counter), -kappa);
    x_bar = (1.0 - x_eta) * x_bar + x_eta * x;
    return std::exp(x);
  }
  double completed() const { return std::exp(x_bar); }
};

// Streaming mean/variance for metric estimation.
struct Welford {
  long n = 0;
  std::vector<double> mean, m2;

  explicit Welford(int dim) : mean(dim, 0.0), m2(dim, 0.0) {}
  void add(const std::vector<double> &x) {
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(n);
      m2[i] += d * (x[i] - mean[i]);
    }
  }
  void reset() {
    n = 0;
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
  }
};

class NutsChain {
 public:
  NutsChain(const LogDensity &target, const SamplerConfig &config, int chain_id)
      : target_(target),
        config_(config),
        rng_(config.seed, static_cast<std::uint64_t>(chain_id)),
        inv_metric_(target.dim(), 1.0) {}

  ChainResult run(const InitFn &init) {
    initialize(init);
    step_size_ = find_initial_step_size();
    adapter_.restart(step_size_);

    // Stan-style windowed warmup: a fast start, doubling slow windows for
    // the metric, and a fast tail for the final step-size run-in.
    int init_buffer = 75, term_buffer = 50, base_window = 25;
    if (config_.warmup < init_buffer + term_buffer + base_window) {
      init_buffer = static_cast<int>(0.15 * config_.warmup);
      term_buffer = static_cast<int>(0.10 * config_.warmup);
      base_window = config_.warmup - init_buffer - term_buffer;
    }
    const int slow_end = config_.warmup - term_buffer;
    int window_size = base_window;
    int window_end = init_buffer + window_size;
    if (window_end + 2 * window_size > slow_end) window_end = slow_end;
    Welford welford(target_.dim());

    for (int iter = 0; iter < config_.warmup; ++iter) {
      const TransitionStats stats = transition();
      step_size_ = adapter_.learn(
          stats.n_leaves > 0 ? stats.sum_accept / stats.n_leaves : 0.0,
          config_.target_accept);
      const bool in_slow = iter >= init_buffer && iter < slow_end &&
                           base_window > 0;
      if (in_slow) {
        welford.add(current_.q);
        if (iter + 1 == window_end) {
          update_metric(welford);
          welford.reset();
          window_size *= 2;
          window_end += window_size;
          if (window_end + 2 * window_size > slow_end) window_end = slow_end;
          step_size_ = find_initial_step_size();
          adapter_.restart(step_size_);
        }
      }
    }
    if (config_.warmup > 0) step_size_ = adapter_.completed();

    ChainResult result;
    result.inv_metric = inv_metric_;
    result.step_size = step_size_;
    result.draws.reserve(config_.samples);
    double accept_total = 0.0;
    for (int iter = 0; iter < config_.samples; ++iter) {
      const TransitionStats stats = transition();
      result.draws.push_back(current_.q);
      if (stats.divergent) ++result.divergences;
      if (stats.depth >= config_.max_treedepth) ++result.max_depth_hits;
      accept_total +=
          stats.n_leaves > 0 ? stats.sum_accept / stats.n_leaves : 0.0;
    }
    result.accept_rate =
        config_.samples > 0 ? accept_total / config_.samples : 0.0;
    return result;
  }

 private:
  void initialize(const InitFn &init) {
    for (int attempt = 0; attempt < config_.init_retries; ++attempt) {
      std::vector<double> q = init(rng_);
      if (static_cast<int>(q.size()) != target_.dim())
        throw std::invalid_argument("initial point has the wrong dimension");
      std::vector<double> grad(q.size());
      const double logp = target_.value_grad(q, grad);
      bool ok = std::isfinite(logp);
      for (double g : grad) ok = ok && std::isfinite(g);
      if (ok) {
        current_ = State{std::move(q), std::vector<double>(target_.dim(), 0.0),
                         std::move(grad), logp};
        return;
      }
    }
    throw numerical_error("failed to find a finite starting point after " +
                          std::to_string(config_.init_retries) + " attempts");
  }

  double kinetic(const std::vector<double> &p) const {
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      k += p[i] * p[i] * inv_metric_[i];
    return 0.5 * k;
  }

  void draw_momentum(std::vector<double> &p) {
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
  }

  // One leapfrog step in place; returns false when the target is not finite.
  bool leapfrog(State &z, double eps) {
    const int n = target_.dim();
    for (int i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
    for (int i = 0; i < n; ++i) z.q[i] += eps * inv_metric_[i] * z.p[i];
    z.logp = target_.value_grad(z.q, z.grad);
    if (!std::isfinite(z.logp)) return false;
    for (int i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
    return true;
  }

  std::vector<double> p_sharp(const std::vector<double> &p) const {
    std::vector<double> s(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s[i] = inv_metric_[i] * p[i];
    return s;
  }

  static double dot(const std::vector<double> &a, const std::vector<double> &b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    return d;
  }

  static std::vector<double> sum(const std::vector<double> &a,
                                 const std::vector<double> &b) {
    std::vector<double> s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
    return s;
  }

  static bool criterion(const std::vector<double> &p_sharp_a,
                        const std::vector<double> &p_sharp_b,
                        const std::vector<double> &rho) {
    return dot(p_sharp_a, rho) > 0.0 && dot(p_sharp_b, rho) > 0.0;
  }

  // No-U-turn checks across two adjacent segments (in integration order),
  // including the boundary checks between them.
  static bool merge_ok(const Tree &first, const Tree &second) {
    const std::vector<double> rho = sum(first.rho, second.rho);
    return criterion(first.p_sharp_beg, second.p_sharp_end, rho) &&
           criterion(first.p_sharp_beg, second.p_sharp_beg,
                     sum(first.rho, second.p_beg)) &&
           criterion(first.p_sharp_end, second.p_sharp_end,
                     sum(first.p_end, second.rho));
  }

  static Tree flipped(Tree tree) {
    std::swap(tree.p_beg, tree.p_end);
    std::swap(tree.p_sharp_beg, tree.p_sharp_end);
    return tree;
  }

  // Builds a balanced subtree of 2^depth leapfrog steps extending z.
  bool build_tree(int depth, State &z, double eps, double h0, Tree &out,
                  TransitionStats &stats) {
    if (depth == 0) {
      const bool finite = leapfrog(z, eps);
      ++stats.n_leaves;
      double delta = neg_inf;
      if (finite) delta = h0 - (-z.logp + kinetic(z.p));
      if (!std::isfinite(delta)) delta = neg_inf;
      stats.sum_accept += std::min(1.0, std::exp(delta));
      if (delta < -divergence_threshold) {
        stats.divergent = true;
        return false;
      }
      out.log_weight = delta;
      out.rho = z.p;
      out.p_beg = z.p;
      out.p_end = z.p;
      out.p_sharp_beg = p_sharp(z.p);
      out.p_sharp_end = out.p_sharp_beg;
      out.proposal = z.q;
      out.proposal_logp = z.logp;
      return true;
    }
    Tree first, second;
    if (!build_tree(depth - 1, z, eps, h0, first, stats)) return false;
    if (!build_tree(depth - 1, z, eps, h0, second, stats)) return false;

    out.log_weight = log_sum_exp(first.log_weight, second.log_weight);
    // Multinomial choice between the halves.
    const double p_second = std::exp(second.log_weight - out.log_weight);
    if (rng_.uniform() < p_second) {
      out.proposal = std::move(second.proposal);
      out.proposal_logp = second.proposal_logp;
    } else {
      out.proposal = std::move(first.proposal);
      out.proposal_logp = first.proposal_logp;
    }
    out.rho = sum(first.rho, second.rho);
    out.p_beg = std::move(first.p_beg);
    out.p_sharp_beg = std::move(first.p_sharp_beg);
    out.p_end = std::move(second.p_end);
    out.p_sharp_end = std::move(second.p_sharp_end);
    Tree first_view;
    first_view.rho = std::move(first.rho);
    first_view.p_beg = out.p_beg;
    first_view.p_sharp_beg = out.p_sharp_beg;
    first_view.p_end = std::move(first.p_end);
    first_view.p_sharp_end = std::move(first.p_sharp_end);
    Tree second_view;
    second_view.rho = std::move(second.rho);
    second_view.p_beg = std::move(second.p_beg);
    second_view.p_sharp_beg = std::move(second.p_sharp_beg);
    second_view.p_end = out.p_end;
    second_view.p_sharp_end = out.p_sharp_end;
    return merge_ok(first_view, second_view);
  }

  TransitionStats transition() {
    TransitionStats stats;
    draw_momentum(current_.p);
    const double h0 = -current_.logp + kinetic(current_.p);

    Tree tree;
    tree.log_weight = 0.0;
    tree.rho = current_.p;
    tree.p_beg = current_.p;
    tree.p_end = current_.p;
    tree.p_sharp_beg = p_sharp(current_.p);
    tree.p_sharp_end = tree.p_sharp_beg;
    tree.proposal = current_.q;
    tree.proposal_logp = current_.logp;

    State fwd = current_, bck = current_;
    std::vector<double> sample_q = current_.q;
    double sample_logp = current_.logp;

    while (stats.depth < config_.max_treedepth) {
      const bool forward = rng_.next_u64() & 1;
      Tree subtree;
      const bool ok = build_tree(stats.depth, forward ? fwd : bck,
                                 forward ? step_size_ : -step_size_, h0,
                                 subtree, stats);
      if (!ok) break;
      ++stats.depth;

      // Biased progressive sampling favours the new subtree.
      if (subtree.log_weight > tree.log_weight ||
          rng_.uniform() < std::exp(subtree.log_weight - tree.log_weight)) {
        sample_q = subtree.proposal;
        sample_logp = subtree.proposal_logp;
      }
      tree.log_weight = log_sum_exp(tree.log_weight, subtree.log_weight);

      const bool keep_going = forward ? merge_ok(tree, subtree)
                                      : merge_ok(flipped(subtree), tree);
      tree.rho = sum(tree.rho, subtree.rho);
      if (forward) {
        tree.p_end = std::move(subtree.p_end);
        tree.p_sharp_end = std::move(subtree.p_sharp_end);
      } else {
        tree.p_beg = std::move(subtree.p_end);
        tree.p_sharp_beg = std::move(subtree.p_sharp_end);
      }
      if (!keep_going) break;
    }

    current_.q = std::move(sample_q);
    current_.logp = sample_logp;
    // Refresh the cached gradient at the accepted position.
    target_.value_grad(current_.q, current_.grad);
    return stats;
  }

  // Doubling/halving heuristic for a reasonable starting step size.
  double find_initial_step_size() {
    double eps = 1.0;
    State z = current_;
    z.p.assign(target_.dim(), 0.0);
    draw_momentum(z.p);
    const double h0 = -z.logp + kinetic(z.p);
    auto accept_for = [&](double trial_eps) {
      State probe = z;
      if (!leapfrog(probe, trial_eps)) return 0.0;
      const double h = -probe.logp + kinetic(probe.p);
      return std::isfinite(h) ? std::exp(h0 - h) : 0.0;
    };
    const bool increase = accept_for(eps) > 0.8;
    for (int i = 0; i < 100; ++i) {
      if (increase) {
        if (accept_for(eps * 2.0) <= 0.8 || eps >= 1e7) break;
        eps *= 2.0;
      } else {
        if (accept_for(eps) > 0.8 || eps <= 1e-10) break;
        eps *= 0.5;
      }
    }
    return eps;
  }

  void update_metric(const Welford &welford) {
    if (welford.n < 2) return;
    const double n = static_cast<double>(welford.n);
    for (std::size_t i = 0; i < inv_metric_.size(); ++i) {
      const double var = welford.m2[i] / (n - 1.0);
      // Regularize toward unit scale as Stan does.
      inv_metric_[i] =
          (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      if (!(inv_metric_[i] > 0.0)) inv_metric_[i] = 1e-3;
    }
  }

  const LogDensity &target_;
  const SamplerConfig &config_;
  Rng rng_;
  std::vector<double> inv_metric_;
  State current_;
  StepsizeAdapter adapter_;
  double step_size_ = 1.0;
};

}  // namespace

SampleResult run_chains(const LogDensity &target, const SamplerConfig &config,
                        const InitFn &init) {
  if (config.chains < 2)
    throw validation_error("sampler needs at least two chains");
  if (config.warmup < 150)
    throw validation_error("sampler warmup must be at least 150 iterations");
  if (config.samples < 1)
    throw validation_error("sampler needs at least one sampling iteration");
  SampleResult result;
  result.chains.resize(config.chains);
  std::vector<std::string> errors(config.chains);
#pragma omp parallel for schedule(dynamic) if (config.exec == Exec::parallel)
  for (int chain = 0; chain < config.chains; ++chain) {
    try {
      NutsChain runner(target, config, chain);
      result.chains[chain] = runner.run(init);
    } catch (const std::exception &err) {
      errors[chain] = err.what();
    }
  }
  for (const std::string &message : errors)
    if (!message.empty()) throw numerical_error(message);
  return result;
}

InitFn uniform_init(int dim, double jitter) {
  return [dim, jitter](Rng &rng) {
    std::vector<double> q(dim);
    for (double &value : q) value = rng.uniform(-jitter, jitter);
    return q;
  };
}

}  // namespace mpep
