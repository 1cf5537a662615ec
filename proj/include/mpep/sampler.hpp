#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mpep/parallel.hpp"
#include "mpep/rng.hpp"

namespace mpep {

// Differentiable unnormalized log-density over R^n.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual int dim() const = 0;
  // Returns log p(q) and fills the gradient (resized by the caller).
  virtual double value_grad(const std::vector<double> &q,
                            std::vector<double> &grad) const = 0;
};

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 1;
  double init_jitter = 1.0;
  int init_retries = 100;
  Exec exec = Exec::parallel;  // parallelism across chains
};

struct ChainResult {
  std::vector<std::vector<double>> draws;  // samples x dim
  long long divergences = 0;               // post-warmup
  long long max_depth_hits = 0;            // post-warmup
  double step_size = 0.0;
  double accept_rate = 0.0;                // mean post-warmup accept statistic
  std::vector<double> inv_metric;          // diagonal of the inverse metric
};

struct SampleResult {
  std::vector<ChainResult> chains;

  long long total_divergences() const {
    long long total = 0;
    for (const ChainResult &chain : chains) total += chain.divergences;
    return total;
  }
};

// Draws an initial point; called with the chain's own RNG.
using InitFn = std::function<std::vector<double>(Rng &)>;

// Runs the configured number of no-U-turn sampler chains with diagonal
// metric adaptation (windowed warmup) and dual-averaging step-size tuning.
// Each chain owns an RNG stream derived from (seed, chain index), so results
// are independent of how chains are scheduled across threads.
SampleResult run_chains(const LogDensity &target, const SamplerConfig &config,
                        const InitFn &init);

// Default initialization: independent uniform(-jitter, jitter) coordinates.
InitFn uniform_init(int dim, double jitter);

}  // namespace mpep
