// Benchmark of the posterior, gradient, and deviance kernels: the OpenMP
// blocked implementation against the serial reference on one synthetic
// dataset.  Both paths use the same fixed block decomposition, so results
// must agree bit for bit; the table reports timings and the max difference.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mpep/config.hpp"
#include "mpep/deviance.hpp"
#include "mpep/draws.hpp"
#include "mpep/model.hpp"
#include "mpep/rng.hpp"
#include "mpep/synthetic.hpp"

namespace {

mpep::ModelConfig bench_config() {
  using mpep::Factor;
  using mpep::Term;
  mpep::ModelConfig config;
  config.event_types = {"deaths", "clinic"};
  config.event_families = {mpep::Family::poisson, mpep::Family::nb};
  config.event_regressions.resize(2);
  for (auto &reg : config.event_regressions)
    reg.fixed = {Term{{Factor::treatment}}, Term{{Factor::sex}},
                 Term{{Factor::age}}, Term{{Factor::year}},
                 Term{{Factor::region}}};
  config.exit_regression.fixed = {Term{{Factor::sex}}, Term{{Factor::age}},
                                  Term{{Factor::year}},
                                  Term{{Factor::region}}};
  config.prevalence_regression.fixed = {Term{{Factor::sex}},
                                        Term{{Factor::age}},
                                        Term{{Factor::year}},
                                        Term{{Factor::region}}};
  config.dataset_options.deaths_event = "deaths";
  config.validate();
  return config;
}

nlohmann::json bench_truth() {
  nlohmann::json truth;
  truth["shape"] = {{"age", 5}, {"year", 6}, {"region", 4}};
  truth["population"] = 80000;
  truth["zero_unset"] = true;
  truth["prevc_logit_all"] = -4.0;
  truth["params"] = {{"deaths.intercept", std::log(0.03)},
                     {"deaths.treatment[on]", -0.7},
                     {"clinic.intercept", std::log(0.4)},
                     {"clinic.treatment[on]", -0.3},
                     {"clinic.theta", std::log(6.0)},
                     {"exit.intercept", std::log(0.05)},
                     {"prev.intercept", -5.5}};
  return truth;
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

struct BenchRow {
  std::string name;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  double max_diff = 0.0;
};

template <class Fn>
double time_best_of(int reps, Fn &&fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char **argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  const int n_draws = argc > 2 ? std::atoi(argv[2]) : 256;

  const mpep::ModelConfig config = bench_config();
  const mpep::StrataDataset dataset =
      mpep::generate_synthetic_json(config, bench_truth(), 20240u);
  mpep::Model model(dataset, config);

  std::printf("strata: %d   parameters: %d   data points: %d\n",
              model.n_strata(), model.n_params(), model.n_points());
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP: not enabled in this build\n");
#endif
  std::printf("repetitions: %d (best-of)   deviance draws: %d\n\n", reps,
              n_draws);

  mpep::Rng rng(7u, 0u);
  const std::vector<double> q0 = model.initial_point(rng, 0.5);
  std::vector<BenchRow> rows;

  {
    BenchRow row{"log_posterior"};
    double serial_value = 0.0, parallel_value = 0.0;
    row.serial_ms = time_best_of(
        reps, [&] { serial_value = model.log_posterior(q0, mpep::Exec::serial); });
    row.parallel_ms = time_best_of(reps, [&] {
      parallel_value = model.log_posterior(q0, mpep::Exec::parallel);
    });
    row.max_diff = std::fabs(serial_value - parallel_value);
    rows.push_back(row);
  }

  {
    BenchRow row{"log_posterior_grad"};
    std::vector<double> gs(q0.size()), gp(q0.size());
    row.serial_ms = time_best_of(
        reps, [&] { model.log_posterior_grad(q0, gs, mpep::Exec::serial); });
    row.parallel_ms = time_best_of(
        reps, [&] { model.log_posterior_grad(q0, gp, mpep::Exec::parallel); });
    for (std::size_t i = 0; i < gs.size(); ++i)
      row.max_diff = std::max(row.max_diff, std::fabs(gs[i] - gp[i]));
    rows.push_back(row);
  }

  {
    // Fabricated posterior: two chains of small jitter around q0, enough to
    // exercise the per-draw deviance sweep without running the sampler.
    mpep::PosteriorDraws draws;
    draws.dim = model.n_params();
    draws.n_draws = n_draws / 2;
    draws.chains.resize(2);
    for (auto &chain : draws.chains) {
      chain.resize(static_cast<std::size_t>(draws.n_draws) * draws.dim);
      for (std::size_t i = 0; i < chain.size(); ++i)
        chain[i] = q0[i % q0.size()] + rng.uniform(-0.01, 0.01);
    }
    BenchRow row{"residual_deviance"};
    mpep::DevianceReport ds, dp;
    row.serial_ms = time_best_of(
        3, [&] { ds = mpep::residual_deviance(model, draws, mpep::Exec::serial); });
    row.parallel_ms = time_best_of(3, [&] {
      dp = mpep::residual_deviance(model, draws, mpep::Exec::parallel);
    });
    row.max_diff = std::fabs(ds.mean_resdev - dp.mean_resdev);
    rows.push_back(row);
  }

  std::printf("%-20s %12s %12s %9s %12s\n", "kernel", "serial ms",
              "parallel ms", "speedup", "max |diff|");
  for (const BenchRow &row : rows)
    std::printf("%-20s %12.3f %12.3f %8.2fx %12g\n", row.name.c_str(),
                row.serial_ms, row.parallel_ms,
                row.parallel_ms > 0 ? row.serial_ms / row.parallel_ms : 0.0,
                row.max_diff);

  for (const BenchRow &row : rows)
    if (row.max_diff != 0.0) {
      std::printf("\nFAIL: serial and parallel kernels disagree\n");
      return 1;
    }
  std::printf("\nserial and parallel kernels agree bit for bit\n");
  return 0;
}
