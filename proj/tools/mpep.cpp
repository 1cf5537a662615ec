#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpep/commands.hpp"
#include "mpep/errors.hpp"

int main(int argc, char **argv) {
  CLI::App app{
      "mpep: joint estimation of hidden-population size from a linked "
      "cohort and multiple event-count sources"};
  app.require_subcommand(1);
  app.fallthrough();

  // Global flags shared by the fitting commands.
  mpep::CommandOptions opts;
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "RNG seed")->capture_default_str();
  app.add_option("--chains", opts.sampler.chains, "number of chains")
      ->capture_default_str();
  app.add_option("--warmup", opts.sampler.warmup, "warmup iterations per chain")
      ->capture_default_str();
  app.add_option("--samples", opts.sampler.samples,
                 "sampling iterations per chain")
      ->capture_default_str();
  app.add_option("--out", opts.out_dir,
                 "output directory (or CSV path for simulate)")
      ->capture_default_str();
  app.add_option("--target-accept", opts.sampler.target_accept,
                 "dual-averaging acceptance target")
      ->capture_default_str();
  app.add_option("--max-depth", opts.sampler.max_treedepth,
                 "maximum trajectory doublings")
      ->capture_default_str();
  app.add_option("--jitter", opts.sampler.init_jitter,
                 "initialization jitter half-width")
      ->capture_default_str();

  std::string dataset_path, config_path, candidates_path, truth_path;
  std::string bias_event;
  std::vector<std::string> config_paths;
  long long followup_start = 0, followup_end = 0;

  CLI::App *fit = app.add_subcommand(
      "fit", "fit the joint model and write draws, summaries, and reports");
  fit->add_option("--data", dataset_path, "stratified counts CSV")->required();
  fit->add_option("--config", config_path, "model config TOML")->required();

  CLI::App *compare = app.add_subcommand(
      "compare", "fit several configs and tabulate ResDev / pD / DIC");
  compare->add_option("--data", dataset_path, "stratified counts CSV")
      ->required();
  compare
      ->add_option("--config", config_paths,
                   "model config TOML (repeat per config)")
      ->required();

  CLI::App *consistency = app.add_subcommand(
      "consistency",
      "single-source and joint fits with per-year conflict p-values");
  consistency->add_option("--data", dataset_path, "stratified counts CSV")
      ->required();
  consistency->add_option("--config", config_path, "model config TOML")
      ->required();
  consistency->add_option(
      "--bias", bias_event,
      "also refit jointly with bias terms on this source's extra counts");

  CLI::App *select = app.add_subcommand(
      "select", "forward selection over a candidate-term file");
  select->add_option("--data", dataset_path, "stratified counts CSV")
      ->required();
  select->add_option("--config", config_path, "base model config TOML")
      ->required();
  select->add_option("--candidates", candidates_path, "candidate terms TOML")
      ->required();

  CLI::App *simulate = app.add_subcommand(
      "simulate", "draw a synthetic dataset from a truth file");
  simulate->add_option("--config", config_path, "model config TOML")
      ->required();
  simulate->add_option("--truth", truth_path, "truth JSON")->required();

  CLI::App *episodes = app.add_subcommand(
      "episodes", "code reimbursement dates into treatment episodes");
  episodes
      ->add_option("--data", dataset_path, "CSV with header 'person,day'")
      ->required();
  episodes
      ->add_option("--followup-end", followup_end,
                   "last follow-up day (inclusive)")
      ->required();
  episodes->add_option("--followup-start", followup_start,
                       "first follow-up day (inclusive)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : mpep::exit_input_error;
  }
  opts.sampler.seed = seed;

  if (fit->parsed()) return mpep::cmd_fit(dataset_path, config_path, opts);
  if (compare->parsed())
    return mpep::cmd_compare(dataset_path, config_paths, opts);
  if (consistency->parsed())
    return mpep::cmd_consistency(dataset_path, config_path, opts, bias_event);
  if (select->parsed())
    return mpep::cmd_select(dataset_path, config_path, candidates_path, opts);
  if (simulate->parsed())
    return mpep::cmd_simulate(config_path, truth_path, seed,
                              opts.out_dir == "mpep-out" ? "synthetic.csv"
                                                         : opts.out_dir);
  if (episodes->parsed())
    return mpep::cmd_episodes(dataset_path, followup_start, followup_end,
                              opts.out_dir);
  return mpep::exit_input_error;
}
