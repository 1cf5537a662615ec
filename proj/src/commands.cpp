#include "mpep/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "mpep/consistency.hpp"
#include "mpep/dataset_io.hpp"
#include "mpep/episodes.hpp"
#include "mpep/errors.hpp"
#include "mpep/fit.hpp"
#include "mpep/manifest.hpp"
#include "mpep/selection.hpp"
#include "mpep/synthetic.hpp"
#include "mpep/text.hpp"

namespace mpep {

namespace {

namespace fs = std::filesystem;

template <class Fn>
int guarded(Fn &&fn) {
  try {
    return fn();
  } catch (const validation_error &err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_input_error;
  } catch (const convergence_error &err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_convergence_failure;
  } catch (const nlohmann::json::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_input_error;
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_numerical_failure;
  }
}

void ensure_out_dir(const std::string &out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw validation_error("cannot create output directory '" + out_dir +
                           "': " + ec.message());
}

std::string join_path(const std::string &dir, const std::string &name) {
  return (fs::path(dir) / name).string();
}

std::ofstream open_out(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path);
  return out;
}

nlohmann::json load_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot read file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &err) {
    throw validation_error(path + ": " + err.what());
  }
}

const SummaryRow &row_named(const std::vector<SummaryRow> &rows,
                            const std::string &name) {
  for (const SummaryRow &row : rows)
    if (row.name == name) return row;
  throw numerical_error("summary row '" + name + "' missing");
}

// Table-5-shaped yearly table from a full summary.
void write_yearly_csv(const std::string &path, const Model &model,
                      const std::vector<SummaryRow> &rows) {
  std::ofstream out = open_out(path);
  out << "year,n_mean,n_median,n_lo95,n_hi95,"
         "prev_mean,prev_median,prev_lo95,prev_hi95\n";
  for (const std::string &year : model.dataset().header.year_levels) {
    const SummaryRow &n = row_named(rows, "N_year[" + year + "]");
    const SummaryRow &prev = row_named(rows, "prev_year[" + year + "]");
    out << year << ',' << format_real(n.mean) << ',' << format_real(n.median)
        << ',' << format_real(n.lo95) << ',' << format_real(n.hi95) << ','
        << format_real(prev.mean) << ',' << format_real(prev.median) << ','
        << format_real(prev.lo95) << ',' << format_real(prev.hi95) << '\n';
  }
}

// Plot-ready per-year prevalence series, one row per (source, year).
struct SeriesRow {
  std::string source;
  std::string year;
  double mean, lo, hi;
};

void append_series(std::vector<SeriesRow> &series, const std::string &source,
                   const Model &model, const std::vector<SummaryRow> &rows) {
  for (const std::string &year : model.dataset().header.year_levels) {
    const SummaryRow &prev = row_named(rows, "prev_year[" + year + "]");
    series.push_back({source, year, prev.mean, prev.lo95, prev.hi95});
  }
}

void write_series_csv(const std::string &path,
                      const std::vector<SeriesRow> &series) {
  std::ofstream out = open_out(path);
  out << "source,year,prev_mean,prev_lo95,prev_hi95\n";
  for (const SeriesRow &row : series)
    out << row.source << ',' << row.year << ',' << format_real(row.mean) << ','
        << format_real(row.lo) << ',' << format_real(row.hi) << '\n';
}

// Pooled per-year total-N draws (all chains concatenated in chain order).
std::vector<std::vector<double>> yearly_n_draws(const Model &model,
                                                const PosteriorDraws &draws) {
  const auto derived = compute_derived(model, draws);
  const int nd = model.n_derived();
  const int off = model.derived_year_n_offset();
  const int Y = model.n_years();
  std::vector<std::vector<double>> out(Y);
  for (int y = 0; y < Y; ++y)
    out[y].reserve(static_cast<std::size_t>(draws.total_draws()));
  for (int c = 0; c < draws.n_chains(); ++c)
    for (int i = 0; i < draws.n_draws; ++i)
      for (int y = 0; y < Y; ++y)
        out[y].push_back(derived[c][static_cast<std::size_t>(i) * nd + off + y]);
  return out;
}

ConvergenceReport merge_gates(const std::vector<const ConvergenceReport *> &gates) {
  ConvergenceReport merged = *gates.front();
  for (const ConvergenceReport *gate : gates) {
    merged.pass = merged.pass && gate->pass;
    if (gate->max_rhat > merged.max_rhat) {
      merged.max_rhat = gate->max_rhat;
      merged.worst_rhat_param = gate->worst_rhat_param;
    }
    if (gate->min_ess < merged.min_ess) {
      merged.min_ess = gate->min_ess;
      merged.worst_ess_param = gate->worst_ess_param;
    }
  }
  return merged;
}

void report_gate(const std::string &label, const ConvergenceReport &gate) {
  std::cout << label << ": "
            << (gate.pass ? "convergence gate passed" : "convergence gate FAILED")
            << " (max R-hat " << gate.max_rhat << " [" << gate.worst_rhat_param
            << "], min ESS " << gate.min_ess << " [" << gate.worst_ess_param
            << "])\n";
}

// Restriction of a two-source model to one source for node splitting.
ModelConfig single_event_config(const ModelConfig &config, int keep) {
  ModelConfig out = config;
  const std::string name = config.event_types[keep];
  out.event_types = {name};
  out.event_families = {config.event_families[keep]};
  out.event_regressions = {config.event_regressions[keep]};
  out.extensions.bias_cells.clear();
  for (const BiasCell &cell : config.extensions.bias_cells)
    if (cell.event == name) out.extensions.bias_cells.push_back(cell);
  if (!config.dataset_options.deaths_event.empty() &&
      config.dataset_options.deaths_event != name)
    out.dataset_options.deaths_event.clear();
  return out;
}

StrataDataset single_event_dataset(const StrataDataset &dataset, int keep) {
  StrataDataset out;
  out.header = dataset.header;
  out.header.event_types = {dataset.header.event_types[keep]};
  out.header.deaths_event = dataset.header.deaths_event == keep ? 0 : -1;
  out.rows = dataset.rows;
  for (std::size_t j = 0; j < out.rows.size(); ++j) {
    out.rows[j].x_c = {dataset.rows[j].x_c[keep]};
    out.rows[j].x_e = {dataset.rows[j].x_e[keep]};
  }
  out.validate();
  return out;
}

}  // namespace

int cmd_fit(const std::string &dataset_path, const std::string &config_path,
            const CommandOptions &opts) {
  return guarded([&] {
    RunManifest manifest;
    manifest.command = "fit";
    manifest.started = utc_timestamp();
    manifest.add_input("dataset", dataset_path);
    manifest.add_input("config", config_path);
    manifest.set_sampler(opts.sampler);

    const ModelConfig config = load_model_config(config_path);
    const StrataDataset dataset =
        load_dataset(dataset_path, config.dataset_options);
    ensure_out_dir(opts.out_dir);

    const FitResult fit = run_fit(dataset, config, opts.sampler);
    const std::vector<SummaryRow> rows = summarize(*fit.model, fit.draws);

    write_draws_csv(join_path(opts.out_dir, "draws.csv"), fit.draws);
    write_summary_csv(join_path(opts.out_dir, "summary.csv"), rows);
    write_yearly_csv(join_path(opts.out_dir, "yearly.csv"), *fit.model, rows);
    std::vector<SeriesRow> series;
    append_series(series, "joint", *fit.model, rows);
    write_series_csv(join_path(opts.out_dir, "series.csv"), series);
    open_out(join_path(opts.out_dir, "deviance.json"))
        << deviance_report_json(fit.deviance).dump(2) << '\n';
    open_out(join_path(opts.out_dir, "deviance.txt"))
        << deviance_report_text(fit.deviance);

    manifest.warnings = fit_warnings(fit);
    if (fit.model->n_events() == 1)
      manifest.warnings.push_back(
          "single event type: internal consistency checks are unavailable");
    manifest.gate_evaluated = true;
    manifest.gate = fit.gate;
    manifest.finished = utc_timestamp();
    manifest.write(join_path(opts.out_dir, "manifest.json"));

    report_gate("fit", fit.gate);
    for (const std::string &warning : manifest.warnings)
      std::cout << "warning: " << warning << '\n';
    std::cout << deviance_report_text(fit.deviance);
    std::cout << "artifacts written to " << opts.out_dir << '\n';
    return fit.gate.pass ? exit_ok : exit_convergence_failure;
  });
}

int cmd_compare(const std::string &dataset_path,
                const std::vector<std::string> &config_paths,
                const CommandOptions &opts) {
  return guarded([&] {
    if (config_paths.empty())
      throw validation_error("compare needs at least one config");
    RunManifest manifest;
    manifest.command = "compare";
    manifest.started = utc_timestamp();
    manifest.add_input("dataset", dataset_path);
    for (const std::string &path : config_paths)
      manifest.add_input("config:" + fs::path(path).stem().string(), path);
    manifest.set_sampler(opts.sampler);
    ensure_out_dir(opts.out_dir);

    std::ofstream csv = open_out(join_path(opts.out_dir, "comparison.csv"));
    csv << "config,group,n_points,mean_resdev,pd,dic,theta_mean,pi_mean,"
           "gate_passed\n";
    std::ostringstream text;
    std::vector<ConvergenceReport> gates;

    for (const std::string &path : config_paths) {
      const std::string label = fs::path(path).stem().string();
      const ModelConfig config = load_model_config(path);
      const StrataDataset dataset =
          load_dataset(dataset_path, config.dataset_options);
      const FitResult fit = run_fit(dataset, config, opts.sampler);
      gates.push_back(fit.gate);
      report_gate(label, fit.gate);

      // Family posteriors per sub-model: events then the exit model.
      const int E = fit.model->n_events();
      std::vector<std::string> prefixes = fit.model->config().event_types;
      prefixes.push_back("exit");
      auto family_mean = [&](int r, const char *suffix) -> std::string {
        const std::string name = prefixes[r] + "." + suffix;
        for (const SummaryRow &row : fit.param_rows)
          if (row.name == name) return format_real(row.mean);
        return "";
      };
      auto group_submodel = [&](const std::string &group) {
        // "on:deaths" -> deaths; "oce" -> exit.
        const auto colon = group.find(':');
        if (colon == std::string::npos) return E;
        return fit.model->config().event_index(group.substr(colon + 1));
      };
      for (const GroupDeviance &group : fit.deviance.groups) {
        const int r = group_submodel(group.name);
        csv << label << ',' << group.name << ',' << group.n_points << ','
            << format_real(group.mean_resdev) << ',' << format_real(group.pd)
            << ',' << format_real(group.dic) << ',' << family_mean(r, "theta")
            << ',' << family_mean(r, "pi") << ','
            << (fit.gate.pass ? "yes" : "no") << '\n';
      }
      csv << label << ",total," << fit.deviance.n_points << ','
          << format_real(fit.deviance.mean_resdev) << ','
          << format_real(fit.deviance.pd) << ','
          << format_real(fit.deviance.dic) << ",,,"
          << (fit.gate.pass ? "yes" : "no") << '\n';

      text << "== " << label << (fit.gate.pass ? "" : "  [gate FAILED]")
           << " ==\n"
           << deviance_report_text(fit.deviance) << '\n';
    }
    open_out(join_path(opts.out_dir, "comparison.txt")) << text.str();

    std::vector<const ConvergenceReport *> gate_ptrs;
    for (const ConvergenceReport &gate : gates) gate_ptrs.push_back(&gate);
    manifest.gate_evaluated = true;
    manifest.gate = merge_gates(gate_ptrs);
    for (std::size_t i = 0; i < gates.size(); ++i)
      if (!gates[i].pass)
        manifest.warnings.push_back(
            "config " + fs::path(config_paths[i]).stem().string() +
            " failed the convergence gate; its rows are flagged");
    manifest.finished = utc_timestamp();
    manifest.write(join_path(opts.out_dir, "manifest.json"));
    std::cout << text.str() << "artifacts written to " << opts.out_dir << '\n';
    return exit_ok;
  });
}

int cmd_consistency(const std::string &dataset_path,
                    const std::string &config_path, const CommandOptions &opts,
                    const std::string &bias_event) {
  return guarded([&] {
    RunManifest manifest;
    manifest.command = "consistency";
    manifest.started = utc_timestamp();
    manifest.add_input("dataset", dataset_path);
    manifest.add_input("config", config_path);
    manifest.set_sampler(opts.sampler);

    const ModelConfig config = load_model_config(config_path);
    if (config.event_types.size() != 2)
      throw validation_error(
          "consistency analysis needs exactly 2 event types, config has " +
          std::to_string(config.event_types.size()));
    const StrataDataset dataset =
        load_dataset(dataset_path, config.dataset_options);
    if (!bias_event.empty() && config.event_index(bias_event) < 0)
      throw validation_error("--bias event '" + bias_event +
                             "' is not an event type");
    ensure_out_dir(opts.out_dir);

    struct SourceFit {
      std::string label;
      FitResult fit;
      std::vector<SummaryRow> rows;
    };
    std::vector<SourceFit> fits;
    auto add_fit = [&](const std::string &label, const StrataDataset &data,
                       const ModelConfig &cfg) {
      SourceFit sf;
      sf.label = label;
      sf.fit = run_fit(data, cfg, opts.sampler);
      sf.rows = summarize(*sf.fit.model, sf.fit.draws);
      report_gate(label, sf.fit.gate);
      fits.push_back(std::move(sf));
    };
    for (int e = 0; e < 2; ++e)
      add_fit(config.event_types[e] + "-only", single_event_dataset(dataset, e),
              single_event_config(config, e));
    add_fit("joint", dataset, config);
    if (!bias_event.empty()) {
      ModelConfig biased = config;
      BiasCell cell;
      cell.event = bias_event;  // all strata of the flagged source
      biased.extensions.bias_cells.push_back(cell);
      add_fit("joint+bias", dataset, biased);
    }

    // Per-year deltas between the two single-source fits.
    const auto &years = dataset.header.year_levels;
    const ConsistencyResult consistency = consistency_pvalue(
        yearly_n_draws(*fits[0].fit.model, fits[0].fit.draws),
        yearly_n_draws(*fits[1].fit.model, fits[1].fit.draws), years,
        opts.sampler.seed);

    std::ofstream csv = open_out(join_path(opts.out_dir, "consistency.csv"));
    csv << "year,n_a_mean,n_a_lo95,n_a_hi95,n_b_mean,n_b_lo95,n_b_hi95,"
           "n_joint_mean,n_joint_lo95,n_joint_hi95,pr_positive,p_value\n";
    std::cout << "delta = N[" << fits[0].label << "] - N[" << fits[1].label
              << "] per year:\n";
    for (std::size_t y = 0; y < years.size(); ++y) {
      csv << years[y];
      for (int f = 0; f < 3; ++f) {
        const SummaryRow &n = row_named(fits[f].rows, "N_year[" + years[y] + "]");
        csv << ',' << format_real(n.mean) << ',' << format_real(n.lo95) << ','
            << format_real(n.hi95);
      }
      csv << ',' << format_real(consistency.units[y].pr_positive) << ','
          << format_real(consistency.units[y].p_value) << '\n';
      std::cout << "  " << years[y] << ": Pr(delta > 0) = "
                << consistency.units[y].pr_positive << ", p = "
                << consistency.units[y].p_value << '\n';
    }

    std::vector<SeriesRow> series;
    for (const SourceFit &sf : fits)
      append_series(series, sf.label, *sf.fit.model, sf.rows);
    write_series_csv(join_path(opts.out_dir, "series.csv"), series);

    std::vector<const ConvergenceReport *> gates;
    for (const SourceFit &sf : fits) gates.push_back(&sf.fit.gate);
    manifest.gate_evaluated = true;
    manifest.gate = merge_gates(gates);
    for (const SourceFit &sf : fits) {
      for (const std::string &warning : fit_warnings(sf.fit))
        manifest.warnings.push_back(sf.label + ": " + warning);
      if (!sf.fit.gate.pass)
        manifest.warnings.push_back(sf.label +
                                    " failed the convergence gate");
    }
    manifest.finished = utc_timestamp();
    manifest.write(join_path(opts.out_dir, "manifest.json"));
    std::cout << "artifacts written to " << opts.out_dir << '\n';
    return manifest.gate.pass ? exit_ok : exit_convergence_failure;
  });
}

int cmd_select(const std::string &dataset_path, const std::string &config_path,
               const std::string &candidates_path, const CommandOptions &opts) {
  return guarded([&] {
    RunManifest manifest;
    manifest.command = "select";
    manifest.started = utc_timestamp();
    manifest.add_input("dataset", dataset_path);
    manifest.add_input("config", config_path);
    manifest.add_input("candidates", candidates_path);
    manifest.set_sampler(opts.sampler);

    const ModelConfig base = load_model_config(config_path);
    const StrataDataset dataset =
        load_dataset(dataset_path, base.dataset_options);
    const std::vector<CandidateTerm> candidates =
        load_candidates(candidates_path);
    ensure_out_dir(opts.out_dir);

    const SelectionResult result =
        stepwise_select(dataset, base, candidates, opts.sampler);

    open_out(join_path(opts.out_dir, "selected.toml"))
        << config_to_toml_text(result.selected);
    open_out(join_path(opts.out_dir, "trace.json"))
        << selection_trace_json(result).dump(2) << '\n';

    std::cout << "base: mean ResDev + pD = " << result.base_dic << '\n';
    for (const SelectionStep &step : result.steps) {
      std::cout << (step.retained ? "retained " : "rejected ")
                << step.candidate.describe();
      if (step.converged)
        std::cout << " (delta " << step.delta_dic << ")";
      if (!step.note.empty()) std::cout << " [" << step.note << "]";
      std::cout << '\n';
      if (!step.note.empty()) manifest.warnings.push_back(step.note + ": " +
                                                          step.candidate.describe());
    }
    manifest.finished = utc_timestamp();
    manifest.write(join_path(opts.out_dir, "manifest.json"));
    std::cout << "artifacts written to " << opts.out_dir << '\n';
    return exit_ok;
  });
}

int cmd_simulate(const std::string &config_path, const std::string &truth_path,
                 std::uint64_t seed, const std::string &out_csv) {
  return guarded([&] {
    RunManifest manifest;
    manifest.command = "simulate";
    manifest.started = utc_timestamp();
    manifest.add_input("config", config_path);
    manifest.add_input("truth", truth_path);
    manifest.seed = seed;

    const ModelConfig config = load_model_config(config_path);
    const nlohmann::json truth = load_json(truth_path);
    const StrataDataset dataset = generate_synthetic_json(config, truth, seed);
    save_dataset(dataset, out_csv);

    manifest.finished = utc_timestamp();
    manifest.write(out_csv + ".manifest.json");
    std::cout << "wrote " << dataset.n_strata() << " strata to " << out_csv
              << '\n';
    return exit_ok;
  });
}

int cmd_episodes(const std::string &reimbursements_path,
                 long long followup_start, long long followup_end,
                 const std::string &out_dir) {
  return guarded([&] {
    std::ifstream in(reimbursements_path);
    if (!in)
      throw validation_error("cannot read file: " + reimbursements_path);
    std::string line;
    if (!std::getline(in, line))
      throw validation_error(reimbursements_path + ": empty file");
    if (line != "person,day")
      throw validation_error(reimbursements_path +
                             ": header must be exactly 'person,day'");

    // Group the days by person, keeping first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<long long>> days;
    std::map<std::string, std::string> bad;  // person -> first problem
    long long line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw validation_error(reimbursements_path + ':' +
                               std::to_string(line_no) + ": expected 2 fields");
      const std::string person = line.substr(0, comma);
      const std::string day_text = line.substr(comma + 1);
      if (person.empty())
        throw validation_error(reimbursements_path + ':' +
                               std::to_string(line_no) + ": empty person id");
      if (days.find(person) == days.end() && bad.find(person) == bad.end())
        order.push_back(person);
      if (day_text.empty()) {
        bad.emplace(person, "no reimbursement day");
        continue;
      }
      try {
        std::size_t used = 0;
        const long long day = std::stoll(day_text, &used);
        if (used != day_text.size()) throw std::invalid_argument(day_text);
        days[person].push_back(day);
      } catch (const std::exception &) {
        throw validation_error(reimbursements_path + ':' +
                               std::to_string(line_no) +
                               ": malformed day '" + day_text + "'");
      }
    }

    ensure_out_dir(out_dir);
    std::ofstream csv = open_out(join_path(out_dir, "episodes.csv"));
    csv << "person,status,message,n_episodes,episodes,t_on,t_off\n";
    long long total_on = 0, total_off = 0, ok = 0, rejected = 0;
    for (const std::string &person : order) {
      const auto flagged = bad.find(person);
      std::string message =
          flagged != bad.end() ? flagged->second : std::string();
      EpisodeCoding coding;
      if (message.empty()) {
        std::vector<long long> person_days = days[person];
        std::sort(person_days.begin(), person_days.end());
        try {
          coding = code_treatment_episodes(person_days, followup_end,
                                           followup_start);
        } catch (const std::exception &err) {
          message = err.what();
        }
      }
      if (!message.empty()) {
        ++rejected;
        csv << person << ",rejected," << message << ",,,,\n";
        continue;
      }
      ++ok;
      total_on += coding.t_on;
      total_off += coding.t_off;
      std::string spans;
      for (const TreatmentEpisode &ep : coding.episodes) {
        if (!spans.empty()) spans += ';';
        spans += std::to_string(ep.start) + '-' + std::to_string(ep.end);
      }
      csv << person << ",ok,," << coding.episodes.size() << ',' << spans << ','
          << coding.t_on << ',' << coding.t_off << '\n';
    }
    open_out(join_path(out_dir, "totals.csv"))
        << "persons_ok,persons_rejected,t_on_total,t_off_total\n"
        << ok << ',' << rejected << ',' << total_on << ',' << total_off << '\n';
    std::cout << ok << " persons coded, " << rejected << " rejected; t_on = "
              << total_on << ", t_off = " << total_off << '\n';
    return exit_ok;
  });
}

}  // namespace mpep
