#include "spacemoe/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "spacemoe/config.hpp"
#include "spacemoe/error.hpp"
#include "spacemoe/report.hpp"

namespace spacemoe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool wants(const CliCommon& c, const std::string& what) {
  if (c.verbose && (what == "selection_log" || what == "transmission_log")) return true;
  return c.emit.count(what) > 0;
}

RunOptions options_for(const CliCommon& c) {
  RunOptions o;
  o.keep_ledger = wants(c, "ledgers");
  o.keep_logs = wants(c, "selection_log") || wants(c, "transmission_log");
  return o;
}

std::vector<ThermalRow> thermal_rows(const LoadedConfig& lc) {
  const auto& s = lc.scenario;
  const double horizon = lc.output.thermal_horizon_s > 0.0 ? lc.output.thermal_horizon_s : 2.0 * s.reference_period_s();
  auto sats = lc.output.thermal_sats;
  if (sats.empty()) {
    sats.push_back(s.workload.source.mode == SourceSpec::Mode::Fixed ? s.workload.source.satellite
                                                                     : best_visible_satellite(s, 0.0));
  }
  return thermal_series(s, horizon, sats);
}

// Writes the per-run artifacts; `suffix` distinguishes sweep points.
void write_run_artifacts(const fs::path& dir, const LoadedConfig& lc, const RunResult& r, const CliCommon& c,
                         const std::string& suffix) {
  const auto seed = lc.scenario.workload.seed;
  const auto& h = lc.hash;
  if (wants(c, "ledgers")) write_file_atomic(dir / ("energy_ledger" + suffix + ".csv"), energy_ledger_csv(r.ledger, h, seed));
  if (wants(c, "thermal_series")) {
    write_file_atomic(dir / ("thermal_series" + suffix + ".csv"), thermal_series_csv(thermal_rows(lc), h, seed));
  }
  if (wants(c, "selection_log")) {
    write_file_atomic(dir / ("selection_log" + suffix + ".jsonl"), selection_log_jsonl(r.selections, h, seed));
  }
  if (wants(c, "transmission_log")) {
    write_file_atomic(dir / ("transmission_log" + suffix + ".jsonl"), transmission_log_jsonl(r.transmissions, h, seed));
  }
  if (wants(c, "placement")) write_file_atomic(dir / ("placement" + suffix + ".json"), placement_document(r.placement, h, seed));
  if (wants(c, "snapshots")) {
    write_file_atomic(dir / ("snapshots" + suffix + ".csv"),
                      snapshots_csv(lc.scenario, lc.scenario.workload.duration_s, h, seed));
  }
}

void print_row(std::ostream& out, const RunMetrics& m) {
  out << m.label << ": tokens=" << m.tokens << " avg_latency_s=" << format_number(m.avg_latency_s)
      << " mean_utility=" << format_number(m.mean_utility) << " bytes_moved=" << m.bytes_moved
      << " thermal_violations=" << m.thermal_violations << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ComparisonError& e) {
    err << "comparison error: " << e.what() << "\n";
    return kExitCompare;
  } catch (const MemoryInfeasibleError& e) {
    err << "memory-infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const PlacementError& e) {
    err << "placement error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  }
}

void check_emit(const CliCommon& c) {
  for (const auto& e : c.emit) {
    const auto& ok = emit_choices();
    if (std::find(ok.begin(), ok.end(), e) == ok.end()) throw ConfigError("unknown --emit value '" + e + "'");
  }
}

std::string sanitize(const std::string& v) {
  std::string s = v;
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

}  // namespace

const std::vector<std::string>& emit_choices() {
  static const std::vector<std::string> c = {"metrics",          "ledgers",   "thermal_series", "selection_log",
                                             "transmission_log", "placement", "snapshots"};
  return c;
}

int cmd_run(const std::string& config, const CliCommon& common, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_emit(common);
    const auto lc = load_config(config, common.overrides);
    const auto result = simulate(lc.scenario, options_for(common));
    const fs::path dir(common.out_dir);
    const auto seed = lc.scenario.workload.seed;
    write_file_atomic(dir / "metrics.json", metrics_document(lc.resolved, lc.hash, result.metrics));
    write_file_atomic(dir / "summary.csv", summary_csv({result.metrics}, lc.hash, seed));
    write_run_artifacts(dir, lc, result, common, "");
    print_row(out, result.metrics);
    return kExitOk;
  });
}

int cmd_compare(const std::vector<std::string>& configs, const CliCommon& common, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    check_emit(common);
    if (configs.size() < 2) throw ComparisonError("compare needs at least two configs");
    std::vector<LoadedConfig> loaded;
    std::vector<Scenario> scenarios;
    json all = json::array();
    for (const auto& c : configs) {
      loaded.push_back(load_config(c, common.overrides));
      scenarios.push_back(loaded.back().scenario);
      all.push_back(loaded.back().resolved);
    }
    const auto cmp = compare(scenarios);  // throws before anything is written
    const auto hash = config_hash(all);
    const auto seed = scenarios.front().workload.seed;
    const fs::path dir(common.out_dir);

    std::vector<std::vector<std::string>> names;
    std::set<std::string> strategies;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      names.push_back({configs[i], config_hash(loaded[i].resolved)});
      strategies.insert(to_string(scenarios[i].placement.strategy));
    }
    write_file_atomic(dir / "compare.csv", summary_csv(cmp.rows, hash, seed, {"config", "row_config_hash"}, names));
    if (strategies.size() > 1) {
      std::vector<std::vector<std::string>> strat;
      for (const auto& s : scenarios) strat.push_back({to_string(s.placement.strategy)});
      write_file_atomic(dir / "placement_compare.csv", summary_csv(cmp.rows, hash, seed, {"strategy"}, strat));
    }
    for (const auto& row : cmp.rows) print_row(out, row);
    return kExitOk;
  });
}

int cmd_sweep(const std::string& config, const std::string& param, const std::vector<std::string>& values,
              const CliCommon& common, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_emit(common);
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    json base = read_config_file(config);
    for (const auto& o : common.overrides) apply_override(base, o);
    {
      json probe = base;
      apply_override(probe, param + "=" + values.front());  // rejects unknown paths up front
    }
    std::vector<RunMetrics> rows;
    std::vector<std::vector<std::string>> cells;
    json all = json::array();
    std::uint64_t seed = 0;
    const fs::path dir(common.out_dir);
    std::vector<std::pair<LoadedConfig, RunResult>> results;
    for (const auto& v : values) {
      auto lc = load_config_json(base, {param + "=" + v});
      auto r = simulate(lc.scenario, options_for(common));
      seed = lc.scenario.workload.seed;
      all.push_back(lc.resolved);
      rows.push_back(r.metrics);
      cells.push_back({param, v});
      results.emplace_back(std::move(lc), std::move(r));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      write_run_artifacts(dir, results[i].first, results[i].second, common, "_" + sanitize(values[i]));
    }
    write_file_atomic(dir / "sweep.csv", summary_csv(rows, config_hash(all), seed, {"param", "value"}, cells));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << param << "=" << values[i] << " ";
      print_row(out, rows[i]);
    }
    return kExitOk;
  });
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Distributed mixture-of-experts inference over LEO constellations"};
  app.require_subcommand(1);

  CliCommon common;
  std::vector<std::string> emit;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--set", common.overrides, "Override a config value: key.path=value")->take_all();
    sub->add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--emit", emit, "Extra artifacts")->check(CLI::IsMember(emit_choices()))->take_all();
    sub->add_flag("--verbose", common.verbose, "Write selection and transmission logs");
  };

  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario");
  run_cmd->add_option("--config", run_config, "Config file or bundled scenario name")->required();
  add_common(run_cmd);

  std::vector<std::string> compare_configs;
  auto* compare_cmd = app.add_subcommand("compare", "Run scenarios side by side");
  compare_cmd->add_option("--config", compare_configs, "Config files (two or more)")->required()->take_all();
  add_common(compare_cmd);

  std::string sweep_config, sweep_param;
  std::vector<std::string> sweep_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one config value");
  sweep_cmd->add_option("--config", sweep_config, "Config file or bundled scenario name")->required();
  sweep_cmd->add_option("--param", sweep_param, "Dotted config path")->required();
  sweep_cmd->add_option("--values", sweep_values, "Values (space or comma separated)")->delimiter(',')->take_all();
  add_common(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  common.emit.insert(emit.begin(), emit.end());

  if (*run_cmd) return cmd_run(run_config, common, std::cout, std::cerr);
  if (*compare_cmd) return cmd_compare(compare_configs, common, std::cout, std::cerr);
  return cmd_sweep(sweep_config, sweep_param, sweep_values, common, std::cout, std::cerr);
}

}  // namespace spacemoe
