// anc-lab: run multichannel ANC scenarios and write CSV traces for plotting.
//
//   anc-lab run <scenario-file> [--out DIR] [--set key=value ...]
//   anc-lab sweep <scenario-file> --grid <grid-file> [--out DIR] [--max-cells N]
//   anc-lab paths synth --out FILE [options]
//   anc-lab paths inspect FILE
//
// Exit codes: 0 success, 1 runtime/I-O failure, 2 configuration error,
// 3 at least one node diverged.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <iostream>

#include "anc/acoustics.hpp"
#include "anc/config.hpp"
#include "anc/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

int do_run(const std::string& scenario, const std::string& out, const std::vector<std::string>& overrides) {
  anc::ScenarioConfig cfg = anc::load_scenario(scenario);
  anc::apply_overrides(cfg, overrides);
  const auto trace = anc::run_scenario(cfg);
  anc::export_trace(trace, cfg, out);

  fmt::print("{}: {} nodes, {} samples, algorithm {}\n", scenario, cfg.nodes, trace.samples_run,
             anc::to_string(cfg.algorithm));
  if (!trace.anse.empty()) fmt::print("final block ANSE {:.2f} dB\n", trace.final_anse_db());
  if (trace.boost_window) fmt::print("self-boost events: {}\n", trace.boost_count());
  for (std::size_t k = 0; k < trace.nodes; ++k)
    if (trace.diverged[k]) fmt::print("node {} DIVERGED at sample {}\n", k + 1, *trace.diverged_at[k]);
  fmt::print("wrote {}\n", out);
  return trace.any_diverged() ? kExitDiverged : kExitOk;
}

int do_sweep(const std::string& scenario, const std::string& grid_file, const std::string& out, std::size_t max_cells,
             std::size_t threads, const std::vector<std::string>& overrides) {
  anc::ScenarioConfig cfg = anc::load_scenario(scenario);
  anc::apply_overrides(cfg, overrides);
  const auto grid = anc::load_grid(grid_file);
  anc::SweepOptions opt;
  opt.max_cells = max_cells;
  opt.threads = threads;
  opt.out_dir = out;
  const auto result = anc::sweep(cfg, grid, opt);
  anc::export_summary(result, grid, std::filesystem::path(out) / "summary.csv");

  bool any_div = false, any_err = false;
  for (const auto& row : result.rows) {
    std::string cell;
    for (const auto& [k, v] : row.assignment) cell += fmt::format(" {}={}", k, v);
    if (!row.error.empty()) {
      fmt::print("cell {}:{}  error: {}\n", row.cell, cell, row.error);
      any_err = true;
      continue;
    }
    fmt::print("cell {}:{}  final ANSE {:.2f} dB{}  boosts {}\n", row.cell, cell, row.final_anse_db,
               row.diverged ? "  DIVERGED" : "", row.boost_count);
    any_div = any_div || row.diverged;
  }
  if (any_err) return kExitConfig;
  return any_div ? kExitDiverged : kExitOk;
}

int do_inspect(const std::string& file) {
  const auto ps = anc::load_paths(file);
  fmt::print("{}: {} nodes at {} Hz\n", file, ps.nodes, ps.sample_rate_hz);
  for (std::size_t k = 0; k < ps.nodes; ++k) {
    double cross = 0.0;
    for (std::size_t m = 0; m < ps.nodes; ++m)
      if (m != k) cross += ps.secondary[k][m].energy();
    const double self = ps.secondary[k][k].energy();
    fmt::print("node {}: primary {} taps (energy {:.4g}), self path {} taps (energy {:.4g}), crosstalk energy {:.4g}",
               k + 1, ps.primary[k].size(), ps.primary[k].energy(), ps.secondary[k][k].size(), self, cross);
    if (!ps.estimates.empty()) fmt::print(", model {} taps", ps.estimate(k).size());
    fmt::print("\n");
  }
  fmt::print("full estimate matrix: {}\n", ps.has_full_estimates() ? "yes" : "no");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multichannel active noise control simulation lab"};
  app.require_subcommand(1);

  std::string scenario, out = "anc_out", grid_file, inspect_file, synth_out;
  std::vector<std::string> overrides;
  std::size_t max_cells = 256, threads = 0;

  auto* run = app.add_subcommand("run", "Run one scenario and export its trace");
  run->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  run->add_option("--set", overrides, "Override a scenario key (key=value)");

  auto* sw = app.add_subcommand("sweep", "Run a parameter grid");
  sw->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  sw->add_option("--grid", grid_file, "Grid file")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "Output directory");
  sw->add_option("--max-cells", max_cells, "Refuse grids with more cells than this");
  sw->add_option("--threads", threads, "Worker threads (0: all cores)");
  sw->add_option("--set", overrides, "Override a scenario key (key=value)");

  auto* paths = app.add_subcommand("paths", "Synthesize or inspect path files");
  paths->require_subcommand(1);
  auto* synth = paths->add_subcommand("synth", "Write a synthetic path file");
  anc::PathSynthParams sp;
  std::size_t model_taps = 256;
  double mismatch = 0.0;
  std::uint64_t estimate_seed = 11;
  synth->add_option("--out", synth_out, "Path file to write")->required();
  synth->add_option("--nodes", sp.nodes, "Node count K");
  synth->add_option("--primary-taps", sp.primary_len);
  synth->add_option("--secondary-taps", sp.secondary_len);
  synth->add_option("--delay-min", sp.delay_min);
  synth->add_option("--delay-max", sp.delay_max);
  synth->add_option("--primary-extra-delay", sp.primary_extra_delay);
  synth->add_option("--decay", sp.decay_rate);
  synth->add_option("--coupling", sp.coupling_gain);
  synth->add_option("--seed", sp.seed);
  synth->add_option("--sample-rate", sp.sample_rate_hz);
  synth->add_option("--model-taps", model_taps, "Taps per secondary-path estimate (0: none)");
  synth->add_option("--mismatch", mismatch, "Relative energy of estimate perturbation");
  synth->add_option("--estimate-seed", estimate_seed);
  auto* inspect = paths->add_subcommand("inspect", "Summarize a path file");
  inspect->add_option("file", inspect_file)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return do_run(scenario, out, overrides);
    if (*sw) return do_sweep(scenario, grid_file, out, max_cells, threads, overrides);
    if (*synth) {
      auto ps = anc::synth_paths(sp);
      if (model_taps > 0) anc::make_estimates(ps, model_taps, mismatch, estimate_seed);
      anc::save_paths(ps, synth_out);
      fmt::print("wrote {} ({} nodes)\n", synth_out, ps.nodes);
      return kExitOk;
    }
    if (*inspect) return do_inspect(inspect_file);
  } catch (const anc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const anc::PathError& e) {
    std::cerr << "path error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const anc::SignalError& e) {
    std::cerr << "signal error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
