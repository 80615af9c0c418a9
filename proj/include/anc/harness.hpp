#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anc/acoustics.hpp"
#include "anc/config.hpp"
#include "anc/metrics.hpp"

namespace anc {

inline constexpr const char* kVersion = "1.0.0";

struct BoostRecord {
  std::size_t sample = 0;
  std::size_t node = 0;  // 0-based
  double old_eta_min = 0.0;
  double new_eta_min = 0.0;
};

struct CenterChange {
  std::size_t sample = 0;
  std::size_t node = 0;
};

/// Everything a run leaves behind.
struct RunTrace {
  std::size_t nodes = 0;
  int sample_rate_hz = 0;
  std::size_t planned_samples = 0;
  std::size_t samples_run = 0;
  bool halted = false;  // plant saw a non-finite control signal

  std::vector<double> mu;  // per node (per source for centralized runs)

  // per-sample streams, [node][n], only with store_samples
  std::vector<std::vector<double>> e, d, y;

  // trailing span for spectra, [node][i]
  std::vector<std::vector<double>> tail_e, tail_d;

  // one entry per closed block of block_len samples
  std::size_t block_len = 0;
  std::vector<AnseValue> anse;
  std::vector<std::vector<double>> eta_bar;  // [block][node], windowed mean RNL
  std::vector<std::vector<double>> eta_min;  // [block][node], best window so far (+inf until set)

  std::vector<BoostRecord> events;
  std::vector<CenterChange> center_changes;  // observed independently of the event log
  std::size_t boost_window = 0;              // 0 when boosting is off

  std::vector<char> diverged;                       // per node
  std::vector<std::optional<std::size_t>> diverged_at;

  bool any_diverged() const;
  double final_anse_db() const;
  std::size_t boost_count() const { return events.size(); }
};

/// Materialised inputs of a run: plant, references and step sizes.
struct PreparedScenario {
  PathSet paths;
  std::vector<std::vector<double>> references;  // [node][n]
  std::vector<double> mu;
  std::vector<std::vector<double>> centers;     // empty unless a centre file is configured
};

PreparedScenario prepare_scenario(const ScenarioConfig& cfg);
/// Same, but with a caller-supplied plant (estimates are rebuilt unless already L taps wide).
PreparedScenario prepare_scenario(const ScenarioConfig& cfg, PathSet paths);

/// mu = mu_bar / (N * P_x' + eps), P_x' measured on the reference filtered by the model(s).
std::vector<double> normalized_step_sizes(const ScenarioConfig& cfg, const PathSet& paths,
                                          const std::vector<std::vector<double>>& references);

RunTrace run_scenario(const ScenarioConfig& cfg);
RunTrace run_prepared(const ScenarioConfig& cfg, const PreparedScenario& prepared);

/// Checks the self-boost bookkeeping of a trace: eta_min never increases,
/// every centre change has a matching strictly-improving event at a window
/// boundary, and vice versa. Returns an empty string when consistent.
std::string check_boost_consistency(const RunTrace& trace);

// ---------------------------------------------------------------------------
// Sweeps

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

struct Grid {
  std::vector<GridAxis> axes;
  bool listed = false;  // zip axes instead of taking the Cartesian product
};

/// Grid file: INI keys matching scenario keys, values separated by '|'.
/// A root-level "mode = listed" zips the axes.
Grid load_grid(const std::filesystem::path& file);
std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const Grid& grid);

struct SweepRow {
  std::size_t cell = 0;
  std::vector<std::pair<std::string, std::string>> assignment;
  double final_anse_db = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::size_t boost_count = 0;
  std::string error;  // config error for this cell, if any
};

struct SweepOptions {
  std::size_t max_cells = 256;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::optional<std::filesystem::path> out_dir;  // per-cell exports under cell_NNN/
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RunTrace> traces;
};

SweepResult sweep(const ScenarioConfig& base, const Grid& grid, const SweepOptions& options = {});

// ---------------------------------------------------------------------------
// Persistence

std::string manifest_json(const ScenarioConfig& cfg, const RunTrace& trace);

/// Writes anse.csv, rnl.csv, events.csv, spectrum.csv, spectrum_disturbance.csv,
/// manifest.json and (with stored samples) samples.csv.
void export_trace(const RunTrace& trace, const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
void export_summary(const SweepResult& result, const Grid& grid, const std::filesystem::path& file);

/// Per-node spectra of the trailing error (or disturbance) span.
std::vector<PowerSpectrum> tail_spectra(const RunTrace& trace, std::size_t segment_len, bool disturbance = false);

/// Reads one named column of a CSV file written by export_trace.
std::vector<double> read_csv_column(const std::filesystem::path& file, const std::string& column);

}  // namespace anc
