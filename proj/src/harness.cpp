#include "anc/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "anc/controllers.hpp"
#include "anc/signals.hpp"

namespace anc {

bool RunTrace::any_diverged() const {
  return std::any_of(diverged.begin(), diverged.end(), [](char c) { return c != 0; });
}

double RunTrace::final_anse_db() const {
  return anse.empty() ? std::numeric_limits<double>::quiet_NaN() : anse.back().total_db;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kStepEps = 1e-12;
constexpr double kPowerSpanSeconds = 4.0;

std::vector<double> tile(const std::vector<double>& src, std::size_t n) {
  std::vector<double> out(n, 0.0);
  if (src.empty()) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = src[i % src.size()];
  return out;
}

double filtered_power(const FirResponse& model, const std::vector<double>& x, std::size_t span) {
  if (span == 0) return 0.0;
  Convolver conv(model.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < span; ++n) {
    const double v = conv.step(model, x[n]);
    acc += v * v;
  }
  return acc / static_cast<double>(span);
}

std::vector<std::vector<double>> make_references(const ScenarioConfig& cfg) {
  const std::size_t total = cfg.total_samples();
  const std::size_t K = cfg.nodes;
  std::vector<double> shared;
  switch (cfg.noise.kind) {
    case NoiseKind::multitone: {
      std::vector<ToneSpec> tones;
      const auto& n = cfg.noise;
      for (std::size_t i = 0; i < n.tones_hz.size(); ++i)
        tones.push_back({n.tones_hz[i], n.amplitudes.size() == 1 ? n.amplitudes[0] : n.amplitudes[i],
                         n.phases_rad.size() == 1 ? n.phases_rad[0] : n.phases_rad[i]});
      shared = gen_multitone(tones, cfg.sample_rate_hz, total).samples;
      break;
    }
    case NoiseKind::bandlimited:
      if (cfg.noise.distinct_per_node) {
        std::vector<std::vector<double>> refs;
        for (std::size_t k = 0; k < K; ++k)
          refs.push_back(gen_bandlimited_noise(cfg.noise.low_hz, cfg.noise.high_hz, cfg.sample_rate_hz, total,
                                               cfg.noise.seed + k, cfg.noise.rms)
                             .samples);
        return refs;
      }
      shared = gen_bandlimited_noise(cfg.noise.low_hz, cfg.noise.high_hz, cfg.sample_rate_hz, total, cfg.noise.seed,
                                     cfg.noise.rms)
                   .samples;
      break;
    case NoiseKind::wavefile: {
      const auto sig = load_wave_file(cfg.noise.file);
      if (sig.sample_rate_hz != cfg.sample_rate_hz)
        throw ConfigError(fmt::format("noise.file is sampled at {} Hz, scenario runs at {} Hz", sig.sample_rate_hz,
                                      cfg.sample_rate_hz));
      if (sig.samples.empty() && total > 0) throw ConfigError("noise.file holds no samples");
      shared = tile(sig.samples, total);
      break;
    }
  }
  // both modes hand every node its own copy; they differ only with distinct_per_node
  return std::vector<std::vector<double>>(K, shared);
}

bool estimates_usable(const ScenarioConfig& cfg, const PathSet& paths) {
  if (paths.estimates.empty()) return false;
  for (std::size_t k = 0; k < paths.nodes; ++k)
    if (paths.estimates[k][k].size() != cfg.model_taps) return false;
  return !is_centralized(cfg.algorithm) || paths.has_full_estimates();
}

}  // namespace

std::vector<double> normalized_step_sizes(const ScenarioConfig& cfg, const PathSet& paths,
                                          const std::vector<std::vector<double>>& references) {
  const std::size_t K = paths.nodes;
  const std::size_t total = references.empty() ? 0 : references.front().size();
  const std::size_t span = std::min(total, cfg.samples_per(kPowerSpanSeconds));
  const double N = static_cast<double>(cfg.control_taps);
  std::vector<double> mu(K, 0.0);
  for (std::size_t m = 0; m < K; ++m) {
    double p = 0.0;
    if (!is_centralized(cfg.algorithm)) {
      p = filtered_power(paths.estimates[m][m], references[m], span);
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        if (cfg.algorithm == Algorithm::collocated_centralized)
          for (std::size_t j = 0; j < K; ++j) p += filtered_power(paths.estimates[k][m], references[j], span);
        else
          p += filtered_power(paths.estimates[k][m], references[m], span);
      }
    }
    mu[m] = cfg.mu_bar / (N * p + kStepEps);
  }
  return mu;
}

PreparedScenario prepare_scenario(const ScenarioConfig& cfg, PathSet paths) {
  cfg.validate();
  if (paths.nodes != cfg.nodes)
    throw ConfigError(fmt::format("path set has {} nodes, scenario expects {}", paths.nodes, cfg.nodes));
  if (paths.sample_rate_hz != cfg.sample_rate_hz)
    throw ConfigError(fmt::format("path set is sampled at {} Hz, scenario runs at {} Hz", paths.sample_rate_hz,
                                  cfg.sample_rate_hz));
  paths.validate();
  if (!estimates_usable(cfg, paths)) make_estimates(paths, cfg.model_taps, cfg.estimate_mismatch, cfg.estimate_seed);

  PreparedScenario p;
  p.references = make_references(cfg);
  p.mu = normalized_step_sizes(cfg, paths, p.references);
  if (!cfg.center_file.empty()) {
    try {
      p.centers = load_center_filters(cfg.center_file, cfg.nodes, cfg.control_taps);
    } catch (const PathError& e) {
      throw ConfigError(e.what());
    }
  }
  p.paths = std::move(paths);
  return p;
}

PreparedScenario prepare_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  PathSet paths;
  if (!cfg.paths.file.empty()) {
    try {
      paths = load_paths(cfg.paths.file, cfg.nodes);
    } catch (const PathError& e) {
      throw ConfigError(e.what());
    }
  } else {
    PathSynthParams sp;
    sp.nodes = cfg.nodes;
    sp.primary_len = cfg.paths.primary_taps;
    sp.secondary_len = cfg.paths.secondary_taps;
    sp.delay_min = cfg.paths.delay_min;
    sp.delay_max = cfg.paths.delay_max;
    sp.primary_extra_delay = cfg.paths.primary_extra_delay;
    sp.decay_rate = cfg.paths.decay;
    sp.coupling_gain = cfg.paths.coupling;
    sp.seed = cfg.paths.seed;
    sp.sample_rate_hz = cfg.sample_rate_hz;
    paths = synth_paths(sp);
  }
  return prepare_scenario(cfg, std::move(paths));
}

// ---------------------------------------------------------------------------

RunTrace run_prepared(const ScenarioConfig& cfg, const PreparedScenario& prep) {
  const std::size_t K = cfg.nodes;
  const std::size_t total = cfg.total_samples();
  const bool central = is_centralized(cfg.algorithm);

  RunTrace tr;
  tr.nodes = K;
  tr.sample_rate_hz = cfg.sample_rate_hz;
  tr.planned_samples = total;
  tr.mu = prep.mu;
  tr.block_len = cfg.samples_per(cfg.anse_block_s);
  tr.diverged.assign(K, 0);
  tr.diverged_at.assign(K, std::nullopt);
  if (cfg.store_samples) {
    tr.e.assign(K, {});
    tr.d.assign(K, {});
    tr.y.assign(K, {});
    for (std::size_t k = 0; k < K; ++k) {
      tr.e[k].reserve(total);
      tr.d[k].reserve(total);
      tr.y[k].reserve(total);
    }
  }
  const std::size_t tail_len = std::min(total, cfg.samples_per(cfg.spectrum_tail_s));
  const std::size_t tail_start = total - tail_len;
  tr.tail_e.assign(K, {});
  tr.tail_d.assign(K, {});

  std::vector<NodeController> nodes;
  std::optional<CentralizedController> centre;
  if (central) {
    centre.emplace(prep.paths, cfg.control_taps, prep.mu, cfg.algorithm == Algorithm::collocated_centralized);
  } else {
    const std::size_t window =
        (cfg.algorithm == Algorithm::sb_wcfxlms && std::isfinite(cfg.boost_interval_s))
            ? cfg.samples_per(cfg.boost_interval_s)
            : 0;
    tr.boost_window = window;
    nodes.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      NodeParams np{cfg.control_taps, prep.mu[k], cfg.alpha_for(k), window};
      nodes.emplace_back(cfg.algorithm, prep.paths.estimate(k), np);
      if (!prep.centers.empty()) nodes.back().set_center(prep.centers[k]);
    }
  }
  std::vector<std::uint64_t> versions(K, 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) versions[k] = nodes[k].center_version();

  Plant plant(prep.paths);
  std::mt19937_64 sensor_rng(cfg.sensor_noise_seed);
  std::normal_distribution<double> sensor_noise(0.0, 1.0);

  std::vector<double> x(K), y(K), d(K), e(K);
  std::vector<double> blk_e(K, 0.0), blk_d(K, 0.0), blk_eta(K, 0.0);
  std::size_t blk_count = 0;

  const auto flag = [&](std::size_t k, std::size_t n) {
    if (!tr.diverged[k]) {
      tr.diverged[k] = 1;
      tr.diverged_at[k] = n;
    }
  };

  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t k = 0; k < K; ++k) x[k] = prep.references[k][n];

    if (central) {
      centre->control_outputs(x, y);
      const bool blown = std::any_of(y.begin(), y.end(),
                                     [&](double v) { return !std::isfinite(v) || std::abs(v) > cfg.divergence_limit; });
      if (blown) {
        centre->mark_diverged();
        std::fill(y.begin(), y.end(), 0.0);
      }
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        y[k] = nodes[k].output(x[k]);
        if (!std::isfinite(y[k]) || std::abs(y[k]) > cfg.divergence_limit) {
          nodes[k].mark_diverged();
          y[k] = 0.0;
        }
      }
    }

    if (plant.step(x, y, d, e) != PlantStatus::ok) {
      tr.halted = true;
      break;
    }
    if (cfg.sensor_noise_rms > 0.0)
      for (std::size_t k = 0; k < K; ++k) e[k] += cfg.sensor_noise_rms * sensor_noise(sensor_rng);

    if (central) {
      centre->update(e);
      if (centre->diverged())
        for (std::size_t k = 0; k < K; ++k) flag(k, n);
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        if (auto ev = nodes[k].adapt(e[k], n)) tr.events.push_back({ev->sample, k, ev->old_eta_min, ev->new_eta_min});
        if (nodes[k].center_version() != versions[k]) {
          versions[k] = nodes[k].center_version();
          tr.center_changes.push_back({n, k});
        }
        if (nodes[k].diverged()) flag(k, n);
      }
    }

    if (cfg.store_samples)
      for (std::size_t k = 0; k < K; ++k) {
        tr.e[k].push_back(e[k]);
        tr.d[k].push_back(d[k]);
        tr.y[k].push_back(y[k]);
      }
    if (n >= tail_start)
      for (std::size_t k = 0; k < K; ++k) {
        tr.tail_e[k].push_back(e[k]);
        tr.tail_d[k].push_back(d[k]);
      }

    for (std::size_t k = 0; k < K; ++k) {
      blk_e[k] += e[k] * e[k];
      blk_d[k] += d[k] * d[k];
      blk_eta[k] += rnl(e[k]);
    }
    if (++blk_count == tr.block_len) {
      std::vector<double> pe(K), pd(K), eta(K), emin(K);
      const double len = static_cast<double>(tr.block_len);
      for (std::size_t k = 0; k < K; ++k) {
        pe[k] = blk_e[k] / len;
        pd[k] = blk_d[k] / len;
        eta[k] = blk_eta[k] / len;
        emin[k] = central ? std::numeric_limits<double>::infinity() : nodes[k].eta_min();
      }
      tr.anse.push_back(anse_from_power(pe, pd));
      tr.eta_bar.push_back(std::move(eta));
      tr.eta_min.push_back(std::move(emin));
      std::fill(blk_e.begin(), blk_e.end(), 0.0);
      std::fill(blk_d.begin(), blk_d.end(), 0.0);
      std::fill(blk_eta.begin(), blk_eta.end(), 0.0);
      blk_count = 0;
    }
    tr.samples_run = n + 1;
  }
  return tr;
}

RunTrace run_scenario(const ScenarioConfig& cfg) { return run_prepared(cfg, prepare_scenario(cfg)); }

std::string check_boost_consistency(const RunTrace& tr) {
  for (std::size_t b = 1; b < tr.eta_min.size(); ++b)
    for (std::size_t k = 0; k < tr.nodes; ++k)
      if (tr.eta_min[b][k] > tr.eta_min[b - 1][k])
        return fmt::format("node {}: eta_min rose from {} to {} at block {}", k + 1, tr.eta_min[b - 1][k],
                           tr.eta_min[b][k], b);

  std::vector<double> last(tr.nodes, std::numeric_limits<double>::infinity());
  for (const auto& ev : tr.events) {
    if (!(ev.new_eta_min < ev.old_eta_min))
      return fmt::format("node {}: boost at sample {} is not a strict improvement", ev.node + 1, ev.sample);
    if (ev.old_eta_min != last[ev.node])
      return fmt::format("node {}: boost at sample {} does not chain from the previous minimum", ev.node + 1,
                         ev.sample);
    last[ev.node] = ev.new_eta_min;
    if (tr.boost_window == 0 || (ev.sample + 1) % tr.boost_window != 0)
      return fmt::format("node {}: boost at sample {} is off a window boundary", ev.node + 1, ev.sample);
  }
  if (tr.events.size() != tr.center_changes.size())
    return fmt::format("{} boost events but {} centre changes", tr.events.size(), tr.center_changes.size());
  for (std::size_t i = 0; i < tr.events.size(); ++i)
    if (tr.events[i].sample != tr.center_changes[i].sample || tr.events[i].node != tr.center_changes[i].node)
      return fmt::format("centre change at sample {} node {} has no matching boost event", tr.center_changes[i].sample,
                         tr.center_changes[i].node + 1);
  return {};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_values(const std::string& raw) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto bar = raw.find('|', start);
    std::string item = raw.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? std::string() : item.substr(b, e - b + 1);
    if (item.empty()) throw ConfigError(fmt::format("empty grid value in '{}'", raw));
    out.push_back(item);
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace

Grid load_grid(const std::filesystem::path& file) {
  Grid g;
  for (const auto& [key, value] : read_ini_pairs(file)) {
    if (key == "mode") {
      if (value == "listed")
        g.listed = true;
      else if (value != "cartesian")
        throw ConfigError(fmt::format("grid mode must be cartesian or listed, got '{}'", value));
      continue;
    }
    ScenarioConfig probe;
    const auto values = split_values(value);
    for (const auto& v : values) set_value(probe, key, v);  // rejects unknown keys and malformed values early
    g.axes.push_back({key, values});
  }
  if (g.axes.empty()) throw ConfigError(fmt::format("grid file '{}' defines no axes", file.string()));
  if (g.listed)
    for (const auto& a : g.axes)
      if (a.values.size() != g.axes.front().values.size())
        throw ConfigError("listed grid axes must all have the same number of values");
  return g;
}

std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const Grid& grid) {
  std::vector<std::vector<std::pair<std::string, std::string>>> cells;
  if (grid.axes.empty()) return cells;
  if (grid.listed) {
    for (std::size_t i = 0; i < grid.axes.front().values.size(); ++i) {
      std::vector<std::pair<std::string, std::string>> cell;
      for (const auto& a : grid.axes) cell.emplace_back(a.key, a.values[i]);
      cells.push_back(std::move(cell));
    }
    return cells;
  }
  cells.push_back({});
  for (const auto& a : grid.axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& c : cells)
      for (const auto& v : a.values) {
        auto cell = c;
        cell.emplace_back(a.key, v);
        next.push_back(std::move(cell));
      }
    cells = std::move(next);
  }
  return cells;
}

namespace {

std::size_t grid_size(const Grid& grid) {
  if (grid.axes.empty()) return 0;
  if (grid.listed) return grid.axes.front().values.size();
  std::size_t n = 1;
  for (const auto& a : grid.axes) {
    if (a.values.empty()) return 0;
    if (n > std::numeric_limits<std::size_t>::max() / a.values.size()) return std::numeric_limits<std::size_t>::max();
    n *= a.values.size();
  }
  return n;
}

}  // namespace

SweepResult sweep(const ScenarioConfig& base, const Grid& grid, const SweepOptions& options) {
  const std::size_t n_cells = grid_size(grid);
  if (n_cells > options.max_cells)
    throw ConfigError(fmt::format("grid has {} cells, above the cap of {}", n_cells, options.max_cells));
  const auto cells = expand_grid(grid);

  SweepResult result;
  result.rows.resize(cells.size());
  result.traces.resize(cells.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepRow& row = result.rows[i];
      row.cell = i;
      row.assignment = cells[i];
      try {
        ScenarioConfig cfg = base;
        for (const auto& [k, v] : cells[i]) set_value(cfg, k, v);
        RunTrace tr = run_scenario(cfg);
        row.final_anse_db = tr.final_anse_db();
        row.diverged = tr.any_diverged();
        row.boost_count = tr.boost_count();
        if (options.out_dir) export_trace(tr, cfg, *options.out_dir / fmt::format("cell_{:03}", i));
        result.traces[i] = std::move(tr);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return result;
}

}  // namespace anc
