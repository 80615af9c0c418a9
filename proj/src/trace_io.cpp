#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "anc/harness.hpp"

namespace anc {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", file.string()));
}

std::string node_columns(const std::string& prefix, std::size_t K) {
  std::string s;
  for (std::size_t k = 0; k < K; ++k) s += fmt::format(",{}{}", prefix, k + 1);
  return s;
}

std::string spectrum_csv(const RunTrace& tr, std::size_t segment, bool disturbance) {
  std::string out = "freq_hz" + node_columns("psd_db_node_", tr.nodes) + "\n";
  const auto& tail = disturbance ? tr.tail_d : tr.tail_e;
  if (tail.empty() || tail.front().size() < segment) return out;
  const auto spectra = tail_spectra(tr, segment, disturbance);
  for (std::size_t b = 0; b < spectra.front().freq_hz.size(); ++b) {
    out += num(spectra.front().freq_hz[b]);
    for (const auto& s : spectra) out += "," + num(to_db(s.psd[b]));
    out += '\n';
  }
  return out;
}

}  // namespace

std::vector<PowerSpectrum> tail_spectra(const RunTrace& tr, std::size_t segment_len, bool disturbance) {
  const auto& tail = disturbance ? tr.tail_d : tr.tail_e;
  std::vector<PowerSpectrum> out;
  for (const auto& t : tail) out.push_back(power_spectrum(t, tr.sample_rate_hz, segment_len, 0.5));
  return out;
}

std::string manifest_json(const ScenarioConfig& cfg, const RunTrace& tr) {
  nlohmann::ordered_json j;
  j["tool"] = "anc-lab";
  j["version"] = kVersion;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : to_key_values(cfg)) {
    const auto dot = key.find('.');
    config[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  j["config"] = config;

  nlohmann::ordered_json seeds;
  if (cfg.noise.kind == NoiseKind::bandlimited && cfg.noise.distinct_per_node) {
    std::vector<std::uint64_t> per_node;
    for (std::size_t k = 0; k < cfg.nodes; ++k) per_node.push_back(cfg.noise.seed + k);
    seeds["noise"] = per_node;
  } else {
    seeds["noise"] = cfg.noise.seed;
  }
  seeds["paths"] = cfg.paths.seed;
  seeds["estimate"] = cfg.estimate_seed;
  seeds["sensor_noise"] = cfg.sensor_noise_seed;
  j["seeds"] = seeds;

  nlohmann::ordered_json derived;
  derived["mu"] = tr.mu;
  derived["planned_samples"] = tr.planned_samples;
  derived["block_len"] = tr.block_len;
  derived["boost_window"] = tr.boost_window;
  j["derived"] = derived;

  nlohmann::ordered_json outcome;
  outcome["samples_run"] = tr.samples_run;
  outcome["halted"] = tr.halted;
  std::vector<bool> div;
  for (char c : tr.diverged) div.push_back(c != 0);
  outcome["diverged"] = div;
  outcome["boost_events"] = tr.events.size();
  const double final_db = tr.final_anse_db();
  if (std::isfinite(final_db))
    outcome["final_anse_db"] = final_db;
  else
    outcome["final_anse_db"] = nullptr;
  j["outcome"] = outcome;
  return j.dump(2) + "\n";
}

void export_trace(const RunTrace& tr, const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::size_t K = tr.nodes;
  const double block_s = static_cast<double>(tr.block_len) / tr.sample_rate_hz;

  std::string anse = "block_index,time_s,anse_db" + node_columns("anse_node_", K) + "\n";
  for (std::size_t b = 0; b < tr.anse.size(); ++b) {
    anse += fmt::format("{},{},{}", b, num((b + 1) * block_s), num(tr.anse[b].total_db));
    for (double v : tr.anse[b].node_db) anse += "," + num(v);
    anse += '\n';
  }
  write_file(out_dir / "anse.csv", anse);

  std::string rnl = "block_index,time_s" + node_columns("eta_bar_node_", K) + node_columns("eta_min_node_", K) + "\n";
  for (std::size_t b = 0; b < tr.eta_bar.size(); ++b) {
    rnl += fmt::format("{},{}", b, num((b + 1) * block_s));
    for (double v : tr.eta_bar[b]) rnl += "," + num(v);
    for (double v : tr.eta_min[b]) rnl += "," + num(v);
    rnl += '\n';
  }
  write_file(out_dir / "rnl.csv", rnl);

  std::string events = "sample,node,old_eta_min,new_eta_min\n";
  for (const auto& ev : tr.events)
    events += fmt::format("{},{},{},{}\n", ev.sample, ev.node + 1, num(ev.old_eta_min), num(ev.new_eta_min));
  write_file(out_dir / "events.csv", events);

  write_file(out_dir / "spectrum.csv", spectrum_csv(tr, cfg.spectrum_segment, false));
  write_file(out_dir / "spectrum_disturbance.csv", spectrum_csv(tr, cfg.spectrum_segment, true));

  if (!tr.e.empty()) {
    std::string s = "sample" + node_columns("e_node_", K) + node_columns("d_node_", K) + node_columns("y_node_", K) + "\n";
    const std::size_t n = tr.e.front().size();
    for (std::size_t i = 0; i < n; ++i) {
      s += std::to_string(i);
      for (std::size_t k = 0; k < K; ++k) s += "," + num(tr.e[k][i]);
      for (std::size_t k = 0; k < K; ++k) s += "," + num(tr.d[k][i]);
      for (std::size_t k = 0; k < K; ++k) s += "," + num(tr.y[k][i]);
      s += '\n';
    }
    write_file(out_dir / "samples.csv", s);
  }
  write_file(out_dir / "manifest.json", manifest_json(cfg, tr));
}

void export_summary(const SweepResult& result, const Grid& grid, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::string s = "cell";
  for (const auto& a : grid.axes) s += "," + a.key;
  s += ",final_anse_db,diverged,boost_count,error\n";
  for (const auto& row : result.rows) {
    s += std::to_string(row.cell);
    for (const auto& [k, v] : row.assignment) s += ",\"" + v + "\"";
    s += "," + num(row.final_anse_db) + "," + (row.diverged ? "1" : "0") + "," + std::to_string(row.boost_count);
    std::string err = row.error;
    for (auto& c : err)
      if (c == '"') c = '\'';
    s += ",\"" + err + "\"\n";
  }
  write_file(file, s);
}

std::vector<double> read_csv_column(const std::filesystem::path& file, const std::string& column) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", file.string()));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(fmt::format("'{}' is empty", file.string()));
  std::size_t col = 0;
  bool found = false;
  {
    std::stringstream ss(line);
    std::string name;
    for (std::size_t i = 0; std::getline(ss, name, ','); ++i)
      if (name == column) {
        col = i;
        found = true;
        break;
      }
  }
  if (!found) throw std::runtime_error(fmt::format("'{}' has no column '{}'", file.string(), column));
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(ss, cell, ',')) throw std::runtime_error(fmt::format("short row in '{}'", file.string()));
    out.push_back(std::strtod(cell.c_str(), nullptr));
  }
  return out;
}

}  // namespace anc
