#include "anc/acoustics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace anc {

bool FirResponse::is_zero() const noexcept {
  return std::all_of(taps.begin(), taps.end(), [](double v) { return v == 0.0; });
}

double FirResponse::energy() const noexcept {
  double acc = 0.0;
  for (double v : taps) acc += v * v;
  return acc;
}

bool PathSet::has_full_estimates() const {
  if (estimates.size() != nodes) return false;
  for (const auto& row : estimates) {
    if (row.size() != nodes) return false;
    for (const auto& e : row)
      if (e.empty()) return false;
  }
  return true;
}

void PathSet::validate() const {
  if (nodes == 0) throw PathError("path set has no nodes");
  if (sample_rate_hz <= 0) throw PathError("sample rate must be positive");
  if (primary.size() != nodes) throw PathError(fmt::format("expected {} primary paths, got {}", nodes, primary.size()));
  if (secondary.size() != nodes) throw PathError("secondary path matrix is not K x K");
  const auto finite = [](const FirResponse& f) {
    return std::all_of(f.taps.begin(), f.taps.end(), [](double v) { return std::isfinite(v); });
  };
  for (std::size_t k = 0; k < nodes; ++k) {
    if (primary[k].empty()) throw PathError(fmt::format("primary path {} is empty", k + 1));
    if (!finite(primary[k])) throw PathError(fmt::format("primary path {} has non-finite taps", k + 1));
    if (secondary[k].size() != nodes) throw PathError("secondary path matrix is not K x K");
    for (std::size_t m = 0; m < nodes; ++m) {
      if (secondary[k][m].empty()) throw PathError(fmt::format("secondary path {} {} is empty", k + 1, m + 1));
      if (!finite(secondary[k][m]))
        throw PathError(fmt::format("secondary path {} {} has non-finite taps", k + 1, m + 1));
    }
  }
  if (!estimates.empty()) {
    if (estimates.size() != nodes) throw PathError("estimate matrix is not K x K");
    for (std::size_t k = 0; k < nodes; ++k) {
      if (estimates[k].size() != nodes) throw PathError("estimate matrix is not K x K");
      if (estimates[k][k].empty()) throw PathError(fmt::format("estimate {} is empty", k + 1));
      for (const auto& e : estimates[k])
        if (!finite(e)) throw PathError("estimate has non-finite taps");
    }
  }
}

// ---------------------------------------------------------------------------

Plant::Plant(const PathSet& paths) : paths_(&paths) {
  const std::size_t K = paths.nodes;
  x_hist_.reserve(K);
  y_hist_.reserve(K);
  for (std::size_t k = 0; k < K; ++k) x_hist_.emplace_back(paths.primary[k].size());
  for (std::size_t m = 0; m < K; ++m) {
    std::size_t len = 1;
    for (std::size_t k = 0; k < K; ++k) len = std::max(len, paths.secondary[k][m].size());
    y_hist_.emplace_back(len);
  }
  active_.assign(K, std::vector<char>(K, 0));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t m = 0; m < K; ++m) active_[k][m] = paths.secondary[k][m].is_zero() ? 0 : 1;
}

PlantStatus Plant::step(std::span<const double> x, std::span<const double> y, std::span<double> d,
                        std::span<double> e) {
  const std::size_t K = paths_->nodes;
  for (std::size_t m = 0; m < K; ++m)
    if (!std::isfinite(y[m])) return PlantStatus::non_finite;
  for (std::size_t k = 0; k < K; ++k) x_hist_[k].push(x[k]);
  for (std::size_t m = 0; m < K; ++m) y_hist_[m].push(y[m]);

  for (std::size_t k = 0; k < K; ++k) {
    d[k] = dot(paths_->primary[k].taps, x_hist_[k].window());
    double err = d[k];
    for (std::size_t m = 0; m < K; ++m)
      if (active_[k][m]) err -= dot(paths_->secondary[k][m].taps, y_hist_[m].window());
    e[k] = err;
  }
  return PlantStatus::ok;
}

double Plant::crosstalk(std::size_t k) const {
  double acc = 0.0;
  for (std::size_t m = 0; m < paths_->nodes; ++m)
    if (m != k && active_[k][m]) acc += dot(paths_->secondary[k][m].taps, y_hist_[m].window());
  return acc;
}

void Plant::reset() {
  for (auto& h : x_hist_) h.reset();
  for (auto& h : y_hist_) h.reset();
}

// ---------------------------------------------------------------------------

namespace {

FirResponse decaying_path(std::mt19937_64& rng, std::size_t len, std::size_t delay_min, std::size_t delay_max,
                          std::size_t extra_delay, double decay) {
  std::uniform_int_distribution<std::size_t> pick_delay(delay_min, delay_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t delay = std::min(pick_delay(rng) + extra_delay, len - 1);
  FirResponse f;
  f.taps.assign(len, 0.0);
  for (std::size_t j = delay; j < len; ++j)
    f.taps[j] = gauss(rng) * std::exp(-decay * static_cast<double>(j - delay));
  const double en = f.energy();
  if (en > 0.0) {
    const double s = 1.0 / std::sqrt(en);
    for (auto& v : f.taps) v *= s;
  }
  return f;
}

}  // namespace

PathSet synth_paths(const PathSynthParams& p) {
  if (p.nodes == 0) throw PathError("node count must be at least 1");
  if (p.primary_len == 0 || p.secondary_len == 0) throw PathError("path lengths must be at least 1");
  if (p.delay_min > p.delay_max) throw PathError("delay range is inverted");
  if (!(p.coupling_gain >= 0.0)) throw PathError("coupling gain must be nonnegative");
  if (!(p.decay_rate >= 0.0)) throw PathError("decay rate must be nonnegative");

  std::mt19937_64 rng(p.seed);
  PathSet ps;
  ps.nodes = p.nodes;
  ps.sample_rate_hz = p.sample_rate_hz;
  for (std::size_t k = 0; k < p.nodes; ++k)
    ps.primary.push_back(
        decaying_path(rng, p.primary_len, p.delay_min, p.delay_max, p.primary_extra_delay, p.decay_rate));
  ps.secondary.assign(p.nodes, {});
  for (std::size_t k = 0; k < p.nodes; ++k) {
    for (std::size_t m = 0; m < p.nodes; ++m) {
      auto f = decaying_path(rng, p.secondary_len, p.delay_min, p.delay_max, 0, p.decay_rate);
      if (m != k)
        for (auto& v : f.taps) v *= p.coupling_gain;
      ps.secondary[k].push_back(std::move(f));
    }
  }
  return ps;
}

void make_estimates(PathSet& paths, std::size_t model_taps, double mismatch_noise, std::uint64_t seed) {
  if (model_taps == 0) throw PathError("model tap count must be at least 1");
  if (!(mismatch_noise >= 0.0)) throw PathError("mismatch noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  paths.estimates.assign(paths.nodes, {});
  for (std::size_t k = 0; k < paths.nodes; ++k) {
    for (std::size_t m = 0; m < paths.nodes; ++m) {
      const auto& truth = paths.secondary[k][m].taps;
      FirResponse est;
      est.taps.assign(model_taps, 0.0);
      std::copy_n(truth.begin(), std::min(model_taps, truth.size()), est.taps.begin());
      const double sigma = std::sqrt(mismatch_noise * est.energy() / static_cast<double>(model_taps));
      for (auto& v : est.taps) {
        const double g = gauss(rng);  // drawn unconditionally so seeds stay aligned across mismatch levels
        v += sigma * g;
      }
      paths.estimates[k].push_back(std::move(est));
    }
  }
}

// ---------------------------------------------------------------------------
// Coefficient-row text files.
//
//   # comment
//   anc-paths 1
//   nodes <K>
//   sample_rate <fs>
//   lengths <primary_max> <secondary_max> <estimate_max>
//   P <k> <taps...>
//   S <k> <m> <taps...>
//   Shat <k> <taps...>        diagonal estimate (k, k)
//   Shatx <k> <m> <taps...>   off-diagonal estimate (centralized control only)
//
// Indices are 1-based. Taps are written with 17 significant digits.

namespace {

void write_row(std::ostream& out, const std::string& label, const std::vector<double>& taps) {
  out << label;
  for (double v : taps) out << ' ' << fmt::format("{:.17g}", v);
  out << '\n';
}

struct Row {
  std::string label;
  std::vector<std::size_t> index;
  std::vector<double> values;
  std::size_t line = 0;
};

std::size_t parse_index(const std::string& tok, std::size_t line) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || v == 0) throw PathError(fmt::format("line {}: bad index '{}'", line, tok));
  return v;
}

std::vector<double> parse_values(std::istringstream& in, std::size_t line) {
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || !std::isfinite(v)) throw PathError(fmt::format("line {}: bad coefficient '{}'", line, tok));
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw PathError(fmt::format("cannot open '{}'", file.string()));
  std::vector<std::string> lines;
  std::string s;
  while (std::getline(in, s)) lines.push_back(s);
  return lines;
}

}  // namespace

void save_paths(const PathSet& paths, const std::filesystem::path& file) {
  paths.validate();
  std::size_t pmax = 0, smax = 0, emax = 0;
  for (std::size_t k = 0; k < paths.nodes; ++k) {
    pmax = std::max(pmax, paths.primary[k].size());
    for (std::size_t m = 0; m < paths.nodes; ++m) {
      smax = std::max(smax, paths.secondary[k][m].size());
      if (!paths.estimates.empty()) emax = std::max(emax, paths.estimates[k][m].size());
    }
  }
  std::ofstream out(file);
  if (!out) throw PathError(fmt::format("cannot write '{}'", file.string()));
  out << "anc-paths 1\n";
  out << "nodes " << paths.nodes << '\n';
  out << "sample_rate " << paths.sample_rate_hz << '\n';
  out << "lengths " << pmax << ' ' << smax << ' ' << emax << '\n';
  for (std::size_t k = 0; k < paths.nodes; ++k) write_row(out, fmt::format("P {}", k + 1), paths.primary[k].taps);
  for (std::size_t k = 0; k < paths.nodes; ++k)
    for (std::size_t m = 0; m < paths.nodes; ++m)
      write_row(out, fmt::format("S {} {}", k + 1, m + 1), paths.secondary[k][m].taps);
  if (!paths.estimates.empty()) {
    for (std::size_t k = 0; k < paths.nodes; ++k) {
      for (std::size_t m = 0; m < paths.nodes; ++m) {
        const auto& est = paths.estimates[k][m];
        if (est.empty()) continue;
        write_row(out, k == m ? fmt::format("Shat {}", k + 1) : fmt::format("Shatx {} {}", k + 1, m + 1), est.taps);
      }
    }
  }
  if (!out) throw PathError(fmt::format("write to '{}' failed", file.string()));
}

PathSet load_paths(const std::filesystem::path& file, std::optional<std::size_t> expected_nodes) {
  const auto lines = read_lines(file);
  const auto where = [&](std::size_t line) { return fmt::format("{}:{}", file.string(), line); };

  PathSet ps;
  bool have_magic = false, have_nodes = false;
  std::size_t max_len[3] = {0, 0, 0};
  bool have_lengths = false;
  std::map<std::size_t, FirResponse> primary;
  std::map<std::pair<std::size_t, std::size_t>, FirResponse> secondary, estimates;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::istringstream in(lines[i]);
    std::string key;
    if (!(in >> key) || key[0] == '#') continue;
    if (key == "anc-paths") {
      int version = 0;
      if (!(in >> version) || version != 1) throw PathError(where(ln) + ": unsupported path file version");
      have_magic = true;
    } else if (key == "nodes") {
      if (!(in >> ps.nodes) || ps.nodes == 0) throw PathError(where(ln) + ": bad node count");
      have_nodes = true;
    } else if (key == "sample_rate") {
      if (!(in >> ps.sample_rate_hz) || ps.sample_rate_hz <= 0) throw PathError(where(ln) + ": bad sample rate");
    } else if (key == "lengths") {
      if (!(in >> max_len[0] >> max_len[1] >> max_len[2])) throw PathError(where(ln) + ": bad lengths line");
      have_lengths = true;
    } else if (key == "P" || key == "S" || key == "Shat" || key == "Shatx") {
      if (!have_nodes) throw PathError(where(ln) + ": coefficient row before 'nodes'");
      std::string a;
      if (!(in >> a)) throw PathError(where(ln) + ": missing index");
      std::size_t k = parse_index(a, ln), m = k;
      std::vector<double> taps;
      if (key == "S") {
        std::string b;
        if (!(in >> b)) throw PathError(where(ln) + ": missing second index");
        m = parse_index(b, ln);
        taps = parse_values(in, ln);
      } else if (key == "Shatx") {
        std::string b;
        if (!(in >> b)) throw PathError(where(ln) + ": missing second index");
        m = parse_index(b, ln);
        if (m == k) throw PathError(where(ln) + ": 'Shatx' is for off-diagonal estimates only");
        taps = parse_values(in, ln);
      } else {
        taps = parse_values(in, ln);
      }
      if (k > ps.nodes || m > ps.nodes)
        throw PathError(fmt::format("{}: index exceeds node count {}", where(ln), ps.nodes));
      if (taps.empty()) throw PathError(where(ln) + ": row has no coefficients");
      const std::size_t cls = key == "P" ? 0 : key == "S" ? 1 : 2;  // Shat and Shatx share a class
      if (have_lengths && taps.size() > max_len[cls])
        throw PathError(fmt::format("{}: row has {} taps, header allows {}", where(ln), taps.size(), max_len[cls]));
      FirResponse f{std::move(taps)};
      bool fresh = true;
      if (cls == 0) fresh = primary.emplace(k - 1, std::move(f)).second;
      if (cls == 1) fresh = secondary.emplace(std::pair{k - 1, m - 1}, std::move(f)).second;
      if (cls == 2) fresh = estimates.emplace(std::pair{k - 1, m - 1}, std::move(f)).second;
      if (!fresh) throw PathError(where(ln) + ": duplicate row");
    } else {
      throw PathError(fmt::format("{}: unknown row label '{}'", where(ln), key));
    }
  }
  if (!have_magic) throw PathError(file.string() + ": missing 'anc-paths 1' header");
  if (!have_nodes) throw PathError(file.string() + ": missing 'nodes' line");
  if (expected_nodes && *expected_nodes != ps.nodes)
    throw PathError(fmt::format("{}: file describes {} nodes, scenario expects {}", file.string(), ps.nodes,
                                *expected_nodes));

  const std::size_t K = ps.nodes;
  ps.primary.resize(K);
  ps.secondary.assign(K, std::vector<FirResponse>(K));
  for (auto& [k, f] : primary) ps.primary[k] = std::move(f);
  for (auto& [km, f] : secondary) ps.secondary[km.first][km.second] = std::move(f);
  if (!estimates.empty()) {
    ps.estimates.assign(K, std::vector<FirResponse>(K));
    for (auto& [km, f] : estimates) ps.estimates[km.first][km.second] = std::move(f);
  }
  ps.validate();
  return ps;
}

void save_center_filters(const std::vector<std::vector<double>>& centers, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw PathError(fmt::format("cannot write '{}'", file.string()));
  out << "anc-centers 1\n";
  out << "nodes " << centers.size() << '\n';
  for (std::size_t k = 0; k < centers.size(); ++k) write_row(out, fmt::format("W {}", k + 1), centers[k]);
}

std::vector<std::vector<double>> load_center_filters(const std::filesystem::path& file, std::size_t nodes,
                                                     std::size_t taps) {
  const auto lines = read_lines(file);
  std::vector<std::vector<double>> out(nodes);
  std::vector<char> seen(nodes, 0);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::istringstream in(lines[i]);
    std::string key;
    if (!(in >> key) || key[0] == '#' || key == "anc-centers" || key == "nodes") continue;
    if (key != "W") throw PathError(fmt::format("{}:{}: unknown row label '{}'", file.string(), ln, key));
    std::string a;
    if (!(in >> a)) throw PathError(fmt::format("{}:{}: missing index", file.string(), ln));
    const std::size_t k = parse_index(a, ln);
    if (k > nodes) throw PathError(fmt::format("{}:{}: node {} exceeds scenario node count {}", file.string(), ln, k, nodes));
    auto w = parse_values(in, ln);
    if (w.size() != taps)
      throw PathError(fmt::format("{}:{}: centre filter has {} taps, expected {}", file.string(), ln, w.size(), taps));
    if (seen[k - 1]) throw PathError(fmt::format("{}:{}: duplicate row", file.string(), ln));
    seen[k - 1] = 1;
    out[k - 1] = std::move(w);
  }
  for (std::size_t k = 0; k < nodes; ++k)
    if (!seen[k]) throw PathError(fmt::format("{}: no centre filter for node {}", file.string(), k + 1));
  return out;
}

}  // namespace anc
