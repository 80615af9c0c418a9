#include "anc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace anc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(v[i]);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size() || std::isnan(v)) throw ConfigError(fmt::format("{}: '{}' is not a number", key, raw));
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, raw));
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is out of range", key, raw));
  }
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, raw));
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string& key, const std::string&)> set;
};

#define ANC_UINT_FIELD(name, member)                                                             \
  Field {                                                                                        \
    name, [](const ScenarioConfig& c) { return std::to_string(c.member); },                      \
        [](ScenarioConfig& c, const std::string& k, const std::string& v) {                      \
          c.member = static_cast<decltype(c.member)>(parse_uint(k, v));                          \
        }                                                                                        \
  }
#define ANC_DOUBLE_FIELD(name, member)                                                                      \
  Field {                                                                                                   \
    name, [](const ScenarioConfig& c) { return fmt_double(c.member); },                                     \
        [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); } \
  }
#define ANC_STRING_FIELD(name, member)                                                             \
  Field {                                                                                          \
    name, [](const ScenarioConfig& c) { return c.member; },                                        \
        [](ScenarioConfig& c, const std::string&, const std::string& v) { c.member = trim(v); } \
  }
#define ANC_LIST_FIELD(name, member)                                                                      \
  Field {                                                                                                 \
    name, [](const ScenarioConfig& c) { return fmt_list(c.member); },                                     \
        [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.member = parse_list(k, v); } \
  }
#define ANC_BOOL_FIELD(name, member)                                                                      \
  Field {                                                                                                 \
    name, [](const ScenarioConfig& c) { return std::string(c.member ? "true" : "false"); },              \
        [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      ANC_UINT_FIELD("scenario.nodes", nodes),
      Field{"scenario.algorithm", [](const ScenarioConfig& c) { return std::string(to_string(c.algorithm)); },
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              const auto a = parse_algorithm(trim(v));
              if (!a) throw ConfigError(fmt::format("{}: unknown algorithm '{}'", k, v));
              c.algorithm = *a;
            }},
      Field{"scenario.reference_mode",
            [](const ScenarioConfig& c) {
              return std::string(c.reference_mode == ReferenceMode::shared_single ? "shared-single" : "per-node");
            },
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              const auto s = trim(v);
              if (s == "shared-single")
                c.reference_mode = ReferenceMode::shared_single;
              else if (s == "per-node")
                c.reference_mode = ReferenceMode::per_node;
              else
                throw ConfigError(fmt::format("{}: expected shared-single or per-node, got '{}'", k, v));
            }},
      Field{"scenario.sample_rate", [](const ScenarioConfig& c) { return std::to_string(c.sample_rate_hz); },
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              const auto r = parse_uint(k, v);
              if (r > 10'000'000) throw ConfigError(fmt::format("{}: implausible sample rate {}", k, r));
              c.sample_rate_hz = static_cast<int>(r);
            }},
      ANC_DOUBLE_FIELD("scenario.duration", duration_s),
      ANC_UINT_FIELD("scenario.control_taps", control_taps),
      ANC_UINT_FIELD("scenario.model_taps", model_taps),
      ANC_DOUBLE_FIELD("scenario.mu_bar", mu_bar),
      ANC_LIST_FIELD("scenario.alpha", alpha),
      ANC_DOUBLE_FIELD("scenario.boost_interval", boost_interval_s),
      ANC_DOUBLE_FIELD("scenario.anse_block", anse_block_s),
      ANC_BOOL_FIELD("scenario.store_samples", store_samples),
      ANC_DOUBLE_FIELD("scenario.divergence_limit", divergence_limit),
      ANC_DOUBLE_FIELD("scenario.sensor_noise_rms", sensor_noise_rms),
      ANC_UINT_FIELD("scenario.sensor_noise_seed", sensor_noise_seed),
      ANC_UINT_FIELD("scenario.spectrum_segment", spectrum_segment),
      ANC_DOUBLE_FIELD("scenario.spectrum_tail", spectrum_tail_s),

      Field{"noise.kind",
            [](const ScenarioConfig& c) {
              switch (c.noise.kind) {
                case NoiseKind::multitone:
                  return std::string("multitone");
                case NoiseKind::bandlimited:
                  return std::string("bandlimited");
                case NoiseKind::wavefile:
                  return std::string("wavefile");
              }
              return std::string();
            },
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              const auto s = trim(v);
              if (s == "multitone")
                c.noise.kind = NoiseKind::multitone;
              else if (s == "bandlimited")
                c.noise.kind = NoiseKind::bandlimited;
              else if (s == "wavefile")
                c.noise.kind = NoiseKind::wavefile;
              else
                throw ConfigError(fmt::format("{}: unknown noise kind '{}'", k, v));
            }},
      ANC_LIST_FIELD("noise.tones", noise.tones_hz),
      ANC_LIST_FIELD("noise.amplitudes", noise.amplitudes),
      ANC_LIST_FIELD("noise.phases", noise.phases_rad),
      ANC_DOUBLE_FIELD("noise.low", noise.low_hz),
      ANC_DOUBLE_FIELD("noise.high", noise.high_hz),
      ANC_DOUBLE_FIELD("noise.rms", noise.rms),
      ANC_STRING_FIELD("noise.file", noise.file),
      ANC_UINT_FIELD("noise.seed", noise.seed),
      ANC_BOOL_FIELD("noise.distinct_per_node", noise.distinct_per_node),

      ANC_STRING_FIELD("paths.file", paths.file),
      ANC_UINT_FIELD("paths.primary_taps", paths.primary_taps),
      ANC_UINT_FIELD("paths.secondary_taps", paths.secondary_taps),
      ANC_UINT_FIELD("paths.delay_min", paths.delay_min),
      ANC_UINT_FIELD("paths.delay_max", paths.delay_max),
      ANC_UINT_FIELD("paths.primary_extra_delay", paths.primary_extra_delay),
      ANC_DOUBLE_FIELD("paths.decay", paths.decay),
      ANC_DOUBLE_FIELD("paths.coupling", paths.coupling),
      ANC_UINT_FIELD("paths.seed", paths.seed),

      ANC_DOUBLE_FIELD("estimate.mismatch", estimate_mismatch),
      ANC_UINT_FIELD("estimate.seed", estimate_seed),

      ANC_STRING_FIELD("center.file", center_file),
  };
  return table;
}

#undef ANC_UINT_FIELD
#undef ANC_DOUBLE_FIELD
#undef ANC_STRING_FIELD
#undef ANC_LIST_FIELD
#undef ANC_BOOL_FIELD

}  // namespace

std::vector<double> parse_double_list(const std::string& s) { return parse_list("list", s); }

std::vector<std::pair<std::string, std::string>> to_key_values(const ScenarioConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

void set_value(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

void apply_overrides(ScenarioConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", o));
    set_value(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

std::size_t ScenarioConfig::samples_per(double seconds) const {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
}

std::size_t ScenarioConfig::total_samples() const { return samples_per(duration_s); }

void ScenarioConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(nodes >= 1, "scenario.nodes must be at least 1");
  require(sample_rate_hz > 0, "scenario.sample_rate must be positive");
  require(std::isfinite(duration_s) && duration_s >= 0.0, "scenario.duration must be finite and >= 0");
  require(control_taps >= 1, "scenario.control_taps must be at least 1");
  require(model_taps >= 1, "scenario.model_taps must be at least 1");
  require(std::isfinite(mu_bar) && mu_bar >= 0.0, "scenario.mu_bar must be finite and >= 0");
  require(alpha.size() == 1 || alpha.size() == nodes,
          fmt::format("scenario.alpha needs 1 or {} values, got {}", nodes, alpha.size()));
  for (double a : alpha) require(std::isfinite(a) && a >= 0.0, "scenario.alpha values must be finite and >= 0");
  require(boost_interval_s > 0.0, "scenario.boost_interval must be positive (inf disables boosting)");
  require(std::isinf(boost_interval_s) || samples_per(boost_interval_s) >= 1,
          "scenario.boost_interval is shorter than one sample");
  require(std::isfinite(anse_block_s) && anse_block_s > 0.0 && samples_per(anse_block_s) >= 1,
          "scenario.anse_block must cover at least one sample");
  require(divergence_limit > 0.0, "scenario.divergence_limit must be positive");
  require(std::isfinite(sensor_noise_rms) && sensor_noise_rms >= 0.0, "scenario.sensor_noise_rms must be >= 0");
  require(spectrum_segment >= 2, "scenario.spectrum_segment must be at least 2");
  require(std::isfinite(spectrum_tail_s) && spectrum_tail_s >= 0.0, "scenario.spectrum_tail must be >= 0");

  switch (noise.kind) {
    case NoiseKind::multitone: {
      const std::size_t n = noise.tones_hz.size();
      require(noise.amplitudes.size() == 1 || noise.amplitudes.size() == n,
              "noise.amplitudes needs 1 value or one per tone");
      require(noise.phases_rad.size() == 1 || noise.phases_rad.size() == n, "noise.phases needs 1 value or one per tone");
      for (double f : noise.tones_hz)
        require(f > 0.0 && f < sample_rate_hz / 2.0, fmt::format("noise.tones: {} Hz violates the Nyquist limit", f));
      for (double a : noise.amplitudes) require(a >= 0.0, "noise.amplitudes must be >= 0");
      break;
    }
    case NoiseKind::bandlimited:
      require(noise.low_hz > 0.0 && noise.low_hz < noise.high_hz && noise.high_hz < sample_rate_hz / 2.0,
              "noise.low/noise.high must satisfy 0 < low < high < fs/2");
      require(std::isfinite(noise.rms) && noise.rms >= 0.0, "noise.rms must be >= 0");
      break;
    case NoiseKind::wavefile:
      require(!noise.file.empty(), "noise.file is required for wavefile noise");
      break;
  }
  require(!noise.distinct_per_node ||
              (noise.kind == NoiseKind::bandlimited && reference_mode == ReferenceMode::per_node),
          "noise.distinct_per_node applies to band-limited noise in per-node mode only");

  if (paths.file.empty()) {
    require(paths.primary_taps >= 1 && paths.secondary_taps >= 1, "paths tap counts must be at least 1");
    require(paths.delay_min <= paths.delay_max, "paths.delay_min exceeds paths.delay_max");
    require(paths.decay >= 0.0 && std::isfinite(paths.decay), "paths.decay must be >= 0");
    require(paths.coupling >= 0.0 && std::isfinite(paths.coupling), "paths.coupling must be >= 0");
  }
  require(std::isfinite(estimate_mismatch) && estimate_mismatch >= 0.0, "estimate.mismatch must be >= 0");
  require(center_file.empty() || algorithm == Algorithm::wcfxlms || algorithm == Algorithm::sb_wcfxlms,
          "center.file only applies to wcfxlms and sb-wcfxlms");
}

std::vector<std::pair<std::string, std::string>> read_ini_pairs(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", file.string()));
  std::stringstream filtered;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t[0] == '#') continue;
    filtered << line << '\n';
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(filtered, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: line {}: {}", file.string(), e.line(), e.message()));
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out.emplace_back(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) out.emplace_back(name + "." + key, leaf.data());
  }
  return out;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  ScenarioConfig cfg;
  for (const auto& [key, value] : read_ini_pairs(file)) set_value(cfg, key, value);
  const auto base = file.parent_path();
  const auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(cfg.noise.file);
  resolve(cfg.paths.file);
  resolve(cfg.center_file);
  return cfg;
}

}  // namespace anc
