#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anc/controllers.hpp"
#include "anc/signals.hpp"

namespace anc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReferenceMode { shared_single, per_node };
enum class NoiseKind { multitone, bandlimited, wavefile };

struct NoiseConfig {
  NoiseKind kind = NoiseKind::multitone;
  std::vector<double> tones_hz{300, 400, 500, 600, 700};
  std::vector<double> amplitudes{1.0};  // broadcast when a single value
  std::vector<double> phases_rad{0.0};
  double low_hz = 200.0;
  double high_hz = 600.0;
  double rms = 0.5;
  std::string file;
  std::uint64_t seed = 1;
  // per-node mode only: node k draws band-limited noise with seed + k
  bool distinct_per_node = false;
};

struct PathConfig {
  std::string file;  // when set, synthesis parameters are ignored
  std::size_t primary_taps = 512;
  std::size_t secondary_taps = 512;
  std::size_t delay_min = 1;
  std::size_t delay_max = 8;
  std::size_t primary_extra_delay = 16;
  double decay = 0.2;
  double coupling = 0.0;
  std::uint64_t seed = 7;
};

struct ScenarioConfig {
  std::size_t nodes = 1;
  Algorithm algorithm = Algorithm::sb_wcfxlms;
  ReferenceMode reference_mode = ReferenceMode::shared_single;
  int sample_rate_hz = 16000;
  double duration_s = 10.0;
  std::size_t control_taps = 512;
  std::size_t model_taps = 256;
  double mu_bar = 0.1;
  std::vector<double> alpha{0.0};    // one value per node, or one broadcast value
  double boost_interval_s = 1.0;     // infinity disables self-boosting
  double anse_block_s = 1.0;
  bool store_samples = false;
  double divergence_limit = 1e3;     // |y| above this marks the node DIVERGED
  double sensor_noise_rms = 0.0;
  std::uint64_t sensor_noise_seed = 3;
  std::size_t spectrum_segment = 4096;
  double spectrum_tail_s = 4.0;      // trailing span of e_k kept for the spectrum

  NoiseConfig noise;
  PathConfig paths;
  double estimate_mismatch = 0.0;
  std::uint64_t estimate_seed = 11;
  std::string center_file;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  double alpha_for(std::size_t k) const { return alpha.size() == 1 ? alpha.front() : alpha.at(k); }
  std::size_t total_samples() const;
  std::size_t samples_per(double seconds) const;
};

/// Every result-affecting field as ("section.key", value), in a fixed order.
std::vector<std::pair<std::string, std::string>> to_key_values(const ScenarioConfig& cfg);

/// Sets one field from its textual form. Throws ConfigError on unknown keys or bad values.
void set_value(ScenarioConfig& cfg, const std::string& key, const std::string& value);

/// Applies "key=value" overrides.
void apply_overrides(ScenarioConfig& cfg, const std::vector<std::string>& overrides);

/// Parses an INI-style scenario file ([section] headers, key = value, ';' or '#'
/// comments). Relative file references resolve against the file's directory.
ScenarioConfig load_scenario(const std::filesystem::path& file);

/// Parses an INI-style file into ordered (section.key, raw value) pairs.
std::vector<std::pair<std::string, std::string>> read_ini_pairs(const std::filesystem::path& file);

std::vector<double> parse_double_list(const std::string& s);

}  // namespace anc
