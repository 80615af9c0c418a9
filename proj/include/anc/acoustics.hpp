#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "anc/delay_line.hpp"

namespace anc {

class PathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite impulse response. An empty tap vector means "no path".
struct FirResponse {
  std::vector<double> taps;

  std::size_t size() const noexcept { return taps.size(); }
  bool empty() const noexcept { return taps.empty(); }
  bool is_zero() const noexcept;
  double energy() const noexcept;

  friend bool operator==(const FirResponse&, const FirResponse&) = default;
};

/// Plant wiring for K nodes.
///   primary[k]       reference k -> error sensor k (produces d_k)
///   secondary[k][m]  secondary source m -> error sensor k
///   estimates[k][m]  model of secondary[k][m]; the diagonal is always present,
///                    off-diagonals only when a centralized controller needs them
struct PathSet {
  std::size_t nodes = 0;
  int sample_rate_hz = 16000;
  std::vector<FirResponse> primary;
  std::vector<std::vector<FirResponse>> secondary;
  std::vector<std::vector<FirResponse>> estimates;

  const FirResponse& estimate(std::size_t k) const { return estimates[k][k]; }
  bool has_full_estimates() const;

  /// Throws PathError if dimensions or tap values are inconsistent.
  void validate() const;

  friend bool operator==(const PathSet&, const PathSet&) = default;
};

/// Streaming FIR filter over a private input history.
class Convolver {
 public:
  Convolver() = default;
  explicit Convolver(std::size_t length) : history_(length) {}

  /// Pushes one input and returns sum_j taps[j] * input(n - j).
  double step(const FirResponse& path, double input) noexcept {
    history_.push(input);
    return dot(path.taps, history_.window());
  }
  void reset() noexcept { history_.reset(); }
  const DelayLine& history() const noexcept { return history_; }

 private:
  DelayLine history_;
};

inline double convolve_step(Convolver& state, const FirResponse& path, double input) noexcept {
  return state.step(path, input);
}

enum class PlantStatus { ok, non_finite };

/// e_k(n) = d_k(n) - sum_m (s_km * y_m)(n), d_k(n) = (p_k * x_k)(n).
/// One instance per run; histories are shared by all paths driven by the same input.
class Plant {
 public:
  explicit Plant(const PathSet& paths);

  PlantStatus step(std::span<const double> x, std::span<const double> y, std::span<double> d,
                   std::span<double> e);

  /// Crosstalk at sensor k for the most recent step: sum_{m != k} (s_km * y_m)(n).
  double crosstalk(std::size_t k) const;

  void reset();
  std::size_t nodes() const noexcept { return paths_->nodes; }

 private:
  const PathSet* paths_;
  std::vector<DelayLine> x_hist_;
  std::vector<DelayLine> y_hist_;
  std::vector<std::vector<char>> active_;  // secondary[k][m] has a nonzero tap
};

struct PathSynthParams {
  std::size_t nodes = 1;
  std::size_t primary_len = 512;
  std::size_t secondary_len = 512;
  std::size_t delay_min = 1;
  std::size_t delay_max = 8;
  // added to the primary delay so broadband disturbances stay causally cancellable
  std::size_t primary_extra_delay = 16;
  double decay_rate = 0.2;
  double coupling_gain = 0.0;
  std::uint64_t seed = 1;
  int sample_rate_hz = 16000;
};

/// Exponentially decaying seeded Gaussian FIRs behind a random pure delay.
/// Primary and diagonal secondary paths have unit energy; off-diagonals have
/// energy coupling_gain^2. Estimates are left empty.
PathSet synth_paths(const PathSynthParams& params);

/// Fills paths.estimates with the first L taps of every secondary path plus
/// i.i.d. Gaussian noise of expected relative energy mismatch_noise.
void make_estimates(PathSet& paths, std::size_t model_taps, double mismatch_noise, std::uint64_t seed);

void save_paths(const PathSet& paths, const std::filesystem::path& file);
PathSet load_paths(const std::filesystem::path& file, std::optional<std::size_t> expected_nodes = std::nullopt);

/// Centre filters use the same row format with "W k" labels.
void save_center_filters(const std::vector<std::vector<double>>& centers, const std::filesystem::path& file);
std::vector<std::vector<double>> load_center_filters(const std::filesystem::path& file, std::size_t nodes,
                                                     std::size_t taps);

}  // namespace anc
