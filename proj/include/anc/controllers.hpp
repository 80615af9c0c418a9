#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "anc/acoustics.hpp"
#include "anc/delay_line.hpp"

namespace anc {

enum class Algorithm { decentralized_fxlms, leaky, wcfxlms, sb_wcfxlms, centralized, collocated_centralized };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view s);
inline bool is_centralized(Algorithm a) {
  return a == Algorithm::centralized || a == Algorithm::collocated_centralized;
}

struct BoostEvent {
  std::size_t sample = 0;
  double old_eta_min = 0.0;
  double new_eta_min = 0.0;
};

struct NodeParams {
  std::size_t taps = 512;
  double mu = 0.0;
  double alpha = 0.0;
  // samples per self-boost window (T * fs); 0 disables boosting
  std::size_t boost_window = 0;
};

/// One independent node: reference in, control out, local error in.
///
/// Per sample the caller runs output() (or control_output() followed by
/// filtered_reference_step()), feeds the plant, then adapt(). Nothing here
/// reads another node's state.
class NodeController {
 public:
  NodeController(Algorithm algorithm, FirResponse model, const NodeParams& params);

  /// Pushes x_k(n) and returns y_k(n) = w^T x_k(n).
  double control_output(double x);
  /// x'_kk(n) = (s_hat_kk * x_k)(n), shifted into the filtered-reference line.
  double filtered_reference_step();
  double output(double x) {
    const double y = control_output(x);
    filtered_reference_step();
    return y;
  }

  /// w <- w + mu x' e
  void fxlms_update(double e);
  /// w <- w + mu x' e + mu alpha (w_center - w)
  void wcfxlms_update(double e);
  /// wcfxlms_update against a centre pinned at zero.
  void leaky_fxlms_update(double e);
  /// Accumulates eta(n); closes a window every boost_window samples and
  /// re-centres on strict improvement of the windowed mean.
  std::optional<BoostEvent> self_boost_tick(double e, std::size_t n);

  /// Update for the configured algorithm, then the boost check when enabled.
  std::optional<BoostEvent> adapt(double e, std::size_t n);

  /// Stops adaptation and mutes the output from now on.
  void mark_diverged() noexcept { diverged_ = true; }
  bool diverged() const noexcept { return diverged_; }

  void set_weights(std::span<const double> w);
  void set_center(std::span<const double> w);

  std::span<const double> weights() const noexcept { return w_; }
  std::span<const double> center() const noexcept { return center_; }
  std::span<const double> filtered_reference() const noexcept { return fx_.window(); }
  double eta_min() const noexcept { return eta_min_; }
  std::size_t boost_count() const noexcept { return boosts_; }
  // bumped on every write to the centre filter
  std::uint64_t center_version() const noexcept { return center_version_; }
  Algorithm algorithm() const noexcept { return algorithm_; }
  const NodeParams& params() const noexcept { return params_; }

 private:
  void apply_update(double e, std::span<const double> center, double mu_alpha);

  Algorithm algorithm_;
  FirResponse model_;
  NodeParams params_;
  std::vector<double> w_;
  std::vector<double> center_;
  std::vector<double> zero_center_;
  DelayLine x_;
  DelayLine fx_;
  double eta_sum_ = 0.0;
  std::size_t eta_count_ = 0;
  double eta_min_ = std::numeric_limits<double>::infinity();
  std::size_t boosts_ = 0;
  std::uint64_t center_version_ = 0;
  bool diverged_ = false;
};

/// Multiple-error FxLMS over the full estimate matrix:
///   w_mj <- w_mj + mu_m sum_k x'_kmj(n) e_k(n),   x'_kmj = s_hat_km * x_j
/// In plain centralized mode source m is driven by reference m only; in
/// collocated mode every source carries one sub-filter per reference and
/// the sub-filter outputs sum.
class CentralizedController {
 public:
  CentralizedController(const PathSet& paths, std::size_t taps, std::vector<double> mu, bool collocated);

  /// Pushes one sample per reference and writes y for every source.
  void control_outputs(std::span<const double> x, std::span<double> y);
  void update(std::span<const double> e);

  void mark_diverged() noexcept { diverged_ = true; }
  bool diverged() const noexcept { return diverged_; }
  std::size_t nodes() const noexcept { return K_; }
  std::span<const double> weights(std::size_t source, std::size_t ref_slot = 0) const;
  std::size_t refs_per_source() const noexcept { return refs_.front().size(); }

 private:
  std::size_t K_;
  std::size_t taps_;
  std::size_t model_len_;
  std::vector<double> mu_;
  std::vector<std::vector<FirResponse>> models_;  // [k][m]
  std::vector<std::vector<char>> model_active_;
  std::vector<std::vector<std::size_t>> refs_;    // reference indices feeding source m
  std::vector<DelayLine> x_;                      // per reference
  // fx_[(k * K + m) * J + slot]
  std::vector<DelayLine> fx_;
  std::vector<std::vector<std::vector<double>>> w_;  // [m][slot]
  bool diverged_ = false;
};

}  // namespace anc
