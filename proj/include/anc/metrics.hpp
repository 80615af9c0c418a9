#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace anc {

inline constexpr double kRnlFloor = 1e-20;

/// Residual noise level of one error sample: 10 log10(e^2 + 1e-20).
double rnl(double e) noexcept;

/// Arithmetic mean of a window of RNL values. Throws std::logic_error if the
/// window does not hold exactly expected_len values.
double avg_rnl(std::span<const double> window, std::size_t expected_len);

struct AnseValue {
  double total_db = 0.0;
  std::vector<double> node_db;
  bool degenerate = false;  // some node had an all-zero disturbance block
};

/// Mean over nodes of 10 log10((mean e_k^2 + eps) / (mean d_k^2 + eps)) for one block.
/// e[k] and d[k] must have equal length for every node.
AnseValue anse(const std::vector<std::span<const double>>& e, const std::vector<std::span<const double>>& d);

/// Same, from per-node mean-square powers.
AnseValue anse_from_power(std::span<const double> error_power, std::span<const double> disturbance_power);

struct PowerSpectrum {
  std::vector<double> freq_hz;
  std::vector<double> psd;  // one-sided density, units^2 / Hz
};

/// Welch estimate: Hann window, `overlap` in [0, 1) as a fraction of segment_len.
PowerSpectrum power_spectrum(std::span<const double> signal, int sample_rate_hz, std::size_t segment_len,
                             double overlap = 0.5);

double to_db(double power) noexcept;

}  // namespace anc
