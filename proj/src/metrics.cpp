#include "anc/metrics.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

namespace anc {

double rnl(double e) noexcept { return 10.0 * std::log10(e * e + kRnlFloor); }

double to_db(double power) noexcept { return 10.0 * std::log10(power + 1e-30); }

double avg_rnl(std::span<const double> window, std::size_t expected_len) {
  if (window.size() != expected_len || expected_len == 0)
    throw std::logic_error(fmt::format("RNL window holds {} values, expected {}", window.size(), expected_len));
  double acc = 0.0;
  for (double v : window) acc += v;
  return acc / static_cast<double>(expected_len);
}

AnseValue anse_from_power(std::span<const double> error_power, std::span<const double> disturbance_power) {
  if (error_power.size() != disturbance_power.size() || error_power.empty())
    throw std::invalid_argument("ANSE needs one error and one disturbance power per node");
  AnseValue out;
  out.node_db.reserve(error_power.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < error_power.size(); ++k) {
    if (disturbance_power[k] == 0.0) out.degenerate = true;
    const double v = 10.0 * std::log10((error_power[k] + kRnlFloor) / (disturbance_power[k] + kRnlFloor));
    out.node_db.push_back(v);
    acc += v;
  }
  out.total_db = acc / static_cast<double>(error_power.size());
  return out;
}

AnseValue anse(const std::vector<std::span<const double>>& e, const std::vector<std::span<const double>>& d) {
  if (e.size() != d.size() || e.empty()) throw std::invalid_argument("ANSE needs paired error/disturbance blocks");
  std::vector<double> pe(e.size()), pd(d.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].size() != d[k].size() || e[k].empty())
      throw std::invalid_argument(fmt::format("node {}: error and disturbance blocks differ in length", k + 1));
    double se = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < e[k].size(); ++i) {
      se += e[k][i] * e[k][i];
      sd += d[k][i] * d[k][i];
    }
    pe[k] = se / static_cast<double>(e[k].size());
    pd[k] = sd / static_cast<double>(d[k].size());
  }
  return anse_from_power(pe, pd);
}

namespace {

// FFTW's planner is not re-entrant; execution of a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(double* p) const noexcept { fftw_free(p); }
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

}  // namespace

PowerSpectrum power_spectrum(std::span<const double> signal, int sample_rate_hz, std::size_t segment_len,
                             double overlap) {
  if (segment_len < 2 || segment_len > signal.size())
    throw std::invalid_argument(
        fmt::format("segment length {} is invalid for a {}-sample signal", segment_len, signal.size()));
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("overlap must lie in [0, 1)");
  if (sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");

  const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(segment_len * (1.0 - overlap))));
  const std::size_t bins = segment_len / 2 + 1;

  std::vector<double> window(segment_len);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < segment_len; ++i) {
    // periodic Hann
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / segment_len);
    wsum2 += window[i] * window[i];
  }

  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(segment_len));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(bins));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment_len), in.get(), out.get(), FFTW_ESTIMATE);
  }

  PowerSpectrum ps;
  ps.psd.assign(bins, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + segment_len <= signal.size(); start += hop) {
    for (std::size_t i = 0; i < segment_len; ++i) in.get()[i] = signal[start + i] * window[i];
    fftw_execute(plan);
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = out.get()[b][0], im = out.get()[b][1];
      ps.psd[b] += re * re + im * im;
    }
    ++segments;
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  const double scale = 1.0 / (static_cast<double>(segments) * sample_rate_hz * wsum2);
  ps.freq_hz.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    ps.psd[b] *= scale;
    const bool edge = b == 0 || (segment_len % 2 == 0 && b == bins - 1);
    if (!edge) ps.psd[b] *= 2.0;
    ps.freq_hz[b] = static_cast<double>(b) * sample_rate_hz / static_cast<double>(segment_len);
  }
  return ps;
}

}  // namespace anc
