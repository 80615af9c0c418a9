#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace anc {

/// A sampled, dimensionless waveform (nominal full scale +-1).
struct Signal {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const noexcept { return samples.size(); }
};

struct ToneSpec {
  double frequency_hz = 0.0;
  double amplitude = 1.0;
  double phase_rad = 0.0;
};

class SignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// samples[n] = sum_i amp_i * sin(2 pi f_i n / fs + phi_i).
/// Throws SignalError if any tone sits at or above Nyquist.
Signal gen_multitone(const std::vector<ToneSpec>& tones, int sample_rate_hz, std::size_t n_samples);

/// Seeded Gaussian white noise through a 512th-order Hamming-windowed sinc
/// band-pass, rescaled to target_rms. Requires 0 < low < high < fs/2.
Signal gen_bandlimited_noise(double low_hz, double high_hz, int sample_rate_hz, std::size_t n_samples,
                             std::uint64_t seed, double target_rms);

/// Linear-phase band-pass taps (order+1 of them), unit gain at the band centre.
std::vector<double> design_bandpass(double low_hz, double high_hz, int sample_rate_hz, std::size_t order);

/// Reads RIFF/WAVE, PCM16 or IEEE float32. Multi-channel files yield the
/// first channel only. PCM16 is scaled by 1/32768.
Signal load_wave_file(const std::filesystem::path& path);

enum class WaveEncoding { pcm16, float32 };

void save_wave_file(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
                    int sample_rate_hz, WaveEncoding encoding);

double rms(const std::vector<double>& x);

}  // namespace anc
