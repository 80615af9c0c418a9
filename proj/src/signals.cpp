#include "anc/signals.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace anc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
}

}  // namespace

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

Signal gen_multitone(const std::vector<ToneSpec>& tones, int sample_rate_hz, std::size_t n_samples) {
  if (sample_rate_hz <= 0) throw SignalError("sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  for (const auto& t : tones) {
    if (!(t.frequency_hz > 0.0) || t.frequency_hz >= nyquist)
      throw SignalError(fmt::format("tone at {} Hz violates Nyquist limit {} Hz", t.frequency_hz, nyquist));
    if (t.amplitude < 0.0) throw SignalError("tone amplitude must be nonnegative");
  }
  Signal s;
  s.sample_rate_hz = sample_rate_hz;
  s.samples.assign(n_samples, 0.0);
  for (const auto& t : tones) {
    const double w = kTwoPi * t.frequency_hz / sample_rate_hz;
    for (std::size_t n = 0; n < n_samples; ++n)
      s.samples[n] += t.amplitude * std::sin(w * static_cast<double>(n) + t.phase_rad);
  }
  return s;
}

std::vector<double> design_bandpass(double low_hz, double high_hz, int sample_rate_hz, std::size_t order) {
  const double fl = low_hz / sample_rate_hz;
  const double fh = high_hz / sample_rate_hz;
  const double mid = static_cast<double>(order) / 2.0;
  std::vector<double> h(order + 1);
  for (std::size_t n = 0; n <= order; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double ideal = 2.0 * fh * sinc(2.0 * fh * t) - 2.0 * fl * sinc(2.0 * fl * t);
    const double window = order == 0 ? 1.0 : 0.54 - 0.46 * std::cos(kTwoPi * n / static_cast<double>(order));
    h[n] = ideal * window;
  }
  // normalise to unit magnitude at the centre frequency
  const double wc = kTwoPi * 0.5 * (fl + fh);
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n <= order; ++n) {
    re += h[n] * std::cos(wc * n);
    im -= h[n] * std::sin(wc * n);
  }
  const double g = std::hypot(re, im);
  if (g > 0.0)
    for (auto& v : h) v /= g;
  return h;
}

Signal gen_bandlimited_noise(double low_hz, double high_hz, int sample_rate_hz, std::size_t n_samples,
                             std::uint64_t seed, double target_rms) {
  if (sample_rate_hz <= 0) throw SignalError("sample rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate_hz / 2.0))
    throw SignalError(fmt::format("invalid band edges [{}, {}] Hz for fs {} Hz", low_hz, high_hz, sample_rate_hz));
  if (!(target_rms >= 0.0)) throw SignalError("target rms must be nonnegative");

  constexpr std::size_t kOrder = 512;
  const auto h = design_bandpass(low_hz, high_hz, sample_rate_hz, kOrder);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(n_samples + kOrder);
  for (auto& v : white) v = gauss(rng);

  Signal s;
  s.sample_rate_hz = sample_rate_hz;
  s.samples.assign(n_samples, 0.0);
  // steady-state part of the convolution only; the first kOrder inputs prime the filter
  for (std::size_t i = 0; i < n_samples; ++i) {
    double acc = 0.0;
    const double* x = white.data() + i + kOrder;
    for (std::size_t j = 0; j <= kOrder; ++j) acc += h[j] * x[-static_cast<std::ptrdiff_t>(j)];
    s.samples[i] = acc;
  }
  const double r = rms(s.samples);
  const double scale = r > 0.0 ? target_rms / r : 0.0;
  for (auto& v : s.samples) v *= scale;
  return s;
}

// ---------------------------------------------------------------------------
// RIFF/WAVE

namespace {

std::uint16_t read_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Signal load_wave_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SignalError(fmt::format("cannot open wave file '{}'", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return SignalError(fmt::format("wave file '{}': {}", path.string(), why));
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw fail("fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      block_align = read_u16(f + 12);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw fail("extensible fmt chunk too short");
        format = read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels == 0 || rate == 0) throw fail("invalid channel count or sample rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) throw fail(fmt::format("unsupported encoding (format {}, {} bits)", format, bits));
  const std::size_t width = bits / 8;
  if (block_align != width * channels) throw fail("inconsistent block alignment");
  if (data_len % block_align != 0) throw fail("data chunk is not a whole number of frames");

  Signal s;
  s.sample_rate_hz = static_cast<int>(rate);
  const std::size_t frames = data_len / block_align;
  s.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * block_align;
    if (pcm16) {
      s.samples[i] = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    } else {
      const std::uint32_t raw = read_u32(p);
      float v;
      std::memcpy(&v, &raw, sizeof v);
      if (!std::isfinite(v)) throw fail(fmt::format("non-finite sample at frame {}", i));
      s.samples[i] = v;
    }
  }
  return s;
}

void save_wave_file(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
                    int sample_rate_hz, WaveEncoding encoding) {
  if (channels.empty()) throw SignalError("no channels to write");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw SignalError("channel lengths differ");
  const std::uint16_t width = encoding == WaveEncoding::pcm16 ? 2 : 4;
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const auto data_len = static_cast<std::uint32_t>(frames * width * nch);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, encoding == WaveEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, nch);
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * width * nch);
  put_u16(out, static_cast<std::uint16_t>(width * nch));
  put_u16(out, static_cast<std::uint16_t>(8 * width));
  out += "data";
  put_u32(out, data_len);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& c : channels) {
      if (encoding == WaveEncoding::pcm16) {
        const double clipped = std::clamp(c[i], -1.0, 32767.0 / 32768.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
      } else {
        const float v = static_cast<float>(c[i]);
        std::uint32_t raw;
        std::memcpy(&raw, &v, sizeof raw);
        put_u32(out, raw);
      }
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SignalError(fmt::format("cannot write wave file '{}'", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace anc
