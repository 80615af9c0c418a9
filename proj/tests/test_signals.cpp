#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "anc/metrics.hpp"
#include "anc/signals.hpp"
#include "test_helpers.hpp"

using namespace anc;

TEST_CASE("quarter-rate tone hits the four quadrant values") {
  const auto s = gen_multitone({{4000.0, 1.0, 0.0}}, 16000, 4);
  REQUIRE(s.size() == 4);
  CHECK(std::abs(s.samples[0]) < 1e-12);
  CHECK(s.samples[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(s.samples[2]) < 1e-12);
  CHECK(s.samples[3] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("empty tone list yields silence") {
  const auto s = gen_multitone({}, 16000, 8);
  CHECK(s.samples == std::vector<double>(8, 0.0));
}

TEST_CASE("five-tone signal is the sum of its tones") {
  std::vector<ToneSpec> tones;
  for (double f : {300.0, 400.0, 500.0, 600.0, 700.0}) tones.push_back({f, 1.0, 0.0});
  const auto s = gen_multitone(tones, 16000, 1000);
  for (std::size_t n : {0u, 1u, 17u, 513u, 999u}) {
    double want = 0.0;
    for (double f : {300.0, 400.0, 500.0, 600.0, 700.0}) want += std::sin(2.0 * std::numbers::pi * f * n / 16000.0);
    CHECK(s.samples[n] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("tones at or above Nyquist are rejected") {
  CHECK_THROWS_AS(gen_multitone({{8000.0, 1.0, 0.0}}, 16000, 4), SignalError);
  CHECK_THROWS_AS(gen_multitone({{9000.0, 1.0, 0.0}}, 16000, 4), SignalError);
  CHECK_NOTHROW(gen_multitone({{7999.0, 1.0, 0.0}}, 16000, 4));
}

TEST_CASE("unit tone over whole periods has RMS 1/sqrt(2)") {
  // f divides fs into an integer period; several phases
  for (double f : {100.0, 400.0, 1000.0, 2000.0}) {
    for (double phase : {0.0, 0.3, 1.7}) {
      const auto period = static_cast<std::size_t>(16000.0 / f);
      const auto s = gen_multitone({{f, 1.0, phase}}, 16000, period * 25);
      CHECK(std::abs(rms(s.samples) - 1.0 / std::sqrt(2.0)) < 1e-9);
    }
  }
}

TEST_CASE("band-limited noise concentrates its power in band") {
  const auto s = gen_bandlimited_noise(200.0, 600.0, 16000, 16000 * 8, 42, 0.5);
  CHECK(rms(s.samples) == doctest::Approx(0.5).epsilon(1e-12));
  const auto ps = power_spectrum(s.samples, 16000, 4096, 0.5);
  double inside = 0.0, total = 0.0;
  for (std::size_t b = 0; b < ps.psd.size(); ++b) {
    total += ps.psd[b];
    if (ps.freq_hz[b] >= 180.0 && ps.freq_hz[b] <= 620.0) inside += ps.psd[b];
  }
  CHECK(inside / total >= 0.90);
  // out-of-band rejection, band widened by 10% on each side
  CHECK((total - inside) / total <= 0.10);
}

TEST_CASE("band-limited noise is a pure function of its seed") {
  const auto a = gen_bandlimited_noise(200.0, 600.0, 16000, 5000, 9, 0.3);
  const auto b = gen_bandlimited_noise(200.0, 600.0, 16000, 5000, 9, 0.3);
  const auto c = gen_bandlimited_noise(200.0, 600.0, 16000, 5000, 10, 0.3);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
}

TEST_CASE("zero target RMS gives silence; bad band edges are rejected") {
  const auto s = gen_bandlimited_noise(200.0, 600.0, 16000, 1000, 1, 0.0);
  CHECK(s.samples == std::vector<double>(1000, 0.0));
  CHECK_THROWS_AS(gen_bandlimited_noise(600.0, 200.0, 16000, 10, 1, 1.0), SignalError);
  CHECK_THROWS_AS(gen_bandlimited_noise(0.0, 200.0, 16000, 10, 1, 1.0), SignalError);
  CHECK_THROWS_AS(gen_bandlimited_noise(200.0, 8000.0, 16000, 10, 1, 1.0), SignalError);
}

TEST_CASE("band-pass design has unit gain at the band centre and linear phase") {
  const auto h = design_bandpass(200.0, 600.0, 16000, 512);
  REQUIRE(h.size() == 513);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == doctest::Approx(h[h.size() - 1 - i]).epsilon(1e-12));
}

TEST_CASE("wave reader normalises PCM16 and keeps the header rate") {
  const auto dir = test::temp_dir("wave");
  save_wave_file(dir / "a.wav", {{0.0, 32767.0 / 32768.0}}, 16000, WaveEncoding::pcm16);
  const auto s = load_wave_file(dir / "a.wav");
  CHECK(s.sample_rate_hz == 16000);
  REQUIRE(s.size() == 2);
  CHECK(s.samples[0] == 0.0);
  CHECK(s.samples[1] == doctest::Approx(0.99997).epsilon(1e-5));
}

TEST_CASE("wave reader extracts the first channel of a stereo file") {
  const auto dir = test::temp_dir("wave_stereo");
  save_wave_file(dir / "s.wav", {{0.25, -0.5, 0.125}, {0.9, 0.9, 0.9}}, 8000, WaveEncoding::float32);
  const auto s = load_wave_file(dir / "s.wav");
  CHECK(s.sample_rate_hz == 8000);
  CHECK(s.samples == std::vector<double>{0.25, -0.5, 0.125});
}

TEST_CASE("wave reader rejects truncated and unsupported files") {
  const auto dir = test::temp_dir("wave_bad");
  save_wave_file(dir / "ok.wav", {{0.1, 0.2, 0.3}}, 16000, WaveEncoding::pcm16);
  std::ifstream in(dir / "ok.wav", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::ofstream(dir / "trunc.wav", std::ios::binary) << bytes.substr(0, 20);
  CHECK_THROWS_AS(load_wave_file(dir / "trunc.wav"), SignalError);

  std::string no_riff = bytes;
  no_riff[0] = 'X';
  std::ofstream(dir / "noriff.wav", std::ios::binary) << no_riff;
  CHECK_THROWS_AS(load_wave_file(dir / "noriff.wav"), SignalError);

  std::string pcm24 = bytes;
  pcm24[34] = 24;  // bits per sample
  std::ofstream(dir / "pcm24.wav", std::ios::binary) << pcm24;
  CHECK_THROWS_AS(load_wave_file(dir / "pcm24.wav"), SignalError);

  CHECK_THROWS_AS(load_wave_file(dir / "missing.wav"), SignalError);
}
