#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mdt/frontend.hpp"
#include "mdt/rng.hpp"

using namespace mdt;

namespace {

Waveform make_wave(std::size_t n, int sr = 8000) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.assign(n, 0.0);
  return w;
}

FrontendConfig default_cfg() { return FrontendConfig{}; }

}  // namespace

TEST_CASE("all-zero waveform hits the floor everywhere") {
  const FrontendConfig cfg = default_cfg();
  Waveform w = make_wave(4000);
  SpectroTemporal log_st = log_mel_spectrogram(w, cfg);
  SpectroTemporal lin_st = linear_mel_spectrogram(w, cfg);
  const double log_floor = std::log(cfg.energy_floor);
  for (std::size_t t = 0; t < log_st.num_frames(); ++t) {
    for (std::size_t k = 0; k < log_st.num_bands(); ++k) {
      CHECK(log_st.values(t, k) == log_floor);
      CHECK(lin_st.values(t, k) == cfg.energy_floor);
    }
  }
}

TEST_CASE("frame count formula") {
  FrontendConfig cfg = default_cfg();
  Waveform w = make_wave(4000);
  CHECK(log_mel_spectrogram(w, cfg).num_frames() ==
        (4000 - 200) / 80 + 1);
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 200 + rng.uniform_int(5000);
    Waveform wv = make_wave(n);
    CHECK(log_mel_spectrogram(wv, cfg).num_frames() == num_frames(n, cfg));
    CHECK(num_frames(n, cfg) == (n - 200) / 80 + 1);
  }
}

TEST_CASE("log and linear are definitionally consistent") {
  FrontendConfig cfg = default_cfg();
  Rng rng(99);
  Waveform w = make_wave(2000);
  for (auto& s : w.samples) s = 0.3 * rng.gaussian();
  SpectroTemporal log_st = log_mel_spectrogram(w, cfg);
  SpectroTemporal lin_st = linear_mel_spectrogram(w, cfg);
  for (std::size_t t = 0; t < log_st.num_frames(); ++t) {
    for (std::size_t k = 0; k < log_st.num_bands(); ++k) {
      if (lin_st.values(t, k) > cfg.energy_floor) {
        CHECK(std::exp(log_st.values(t, k)) ==
              doctest::Approx(lin_st.values(t, k)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("doubling the amplitude quadruples linear cells") {
  FrontendConfig cfg = default_cfg();
  Rng rng(5);
  Waveform w = make_wave(2000);
  for (auto& s : w.samples) s = 0.2 * rng.gaussian();
  Waveform w2 = w;
  for (auto& s : w2.samples) s *= 2.0;
  SpectroTemporal a = linear_mel_spectrogram(w, cfg);
  SpectroTemporal b = linear_mel_spectrogram(w2, cfg);
  for (std::size_t t = 0; t < a.num_frames(); ++t) {
    for (std::size_t k = 0; k < a.num_bands(); ++k) {
      if (a.values(t, k) > 10.0 * cfg.energy_floor) {
        CHECK(b.values(t, k) ==
              doctest::Approx(4.0 * a.values(t, k)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("pure tone lands in the band whose center it hits") {
  FrontendConfig cfg = default_cfg();
  const int band = 10;
  // band centers sit at mel_lo + (band+1)*step
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_step = (hz_to_mel(cfg.f_max) - mel_lo) / (cfg.n_mel + 1);
  const double center_hz = mel_to_hz(mel_lo + (band + 1) * mel_step);

  Waveform w = make_wave(8000);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = 0.5 * std::sin(2.0 * 3.14159265358979323846 * center_hz *
                                  static_cast<double>(i) / w.sample_rate);
  }
  SpectroTemporal st = log_mel_spectrogram(w, cfg);
  std::vector<double> avg(st.num_bands(), 0.0);
  for (std::size_t t = 0; t < st.num_frames(); ++t) {
    for (std::size_t k = 0; k < st.num_bands(); ++k) {
      avg[k] += st.values(t, k);
    }
  }
  const std::size_t got = static_cast<std::size_t>(
      std::max_element(avg.begin(), avg.end()) - avg.begin());

  // independent recomputation: triangle weights evaluated at the tone
  int expected = -1;
  double best_w = 0.0;
  for (int k = 0; k < cfg.n_mel; ++k) {
    const double left = mel_lo + k * mel_step;
    const double m = hz_to_mel(center_hz);
    double weight = 0.0;
    if (m > left && m < left + 2 * mel_step) {
      weight = m <= left + mel_step ? (m - left) / mel_step
                                    : (left + 2 * mel_step - m) / mel_step;
    }
    if (weight > best_w) {
      best_w = weight;
      expected = k;
    }
  }
  CHECK(expected == band);
  CHECK(got == static_cast<std::size_t>(band));
}

TEST_CASE("white noise spreads across bands within 10 dB") {
  FrontendConfig cfg = default_cfg();
  cfg.preemphasis = 0.0;  // flat excitation; peak-normalized triangles then
                          // differ only by bandwidth
  Waveform w = make_wave(8000);
  Rng rng(1234);
  for (auto& s : w.samples) s = 0.25 * rng.gaussian();
  SpectroTemporal st = linear_mel_spectrogram(w, cfg);
  std::vector<double> avg(st.num_bands(), 0.0);
  for (std::size_t t = 0; t < st.num_frames(); ++t) {
    for (std::size_t k = 0; k < st.num_bands(); ++k) {
      avg[k] += st.values(t, k);
    }
  }
  for (auto& v : avg) v /= static_cast<double>(st.num_frames());
  const double lo = *std::min_element(avg.begin(), avg.end());
  const double hi = *std::max_element(avg.begin(), avg.end());
  CHECK(10.0 * std::log10(hi / lo) < 10.0);
}

TEST_CASE("scaling up the waveform never decreases a log-mel cell") {
  FrontendConfig cfg = default_cfg();
  Rng rng(42);
  Waveform w = make_wave(1600);
  for (auto& s : w.samples) s = 0.1 * rng.gaussian();
  Waveform g = w;
  for (auto& s : g.samples) s *= 3.7;
  SpectroTemporal a = log_mel_spectrogram(w, cfg);
  SpectroTemporal b = log_mel_spectrogram(g, cfg);
  for (std::size_t t = 0; t < a.num_frames(); ++t) {
    for (std::size_t k = 0; k < a.num_bands(); ++k) {
      CHECK(b.values(t, k) >= a.values(t, k) - 1e-9);
    }
  }
}

TEST_CASE("filterbank weights are nonnegative and bands are alive") {
  FrontendConfig cfg = default_cfg();
  MelFilterbank bank(cfg, 8000, padded_fft_size(cfg.frame_len));
  const int n_bins = bank.n_fft() / 2 + 1;
  std::vector<double> ones(static_cast<std::size_t>(n_bins), 1.0);
  std::vector<double> out(static_cast<std::size_t>(cfg.n_mel), 0.0);
  bank.apply(ones.data(), out.data());
  for (int k = 0; k < cfg.n_mel; ++k) {
    CHECK(out[static_cast<std::size_t>(k)] > 0.0);  // some nonzero weight
  }
}

TEST_CASE("delta coefficients") {
  DeltaConfig d{2};
  SUBCASE("constant input gives exactly zero") {
    SpectroTemporal st;
    st.values = Matrix(6, 3, 4.2);
    SpectroTemporal out = delta_coefficients(st, d);
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(out.values(t, k) == 0.0);
      }
    }
  }
  SUBCASE("linear ramp gives exactly one on interior frames") {
    SpectroTemporal st;
    st.values = Matrix(10, 2);
    for (std::size_t t = 0; t < 10; ++t) {
      for (std::size_t k = 0; k < 2; ++k) {
        st.values(t, k) = static_cast<double>(t);
      }
    }
    SpectroTemporal out = delta_coefficients(st, d);
    for (std::size_t t = 2; t < 8; ++t) {
      CHECK(out.values(t, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("time reversal negates interior deltas") {
    Rng rng(3);
    SpectroTemporal st;
    st.values = Matrix(12, 4);
    for (auto& v : st.values.data()) v = rng.uniform(-2.0, 2.0);
    SpectroTemporal rev;
    rev.values = Matrix(12, 4);
    for (std::size_t t = 0; t < 12; ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        rev.values(t, k) = st.values(11 - t, k);
      }
    }
    SpectroTemporal d1 = delta_coefficients(st, d);
    SpectroTemporal d2 = delta_coefficients(rev, d);
    for (std::size_t t = 2; t < 10; ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(d1.values(t, k) ==
              doctest::Approx(-d2.values(11 - t, k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("error paths") {
  FrontendConfig cfg = default_cfg();
  Waveform w = make_wave(100);  // shorter than one frame
  CHECK_THROWS_WITH_AS(log_mel_spectrogram(w, cfg),
                       doctest::Contains("input too short"),
                       std::invalid_argument);
  Waveform bad = make_wave(400);
  bad.samples[10] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(log_mel_spectrogram(bad, cfg),
                       doctest::Contains("invalid audio"),
                       std::invalid_argument);
  FrontendConfig bad_cfg = cfg;
  bad_cfg.f_max = 5000.0;  // above Nyquist at 8 kHz
  Waveform ok = make_wave(400);
  CHECK_THROWS_AS(log_mel_spectrogram(ok, bad_cfg), std::invalid_argument);
}

TEST_CASE("stfm round trip and validation") {
  const auto path = std::filesystem::temp_directory_path() / "t_frontend.stfm";
  SpectroTemporal st;
  st.values = Matrix(3, 4);
  Rng rng(11);
  for (auto& v : st.values.data()) v = rng.uniform(-5.0, 5.0);
  st.domain = Domain::kLog;
  write_stfm(path, st);
  SpectroTemporal back = read_stfm(path);
  CHECK(back.domain == Domain::kLog);
  REQUIRE(back.values.same_shape(st.values));
  for (std::size_t i = 0; i < st.values.data().size(); ++i) {
    CHECK(back.values.data()[i] == st.values.data()[i]);
  }
  SpectroTemporal empty;
  CHECK_THROWS_AS(write_stfm(path, empty), std::invalid_argument);
  std::filesystem::remove(path);
}
