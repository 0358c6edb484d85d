#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mdt/corpus.hpp"
#include "mdt/mask_features.hpp"
#include "mdt/rng.hpp"

using namespace mdt;

namespace {

SpectroTemporal linear_st(std::size_t T, std::size_t K, double fill) {
  SpectroTemporal st;
  st.values = Matrix(T, K, fill);
  st.domain = Domain::kLinearPower;
  return st;
}

Waveform noise_wave(NoiseKind kind, std::size_t n, std::uint64_t seed) {
  NoiseSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return synth_noise(spec, n, 8000);
}

}  // namespace

TEST_CASE("noise floor") {
  SUBCASE("constant energy gives bias times that energy") {
    auto st = linear_st(60, 4, 2.0);
    auto floor = noise_floor_estimate(st, 40, 1.5);
    for (double f : floor) CHECK(f == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("stationary white noise floor within 3 dB of the true power") {
    FrontendConfig fcfg;
    Waveform noise = noise_wave(NoiseKind::kWhite, 16000, 5);
    SpectroTemporal lin = linear_mel_spectrogram(noise, fcfg);
    auto floor = noise_floor_estimate(lin, 40, 1.5);
    for (std::size_t k = 0; k < lin.num_bands(); ++k) {
      double mean = 0.0;
      for (std::size_t t = 0; t < lin.num_frames(); ++t) {
        mean += lin.values(t, k);
      }
      mean /= static_cast<double>(lin.num_frames());
      const double err_db = std::fabs(10.0 * std::log10(floor[k] / mean));
      CHECK(err_db < 3.0);
    }
  }
  SUBCASE("the minimum statistic stays below the mean on speech plus noise") {
    const Lexicon lex = Lexicon::builtin(5);
    SynthConfig scfg;
    auto [clean, ann] = synth_utterance({0, 1}, lex, 17, scfg);
    Waveform noise = noise_wave(NoiseKind::kWhite, clean.samples.size(), 6);
    MixResult mix = mix_at_snr(clean, noise, 5.0);
    FrontendConfig fcfg;
    SpectroTemporal lin = linear_mel_spectrogram(mix.noisy, fcfg);
    const double bias = 1.5;
    auto floor = noise_floor_estimate(lin, 40, bias);
    for (std::size_t k = 0; k < lin.num_bands(); ++k) {
      double mean = 0.0;
      for (std::size_t t = 0; t < lin.num_frames(); ++t) {
        mean += lin.values(t, k);
      }
      mean /= static_cast<double>(lin.num_frames());
      // min over window means <= mean; the bias sits on top of that
      CHECK(floor[k] / bias <= mean * (1.0 + 1e-12));
      CHECK(floor[k] <= bias * mean * (1.0 + 1e-12));
    }
  }
  SUBCASE("short utterances collapse to the whole-utterance mean") {
    auto st = linear_st(10, 2, 0.0);
    for (std::size_t t = 0; t < 10; ++t) {
      st.values(t, 0) = static_cast<double>(t + 1);
      st.values(t, 1) = 4.0;
    }
    auto floor = noise_floor_estimate(st, 40, 1.5);
    CHECK(floor[0] == doctest::Approx(1.5 * 5.5).epsilon(1e-12));
    CHECK(floor[1] == doctest::Approx(6.0).epsilon(1e-12));
  }
  SUBCASE("empty input rejected") {
    auto st = linear_st(0, 2, 0.0);
    CHECK_THROWS_AS(noise_floor_estimate(st, 40, 1.5), std::invalid_argument);
  }
}

TEST_CASE("subband snr feature") {
  auto st = linear_st(1, 3, 0.0);
  st.values(0, 0) = 2.0;
  st.values(0, 1) = 20.0;
  st.values(0, 2) = 2e-9;
  std::vector<double> floor = {2.0, 2.0, 2.0};
  Matrix snr = subband_snr_feature(st, floor);
  CHECK(snr(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(snr(0, 1) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(snr(0, 2) == -30.0);  // clamped

  auto big = linear_st(1, 1, 1e12);
  std::vector<double> tiny_floor = {1e-12};
  CHECK(subband_snr_feature(big, tiny_floor)(0, 0) == 60.0);  // clamped

  std::vector<double> bad_floor = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(subband_snr_feature(st, bad_floor), std::invalid_argument);
}

TEST_CASE("flatness feature") {
  SUBCASE("constant band is exactly flat") {
    auto st = linear_st(15, 2, 0.37);
    Matrix flat = flatness_feature(st, 5, 1e-10);
    for (std::size_t t = 0; t < 15; ++t) {
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(flat(t, k) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("known window value") {
    // window {1,1,1,1,100}: geomean/mean = 100^(1/5)/20.8
    auto st = linear_st(5, 1, 1.0);
    st.values(4, 0) = 100.0;
    Matrix flat = flatness_feature(st, 2, 1e-10);
    const double expect = std::pow(100.0, 0.2) / 20.8;
    CHECK(flat(2, 0) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(expect == doctest::Approx(0.1208).epsilon(1e-3));
  }
  SUBCASE("always in (0, 1]") {
    Rng rng(12);
    auto st = linear_st(30, 5, 0.0);
    for (auto& v : st.values.data()) v = std::exp(rng.uniform(-20.0, 2.0));
    Matrix flat = flatness_feature(st, 5, 1e-10);
    for (double v : flat.data()) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("harmonic decomposition") {
  FrontendConfig fcfg;
  MaskFeatureConfig mcfg;

  SUBCASE("pulse train concentrates in the harmonic part") {
    Waveform w;
    w.sample_rate = 8000;
    w.samples.assign(8000, 0.0);
    for (std::size_t i = 0; i < w.samples.size(); i += 80) {
      w.samples[i] = 0.5;  // 100 Hz pulse train
    }
    HarmonicDecomposition hd = harmonic_decomposition(w, fcfg, mcfg);
    std::size_t voiced = 0;
    double harm_frac_sum = 0.0;
    for (std::size_t t = 0; t < hd.voiced.size(); ++t) {
      if (!hd.voiced[t]) continue;
      ++voiced;
      CHECK(hd.f0_hz[t] == doctest::Approx(100.0).epsilon(0.02));
      double h = 0.0, r = 0.0;
      for (std::size_t k = 0; k < hd.harmonic_log.num_bands(); ++k) {
        h += std::exp(hd.harmonic_log.values(t, k));
        r += std::exp(hd.random_log.values(t, k));
      }
      harm_frac_sum += h / (h + r);
    }
    REQUIRE(voiced > hd.voiced.size() / 2);
    CHECK(harm_frac_sum / static_cast<double>(voiced) >= 0.9);
  }

  SUBCASE("white noise is mostly unvoiced and random") {
    Waveform w = noise_wave(NoiseKind::kWhite, 8000, 3);
    HarmonicDecomposition hd = harmonic_decomposition(w, fcfg, mcfg);
    std::size_t voiced = 0;
    double rand_frac_sum = 0.0;
    for (std::size_t t = 0; t < hd.voiced.size(); ++t) {
      voiced += hd.voiced[t];
      double h = 0.0, r = 0.0;
      for (std::size_t k = 0; k < hd.harmonic_log.num_bands(); ++k) {
        h += std::exp(hd.harmonic_log.values(t, k));
        r += std::exp(hd.random_log.values(t, k));
      }
      rand_frac_sum += r / (h + r);
    }
    CHECK(voiced < hd.voiced.size() / 4);
    CHECK(rand_frac_sum / static_cast<double>(hd.voiced.size()) >= 0.9);
  }

  SUBCASE("silence floors both components") {
    Waveform w;
    w.sample_rate = 8000;
    w.samples.assign(2000, 0.0);
    HarmonicDecomposition hd = harmonic_decomposition(w, fcfg, mcfg);
    const double log_floor = std::log(fcfg.energy_floor);
    for (std::size_t t = 0; t < hd.harmonic_log.num_frames(); ++t) {
      for (std::size_t k = 0; k < hd.harmonic_log.num_bands(); ++k) {
        CHECK(hd.harmonic_log.values(t, k) == log_floor);
        CHECK(hd.random_log.values(t, k) == log_floor);
      }
    }
  }

  SUBCASE("the two parts partition the total linear power") {
    const Lexicon lex = Lexicon::builtin(5);
    SynthConfig scfg;
    auto [clean, ann] = synth_utterance({2}, lex, 23, scfg);
    Waveform noise = noise_wave(NoiseKind::kWhite, clean.samples.size(), 9);
    MixResult mix = mix_at_snr(clean, noise, 10.0);
    HarmonicDecomposition hd = harmonic_decomposition(mix.noisy, fcfg, mcfg);
    SpectroTemporal total = linear_mel_spectrogram(mix.noisy, fcfg);
    for (std::size_t t = 0; t < total.num_frames(); ++t) {
      for (std::size_t k = 0; k < total.num_bands(); ++k) {
        const double sum = std::exp(hd.harmonic_log.values(t, k)) +
                           std::exp(hd.random_log.values(t, k));
        const double ref = total.values(t, k);
        CHECK(sum >= ref * (1.0 - 1e-6) - 1e-15);
        CHECK(sum <= ref * (1.0 + 1e-6) + 2.0 * fcfg.energy_floor);
      }
    }
  }
}

TEST_CASE("feature matrix assembly and standardization") {
  FrontendConfig fcfg;
  fcfg.n_mel = 23;
  MaskFeatureConfig mcfg;
  const Lexicon lex = Lexicon::builtin(5);
  SynthConfig scfg;
  auto [clean, ann] = synth_utterance({1}, lex, 31, scfg);
  Waveform noise = noise_wave(NoiseKind::kWhite, clean.samples.size(), 13);
  MixResult mix = mix_at_snr(clean, noise, 5.0);

  SpectroTemporal noisy_log = log_mel_spectrogram(mix.noisy, fcfg);
  SpectroTemporal noisy_delta = delta_coefficients(noisy_log, DeltaConfig{2});
  SpectroTemporal noisy_lin = linear_mel_spectrogram(mix.noisy, fcfg);
  auto floor = noise_floor_estimate(noisy_lin, 40, 1.5);
  Matrix sub_snr = subband_snr_feature(noisy_lin, floor);
  Matrix flat = flatness_feature(noisy_lin, 5, fcfg.energy_floor);
  HarmonicDecomposition hd = harmonic_decomposition(mix.noisy, fcfg, mcfg);
  Matrix features = build_feature_matrix(sub_snr, flat, hd.harmonic_log,
                                         hd.random_log, noisy_log,
                                         noisy_delta);
  CHECK(features.cols() == 6 * 23);
  CHECK(features.rows() == noisy_log.num_frames());
  for (double v : features.data()) CHECK(std::isfinite(v));

  // flatness block sits in [0,1], snr block in [-30,60]
  for (std::size_t t = 0; t < features.rows(); ++t) {
    for (std::size_t k = 0; k < 23; ++k) {
      CHECK(features(t, k) >= -30.0);
      CHECK(features(t, k) <= 60.0);
      CHECK(features(t, 23 + k) > 0.0);
      CHECK(features(t, 23 + k) <= 1.0 + 1e-12);
    }
  }

  StandardizationAccumulator acc;
  acc.add(features);
  Standardization st = acc.finish();
  Matrix z = st.apply(features);
  for (std::size_t d = 0; d < z.cols(); ++d) {
    double mean = 0.0, var = 0.0;
    for (std::size_t t = 0; t < z.rows(); ++t) mean += z(t, d);
    mean /= static_cast<double>(z.rows());
    for (std::size_t t = 0; t < z.rows(); ++t) {
      var += (z(t, d) - mean) * (z(t, d) - mean);
    }
    var /= static_cast<double>(z.rows());
    CHECK(std::fabs(mean) < 1e-9);
    if (st.scale[d] != 1.0) {  // constant dims keep scale 1
      CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-9);
    }
  }

  // prediction-time standardization of a training row reproduces it
  std::vector<double> row1(z.cols()), row2(z.cols());
  st.apply_row(features.row(3), row1.data());
  st.apply_row(features.row(3), row2.data());
  CHECK(row1 == row2);
  for (std::size_t d = 0; d < z.cols(); ++d) {
    CHECK(row1[d] == z(3, d));
  }

  // mismatched part shapes are rejected
  Matrix bad(features.rows() + 1, 23);
  CHECK_THROWS_AS(build_feature_matrix(bad, flat, hd.harmonic_log,
                                       hd.random_log, noisy_log, noisy_delta),
                  std::invalid_argument);
}
