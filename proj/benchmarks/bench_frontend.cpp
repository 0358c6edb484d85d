#include <benchmark/benchmark.h>

#include "mdt/frontend.hpp"
#include "mdt/mask_features.hpp"
#include "mdt/rng.hpp"

namespace {

mdt::Waveform one_second_noise() {
  mdt::Rng rng(7);
  mdt::Waveform w;
  w.sample_rate = 8000;
  w.samples.resize(8000);
  for (auto& s : w.samples) s = 0.2 * rng.gaussian();
  return w;
}

void LogMelSpectrogram(benchmark::State& state) {
  const mdt::Waveform wave = one_second_noise();
  const mdt::FrontendConfig cfg;
  for (auto _ : state) {
    auto st = mdt::log_mel_spectrogram(wave, cfg);
    benchmark::DoNotOptimize(st.values.data().data());
  }
}
BENCHMARK(LogMelSpectrogram);

void DeltaCoefficients(benchmark::State& state) {
  const mdt::Waveform wave = one_second_noise();
  const mdt::FrontendConfig cfg;
  const auto st = mdt::log_mel_spectrogram(wave, cfg);
  const mdt::DeltaConfig d;
  for (auto _ : state) {
    auto out = mdt::delta_coefficients(st, d);
    benchmark::DoNotOptimize(out.values.data().data());
  }
}
BENCHMARK(DeltaCoefficients);

void HarmonicDecomposition(benchmark::State& state) {
  const mdt::Waveform wave = one_second_noise();
  const mdt::FrontendConfig cfg;
  const mdt::MaskFeatureConfig mcfg;
  for (auto _ : state) {
    auto hd = mdt::harmonic_decomposition(wave, cfg, mcfg);
    benchmark::DoNotOptimize(hd.harmonic_log.values.data().data());
  }
}
BENCHMARK(HarmonicDecomposition);

}  // namespace
