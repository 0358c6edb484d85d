#pragma once

#include <cstdint>
#include <vector>

#include "mdt/audio.hpp"
#include "mdt/frontend.hpp"
#include "mdt/matrix.hpp"

namespace mdt {

struct MaskFeatureConfig {
  int noise_floor_window = 40;    // frames
  double noise_floor_bias = 1.5;  // multiplicative bias correction
  int flatness_half_width = 5;    // frames each side
  double f0_min_hz = 60.0;
  double f0_max_hz = 400.0;
  double voicing_threshold = 0.3;  // normalized autocorrelation peak
};

// Minimum statistics: per band, the smallest sliding-window mean energy
// times a bias constant. Windows longer than the utterance collapse to the
// whole-utterance mean.
std::vector<double> noise_floor_estimate(const SpectroTemporal& noisy_linear,
                                         int window, double bias);

// 10*log10(noisy / floor), clamped to [-30, +60] dB
Matrix subband_snr_feature(const SpectroTemporal& noisy_linear,
                           const std::vector<double>& floor);

// geometric mean / arithmetic mean over a +-H frame window per band, edge
// frames replicated; in (0, 1] by the AM-GM inequality
Matrix flatness_feature(const SpectroTemporal& noisy_linear, int half_width,
                        double energy_floor);

struct HarmonicDecomposition {
  SpectroTemporal harmonic_log;  // log-mel of the pitch-harmonic power
  SpectroTemporal random_log;    // log-mel of the remainder
  std::vector<double> f0_hz;     // 0 for unvoiced frames
  std::vector<std::uint8_t> voiced;
};

// Per frame: autocorrelation pitch in [f0_min, f0_max] (the lower bound is
// raised so the search never exceeds lags the frame can support), voiced
// when the normalized peak reaches the threshold. Voiced frames split the
// DFT power into bins within +-1 of each pitch multiple (harmonic) and the
// rest (random); unvoiced frames put everything into random. Both parts
// pass through the same mel filterbank and log as the frontend, so
// harmonic + random equals the plain linear-power mel output cellwise up to
// the energy floor.
HarmonicDecomposition harmonic_decomposition(const Waveform& noisy,
                                             const FrontendConfig& fcfg,
                                             const MaskFeatureConfig& mcfg);

// Fixed SVM feature layout, 6K dims per frame:
// [subband-SNR | flatness | harmonic log-mel | random log-mel |
//  noisy static log-mel | noisy delta]
Matrix build_feature_matrix(const Matrix& sub_snr, const Matrix& flatness,
                            const SpectroTemporal& harmonic_log,
                            const SpectroTemporal& random_log,
                            const SpectroTemporal& noisy_log,
                            const SpectroTemporal& noisy_delta);

// Global per-dimension standardization shared by every model in the bank.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  void apply_row(const double* in, double* out) const;
  Matrix apply(const Matrix& m) const;
};

// Streaming accumulator so stats can be gathered entry by entry in manifest
// order (deterministic under any parallel schedule).
struct StandardizationAccumulator {
  std::vector<double> sum, sumsq;
  std::uint64_t count = 0;

  void add(const Matrix& m);
  Standardization finish() const;
};

}  // namespace mdt
