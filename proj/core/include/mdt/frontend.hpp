#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mdt/audio.hpp"
#include "mdt/matrix.hpp"

namespace mdt {

enum class Domain : std::uint8_t {
  kLinearPower = 0,
  kLog = 1,
  kFeature = 2,  // generic feature matrices reusing the STFM container
};

struct FrontendConfig {
  int frame_len = 200;    // samples (25 ms at 8 kHz)
  int frame_shift = 80;   // samples (10 ms)
  double preemphasis = 0.97;
  int n_mel = 23;
  double f_min = 64.0;
  double f_max = 4000.0;
  double energy_floor = 1e-10;

  void validate(int sample_rate) const;
};

struct DeltaConfig {
  int half_width = 2;  // W
};

struct SpectroTemporal {
  Matrix values;  // T x K
  Domain domain = Domain::kLinearPower;
  int frame_shift = 0;
  int frame_len = 0;
  int sample_rate = 0;

  std::size_t num_frames() const { return values.rows(); }
  std::size_t num_bands() const { return values.cols(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// T = floor((num_samples - frame_len) / frame_shift) + 1
std::size_t num_frames(std::size_t num_samples, const FrontendConfig& cfg);

// Triangular filters spaced linearly on the mel scale, each peak-normalized
// to 1, evaluated on the bins of a zero-padded power-of-two DFT.
class MelFilterbank {
 public:
  MelFilterbank(const FrontendConfig& cfg, int sample_rate, int n_fft);

  int n_fft() const { return n_fft_; }
  int n_bands() const { return static_cast<int>(filters_.size()); }

  // power_bins has n_fft/2 + 1 entries; out has n_mel entries
  void apply(const double* power_bins, double* out) const;

  // triangle weight of band at an arbitrary frequency (also used by tests)
  double weight_at(int band, double freq_hz) const;

 private:
  struct Filter {
    int first_bin;
    std::vector<double> weights;
  };
  int n_fft_;
  double mel_lo_, mel_step_;
  std::vector<Filter> filters_;
};

int padded_fft_size(int frame_len);

// In-place iterative radix-2 FFT; a.size() must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// pre-emphasis -> Hamming window per frame -> |DFT|^2 -> mel filterbank ->
// max(., energy_floor) -> natural log
SpectroTemporal log_mel_spectrogram(const Waveform& wave,
                                    const FrontendConfig& cfg);

// identical pipeline without the log step; flooring still applied
SpectroTemporal linear_mel_spectrogram(const Waveform& wave,
                                       const FrontendConfig& cfg);

// d_t[k] = sum_w w*(c_{t+w}[k] - c_{t-w}[k]) / (2*sum_w w^2), edge frames
// replicated
SpectroTemporal delta_coefficients(const SpectroTemporal& statics,
                                   const DeltaConfig& cfg);

// STFM: magic "STFM", u32 T, u32 K, u8 domain_tag, T*K little-endian f64
// row-major.
void write_stfm(const std::filesystem::path& path, const SpectroTemporal& st);
SpectroTemporal read_stfm(const std::filesystem::path& path);

// [static K | delta K] per frame, the decoder's observation layout
Matrix stack_observations(const SpectroTemporal& statics,
                          const SpectroTemporal& deltas);

}  // namespace mdt
