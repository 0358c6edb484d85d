#pragma once

#include <filesystem>
#include <vector>

namespace mdt {

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
};

// throws std::invalid_argument on non-finite samples, empty signal, or
// nonpositive sample rate
void validate_waveform(const Waveform& w, const char* context);

// Raw audio file format: little-endian 32-bit IEEE float samples, no header.
// The sample rate is carried by the corpus manifest, not the file.
Waveform read_raw_audio(const std::filesystem::path& path, int sample_rate);
void write_raw_audio(const std::filesystem::path& path, const Waveform& w);

double mean_power(const Waveform& w);

// Amplitude grid for generated audio: every sample is snapped to a multiple
// of 2^-20. Grid values below 8 in magnitude are exactly representable in
// f32, and the sum of two grid values is again a grid value, so
// noisy = clean + noise survives the f32 file round trip with zero error.
inline constexpr double kAmplitudeGrid = 9.5367431640625e-07;  // 2^-20

void quantize_to_grid(Waveform& w);

}  // namespace mdt
