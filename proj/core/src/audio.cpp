#include "mdt/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mdt {

void validate_waveform(const Waveform& w, const char* context) {
  if (w.sample_rate <= 0) {
    throw std::invalid_argument(std::string(context) +
                                ": sample_rate must be positive");
  }
  if (w.samples.empty()) {
    throw std::invalid_argument(std::string(context) + ": empty waveform");
  }
  for (double s : w.samples) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument(std::string(context) + ": invalid audio");
    }
  }
}

Waveform read_raw_audio(const std::filesystem::path& path, int sample_rate) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) {
    throw std::runtime_error("cannot open audio file: " + path.string());
  }
  std::streamsize bytes = is.tellg();
  if (bytes % 4 != 0) {
    throw std::runtime_error("raw f32 file has partial sample: " +
                             path.string());
  }
  is.seekg(0);
  std::vector<float> buf(static_cast<std::size_t>(bytes / 4));
  if (bytes > 0) {
    is.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!is) throw std::runtime_error("short read: " + path.string());
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(buf.begin(), buf.end());
  return w;
}

void write_raw_audio(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open audio file for writing: " +
                             path.string());
  }
  std::vector<float> buf(w.samples.begin(), w.samples.end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

double mean_power(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : w.samples) acc += s * s;
  return acc / static_cast<double>(w.samples.size());
}

void quantize_to_grid(Waveform& w) {
  for (double& s : w.samples) {
    s = std::nearbyint(s / kAmplitudeGrid) * kAmplitudeGrid;
  }
}

}  // namespace mdt
