#include "mdt/frontend.hpp"

#include <cmath>
#include <stdexcept>

#include "mdt/io_util.hpp"

namespace mdt {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void FrontendConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  if (frame_shift <= 0 || frame_len < frame_shift) {
    throw std::invalid_argument("need 0 < frame_shift <= frame_len");
  }
  if (preemphasis < 0.0 || preemphasis >= 1.0) {
    throw std::invalid_argument("preemphasis must be in [0, 1)");
  }
  if (n_mel < 1) throw std::invalid_argument("n_mel must be >= 1");
  if (!(f_min < f_max) || f_max > sample_rate / 2.0) {
    throw std::invalid_argument("need f_min < f_max <= sample_rate/2");
  }
  if (!(energy_floor > 0.0)) {
    throw std::invalid_argument("energy_floor must be positive");
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::size_t num_frames(std::size_t num_samples, const FrontendConfig& cfg) {
  if (num_samples < static_cast<std::size_t>(cfg.frame_len)) return 0;
  return (num_samples - static_cast<std::size_t>(cfg.frame_len)) /
             static_cast<std::size_t>(cfg.frame_shift) +
         1;
}

int padded_fft_size(int frame_len) {
  int n = 1;
  while (n < frame_len) n <<= 1;
  return n;
}

MelFilterbank::MelFilterbank(const FrontendConfig& cfg, int sample_rate,
                             int n_fft)
    : n_fft_(n_fft) {
  mel_lo_ = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  mel_step_ = (mel_hi - mel_lo_) / (cfg.n_mel + 1);

  const int n_bins = n_fft / 2 + 1;
  const double bin_width = static_cast<double>(sample_rate) / n_fft;
  filters_.resize(static_cast<std::size_t>(cfg.n_mel));
  for (int k = 0; k < cfg.n_mel; ++k) {
    const double left = mel_lo_ + k * mel_step_;
    const double center = left + mel_step_;
    const double right = center + mel_step_;
    int first = -1;
    std::vector<double> w;
    for (int bin = 0; bin < n_bins; ++bin) {
      const double mel = hz_to_mel(bin * bin_width);
      if (mel <= left || mel >= right) {
        if (first >= 0 && mel >= right) break;
        continue;
      }
      double weight = mel <= center ? (mel - left) / mel_step_
                                    : (right - mel) / mel_step_;
      if (first < 0) first = bin;
      w.push_back(weight);
    }
    if (first < 0) {
      // a band whose triangle straddles no bin center would be dead weight
      throw std::invalid_argument(
          "mel band " + std::to_string(k) +
          " covers no DFT bin; reduce n_mel or raise the DFT resolution");
    }
    filters_[static_cast<std::size_t>(k)] = {first, std::move(w)};
  }
}

void MelFilterbank::apply(const double* power_bins, double* out) const {
  for (std::size_t k = 0; k < filters_.size(); ++k) {
    const Filter& f = filters_[k];
    double acc = 0.0;
    for (std::size_t i = 0; i < f.weights.size(); ++i) {
      acc += f.weights[i] * power_bins[static_cast<std::size_t>(f.first_bin) + i];
    }
    out[k] = acc;
  }
}

double MelFilterbank::weight_at(int band, double freq_hz) const {
  const double left = mel_lo_ + band * mel_step_;
  const double center = left + mel_step_;
  const double right = center + mel_step_;
  const double mel = hz_to_mel(freq_hz);
  if (mel <= left || mel >= right) return 0.0;
  return mel <= center ? (mel - left) / mel_step_ : (right - mel) / mel_step_;
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n < 2) return;
  if ((n & (n - 1)) != 0) {
    throw std::invalid_argument("fft size must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

namespace {

SpectroTemporal mel_spectrogram_impl(const Waveform& wave,
                                     const FrontendConfig& cfg, bool log_out) {
  cfg.validate(wave.sample_rate);
  validate_waveform(wave, "mel_spectrogram");
  const std::size_t n_samples = wave.samples.size();
  if (n_samples < static_cast<std::size_t>(cfg.frame_len)) {
    throw std::invalid_argument("input too short: " +
                                std::to_string(n_samples) + " samples < " +
                                std::to_string(cfg.frame_len));
  }

  std::vector<double> emph(n_samples);
  const double p = cfg.preemphasis;
  emph[0] = wave.samples[0] * (1.0 - p);
  for (std::size_t i = 1; i < n_samples; ++i) {
    emph[i] = wave.samples[i] - p * wave.samples[i - 1];
  }

  const int n_fft = padded_fft_size(cfg.frame_len);
  const std::size_t n_bins = static_cast<std::size_t>(n_fft / 2 + 1);
  MelFilterbank bank(cfg, wave.sample_rate, n_fft);

  std::vector<double> window(static_cast<std::size_t>(cfg.frame_len));
  for (int i = 0; i < cfg.frame_len; ++i) {
    window[static_cast<std::size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * kPi * i / (cfg.frame_len - 1));
  }

  const std::size_t T = num_frames(n_samples, cfg);
  SpectroTemporal out;
  out.values = Matrix(T, static_cast<std::size_t>(cfg.n_mel));
  out.domain = log_out ? Domain::kLog : Domain::kLinearPower;
  out.frame_shift = cfg.frame_shift;
  out.frame_len = cfg.frame_len;
  out.sample_rate = wave.sample_rate;

  std::vector<std::complex<double>> frame(static_cast<std::size_t>(n_fft));
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(cfg.frame_shift);
    for (int i = 0; i < cfg.frame_len; ++i) {
      frame[static_cast<std::size_t>(i)] = {
          emph[start + static_cast<std::size_t>(i)] *
              window[static_cast<std::size_t>(i)],
          0.0};
    }
    for (int i = cfg.frame_len; i < n_fft; ++i) {
      frame[static_cast<std::size_t>(i)] = {0.0, 0.0};
    }
    fft_radix2(frame);
    for (std::size_t b = 0; b < n_bins; ++b) {
      power[b] = std::norm(frame[b]);
    }
    double* row = out.values.row(t);
    bank.apply(power.data(), row);
    for (int k = 0; k < cfg.n_mel; ++k) {
      double e = std::max(row[k], cfg.energy_floor);
      row[k] = log_out ? std::log(e) : e;
    }
  }
  return out;
}

}  // namespace

SpectroTemporal log_mel_spectrogram(const Waveform& wave,
                                    const FrontendConfig& cfg) {
  return mel_spectrogram_impl(wave, cfg, true);
}

SpectroTemporal linear_mel_spectrogram(const Waveform& wave,
                                       const FrontendConfig& cfg) {
  return mel_spectrogram_impl(wave, cfg, false);
}

SpectroTemporal delta_coefficients(const SpectroTemporal& statics,
                                   const DeltaConfig& cfg) {
  if (cfg.half_width < 1) throw std::invalid_argument("delta W must be >= 1");
  const std::size_t T = statics.num_frames();
  const std::size_t K = statics.num_bands();
  if (T == 0) throw std::invalid_argument("delta of empty matrix");

  double denom = 0.0;
  for (int w = 1; w <= cfg.half_width; ++w) denom += static_cast<double>(w * w);
  denom *= 2.0;

  SpectroTemporal out;
  out.values = Matrix(T, K);
  out.domain = statics.domain;
  out.frame_shift = statics.frame_shift;
  out.frame_len = statics.frame_len;
  out.sample_rate = statics.sample_rate;

  auto clamp_t = [&](std::ptrdiff_t t) {
    if (t < 0) return static_cast<std::size_t>(0);
    if (t >= static_cast<std::ptrdiff_t>(T)) return T - 1;
    return static_cast<std::size_t>(t);
  };

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int w = 1; w <= cfg.half_width; ++w) {
        const std::size_t fwd = clamp_t(static_cast<std::ptrdiff_t>(t) + w);
        const std::size_t bwd = clamp_t(static_cast<std::ptrdiff_t>(t) - w);
        acc += w * (statics.values(fwd, k) - statics.values(bwd, k));
      }
      out.values(t, k) = acc / denom;
    }
  }
  return out;
}

void write_stfm(const std::filesystem::path& path, const SpectroTemporal& st) {
  if (st.values.rows() == 0 || st.values.cols() == 0) {
    throw std::invalid_argument("refusing to write empty feature matrix: " +
                                path.string());
  }
  auto os = open_out(path);
  write_magic(os, "STFM");
  write_u32(os, static_cast<std::uint32_t>(st.values.rows()));
  write_u32(os, static_cast<std::uint32_t>(st.values.cols()));
  write_u8(os, static_cast<std::uint8_t>(st.domain));
  write_f64_vec(os, st.values.data());
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

SpectroTemporal read_stfm(const std::filesystem::path& path) {
  auto is = open_in(path);
  expect_magic(is, "STFM", "feature file " + path.string());
  const std::uint32_t T = read_u32(is);
  const std::uint32_t K = read_u32(is);
  const std::uint8_t tag = read_u8(is);
  if (tag > 2) {
    throw std::runtime_error("malformed feature file " + path.string() +
                             ": bad domain tag");
  }
  SpectroTemporal st;
  st.domain = static_cast<Domain>(tag);
  st.values = Matrix(T, K);
  read_f64_vec(is, st.values.data(), static_cast<std::size_t>(T) * K);
  return st;
}

Matrix stack_observations(const SpectroTemporal& statics,
                          const SpectroTemporal& deltas) {
  if (!statics.values.same_shape(deltas.values)) {
    throw std::invalid_argument("static/delta shape mismatch");
  }
  const std::size_t T = statics.num_frames();
  const std::size_t K = statics.num_bands();
  Matrix obs(T, 2 * K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      obs(t, k) = statics.values(t, k);
      obs(t, K + k) = deltas.values(t, k);
    }
  }
  return obs;
}

}  // namespace mdt
