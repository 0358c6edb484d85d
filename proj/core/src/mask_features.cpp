#include "mdt/mask_features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdt {

std::vector<double> noise_floor_estimate(const SpectroTemporal& noisy_linear,
                                         int window, double bias) {
  if (noisy_linear.domain != Domain::kLinearPower) {
    throw std::invalid_argument("noise floor needs linear-power input");
  }
  const std::size_t T = noisy_linear.num_frames();
  const std::size_t K = noisy_linear.num_bands();
  if (T == 0) throw std::invalid_argument("noise floor of empty input");
  if (window < 1) throw std::invalid_argument("window must be >= 1");

  const std::size_t W = std::min<std::size_t>(static_cast<std::size_t>(window), T);
  std::vector<double> floor(K);
  for (std::size_t k = 0; k < K; ++k) {
    // prefix sums keep the sliding means exact and cheap
    double acc = 0.0;
    for (std::size_t t = 0; t < W; ++t) acc += noisy_linear.values(t, k);
    double best = acc;
    for (std::size_t t = W; t < T; ++t) {
      acc += noisy_linear.values(t, k) - noisy_linear.values(t - W, k);
      best = std::min(best, acc);
    }
    floor[k] = bias * best / static_cast<double>(W);
  }
  return floor;
}

Matrix subband_snr_feature(const SpectroTemporal& noisy_linear,
                           const std::vector<double>& floor) {
  const std::size_t T = noisy_linear.num_frames();
  const std::size_t K = noisy_linear.num_bands();
  if (floor.size() != K) {
    throw std::invalid_argument("floor vector size mismatch");
  }
  for (double f : floor) {
    if (!(f > 0.0)) throw std::invalid_argument("nonpositive noise floor");
  }
  Matrix out(T, K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      double db = 10.0 * std::log10(noisy_linear.values(t, k) / floor[k]);
      out(t, k) = std::clamp(db, -30.0, 60.0);
    }
  }
  return out;
}

Matrix flatness_feature(const SpectroTemporal& noisy_linear, int half_width,
                        double energy_floor) {
  if (half_width < 1) throw std::invalid_argument("flatness window H >= 1");
  const std::size_t T = noisy_linear.num_frames();
  const std::size_t K = noisy_linear.num_bands();
  Matrix out(T, K);
  const double n_win = 2.0 * half_width + 1.0;
  auto clamp_t = [&](std::ptrdiff_t t) {
    if (t < 0) return static_cast<std::size_t>(0);
    if (t >= static_cast<std::ptrdiff_t>(T)) return T - 1;
    return static_cast<std::size_t>(t);
  };
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      double log_sum = 0.0;
      double lin_sum = 0.0;
      for (int w = -half_width; w <= half_width; ++w) {
        const double v = std::max(
            noisy_linear.values(clamp_t(static_cast<std::ptrdiff_t>(t) + w), k),
            energy_floor);
        log_sum += std::log(v);
        lin_sum += v;
      }
      out(t, k) = std::exp(log_sum / n_win) / (lin_sum / n_win);
    }
  }
  return out;
}

HarmonicDecomposition harmonic_decomposition(const Waveform& noisy,
                                             const FrontendConfig& fcfg,
                                             const MaskFeatureConfig& mcfg) {
  fcfg.validate(noisy.sample_rate);
  validate_waveform(noisy, "harmonic_decomposition");
  const std::size_t n_samples = noisy.samples.size();
  if (n_samples < static_cast<std::size_t>(fcfg.frame_len)) {
    throw std::invalid_argument("input too short for harmonic decomposition");
  }

  const double sr = noisy.sample_rate;
  // keep at least two pitch periods inside a frame
  const double f0_min = std::max(mcfg.f0_min_hz, 2.0 * sr / fcfg.frame_len);
  const double f0_max = std::min(mcfg.f0_max_hz, sr / 2.0 - 1.0);
  const int lag_min = std::max(2, static_cast<int>(std::floor(sr / f0_max)));
  const int lag_max = static_cast<int>(std::ceil(sr / f0_min));

  std::vector<double> emph(n_samples);
  const double p = fcfg.preemphasis;
  emph[0] = noisy.samples[0] * (1.0 - p);
  for (std::size_t i = 1; i < n_samples; ++i) {
    emph[i] = noisy.samples[i] - p * noisy.samples[i - 1];
  }

  const int n_fft = padded_fft_size(fcfg.frame_len);
  const std::size_t n_bins = static_cast<std::size_t>(n_fft / 2 + 1);
  MelFilterbank bank(fcfg, noisy.sample_rate, n_fft);

  std::vector<double> window(static_cast<std::size_t>(fcfg.frame_len));
  for (int i = 0; i < fcfg.frame_len; ++i) {
    window[static_cast<std::size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i /
                               (fcfg.frame_len - 1));
  }

  const std::size_t T = num_frames(n_samples, fcfg);
  HarmonicDecomposition out;
  auto init_st = [&](SpectroTemporal& st) {
    st.values = Matrix(T, static_cast<std::size_t>(fcfg.n_mel));
    st.domain = Domain::kLog;
    st.frame_shift = fcfg.frame_shift;
    st.frame_len = fcfg.frame_len;
    st.sample_rate = noisy.sample_rate;
  };
  init_st(out.harmonic_log);
  init_st(out.random_log);
  out.f0_hz.assign(T, 0.0);
  out.voiced.assign(T, 0);

  std::vector<std::complex<double>> frame(static_cast<std::size_t>(n_fft));
  std::vector<double> harm_power(n_bins), rand_power(n_bins);
  std::vector<double> mel(static_cast<std::size_t>(fcfg.n_mel));

  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(fcfg.frame_shift);
    const double* raw = noisy.samples.data() + start;

    // pitch from the raw frame's normalized autocorrelation
    double r0 = 0.0;
    for (int i = 0; i < fcfg.frame_len; ++i) r0 += raw[i] * raw[i];
    double best_r = 0.0;
    int best_lag = 0;
    if (r0 > 0.0) {
      for (int lag = lag_min; lag <= lag_max && lag < fcfg.frame_len; ++lag) {
        double r = 0.0;
        for (int i = 0; i + lag < fcfg.frame_len; ++i) {
          r += raw[i] * raw[i + lag];
        }
        if (r > best_r) {
          best_r = r;
          best_lag = lag;
        }
      }
    }
    const bool voiced =
        best_lag > 0 && r0 > 0.0 && best_r / r0 >= mcfg.voicing_threshold;
    const double f0 = voiced ? sr / best_lag : 0.0;
    out.voiced[t] = voiced ? 1 : 0;
    out.f0_hz[t] = f0;

    for (int i = 0; i < fcfg.frame_len; ++i) {
      frame[static_cast<std::size_t>(i)] = {
          emph[start + static_cast<std::size_t>(i)] *
              window[static_cast<std::size_t>(i)],
          0.0};
    }
    for (int i = fcfg.frame_len; i < n_fft; ++i) {
      frame[static_cast<std::size_t>(i)] = {0.0, 0.0};
    }
    fft_radix2(frame);

    std::fill(harm_power.begin(), harm_power.end(), 0.0);
    for (std::size_t b = 0; b < n_bins; ++b) rand_power[b] = std::norm(frame[b]);

    if (voiced) {
      // bins within +-1 of each pitch multiple form the harmonic set; the
      // two sets partition the spectrum so their mel energies sum back
      const double bin_width = sr / n_fft;
      for (double h = f0; h < sr / 2.0; h += f0) {
        const int center = static_cast<int>(std::lround(h / bin_width));
        for (int b = center - 1; b <= center + 1; ++b) {
          if (b < 0 || b >= static_cast<int>(n_bins)) continue;
          const auto bi = static_cast<std::size_t>(b);
          harm_power[bi] = rand_power[bi];
        }
      }
      for (std::size_t b = 0; b < n_bins; ++b) {
        if (harm_power[b] > 0.0) rand_power[b] = 0.0;
      }
    }

    bank.apply(harm_power.data(), mel.data());
    for (int k = 0; k < fcfg.n_mel; ++k) {
      out.harmonic_log.values(t, static_cast<std::size_t>(k)) =
          std::log(std::max(mel[static_cast<std::size_t>(k)],
                            fcfg.energy_floor));
    }
    bank.apply(rand_power.data(), mel.data());
    for (int k = 0; k < fcfg.n_mel; ++k) {
      out.random_log.values(t, static_cast<std::size_t>(k)) =
          std::log(std::max(mel[static_cast<std::size_t>(k)],
                            fcfg.energy_floor));
    }
  }
  return out;
}

Matrix build_feature_matrix(const Matrix& sub_snr, const Matrix& flatness,
                            const SpectroTemporal& harmonic_log,
                            const SpectroTemporal& random_log,
                            const SpectroTemporal& noisy_log,
                            const SpectroTemporal& noisy_delta) {
  const std::size_t T = sub_snr.rows();
  const std::size_t K = sub_snr.cols();
  const Matrix* parts[6] = {&sub_snr,
                            &flatness,
                            &harmonic_log.values,
                            &random_log.values,
                            &noisy_log.values,
                            &noisy_delta.values};
  for (const Matrix* m : parts) {
    if (m->rows() != T || m->cols() != K) {
      throw std::invalid_argument("feature part shape mismatch");
    }
  }
  Matrix out(T, 6 * K);
  for (std::size_t t = 0; t < T; ++t) {
    double* row = out.row(t);
    for (int part = 0; part < 6; ++part) {
      const double* src = parts[part]->row(t);
      for (std::size_t k = 0; k < K; ++k) {
        row[static_cast<std::size_t>(part) * K + k] = src[k];
      }
    }
  }
  return out;
}

void Standardization::apply_row(const double* in, double* out) const {
  for (std::size_t d = 0; d < mean.size(); ++d) {
    out[d] = (in[d] - mean[d]) / scale[d];
  }
}

Matrix Standardization::apply(const Matrix& m) const {
  if (m.cols() != mean.size()) {
    throw std::invalid_argument("standardization dimension mismatch");
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t t = 0; t < m.rows(); ++t) {
    apply_row(m.row(t), out.row(t));
  }
  return out;
}

void StandardizationAccumulator::add(const Matrix& m) {
  if (sum.empty()) {
    sum.assign(m.cols(), 0.0);
    sumsq.assign(m.cols(), 0.0);
  }
  if (m.cols() != sum.size()) {
    throw std::invalid_argument("standardization dimension mismatch");
  }
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const double* row = m.row(t);
    for (std::size_t d = 0; d < sum.size(); ++d) {
      sum[d] += row[d];
      sumsq[d] += row[d] * row[d];
    }
  }
  count += m.rows();
}

Standardization StandardizationAccumulator::finish() const {
  if (count == 0) throw std::invalid_argument("no frames accumulated");
  Standardization st;
  st.mean.resize(sum.size());
  st.scale.resize(sum.size());
  for (std::size_t d = 0; d < sum.size(); ++d) {
    st.mean[d] = sum[d] / static_cast<double>(count);
    const double var =
        sumsq[d] / static_cast<double>(count) - st.mean[d] * st.mean[d];
    st.scale[d] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return st;
}

}  // namespace mdt
