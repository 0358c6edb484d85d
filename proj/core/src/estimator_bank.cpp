#include "mdt/estimator_bank.hpp"

#include <algorithm>
#include <stdexcept>

#include "mdt/io_util.hpp"
#include "mdt/parallel.hpp"
#include "mdt/rng.hpp"

namespace mdt {

namespace {

// Classifier inputs are z-scored and then saturated at +-3 sigma; a linear
// model otherwise extrapolates without bound on conditions outside the
// training SNR range. Training and prediction share this exact transform.
void standardize_saturated(const Standardization& st, const double* in,
                           double* out) {
  st.apply_row(in, out);
  for (std::size_t d = 0; d < st.mean.size(); ++d) {
    out[d] = std::clamp(out[d], -3.0, 3.0);
  }
}

}  // namespace

EstimatorBank::EstimatorBank(std::size_t s_total, std::size_t k,
                             std::size_t feature_dim)
    : s_total_(s_total), k_(k), feature_dim_(feature_dim) {
  if (s_total == 0 || k == 0 || feature_dim == 0) {
    throw std::invalid_argument("estimator bank needs positive dimensions");
  }
  slots_.resize(s_total * k);
  pooled_.resize(k);
  std_.mean.assign(feature_dim, 0.0);
  std_.scale.assign(feature_dim, 1.0);
}

bool EstimatorBank::predict_std(std::size_t s, std::size_t k,
                                const double* x) const {
  const BankSlot& sl = slot(s, k);
  switch (sl.kind) {
    case SlotKind::kTrained: return sl.svm.predict(x);
    case SlotKind::kConstant: return sl.const_label != 0;
    case SlotKind::kFallback: return predict_pooled_std(k, x);
  }
  return true;
}

bool EstimatorBank::predict_pooled_std(std::size_t k, const double* x) const {
  const PooledModel& pm = pooled_[k];
  return pm.trained ? pm.svm.predict(x) : pm.const_label != 0;
}

BankStats EstimatorBank::stats() const {
  BankStats st;
  for (const auto& sl : slots_) {
    switch (sl.kind) {
      case SlotKind::kTrained: ++st.trained; break;
      case SlotKind::kConstant: ++st.constant; break;
      case SlotKind::kFallback: ++st.fallback; break;
    }
  }
  return st;
}

BinaryMask EstimatorBank::predict_mask(const Matrix& features_raw,
                                       const std::vector<int>& alignment,
                                       const DeltaConfig& delta_cfg,
                                       DeltaMaskRule rule) const {
  const std::size_t T = features_raw.rows();
  if (alignment.size() != T) {
    throw std::invalid_argument("alignment/feature length mismatch");
  }
  if (features_raw.cols() != feature_dim_) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  BinaryMask mask(T, k_);
  std::vector<double> row(feature_dim_);
  for (std::size_t t = 0; t < T; ++t) {
    const int s = alignment[t];
    if (s < 0 || static_cast<std::size_t>(s) >= s_total_) {
      throw std::invalid_argument("state index out of range in alignment");
    }
    standardize_saturated(std_, features_raw.row(t), row.data());
    for (std::size_t k = 0; k < k_; ++k) {
      mask.set(t, k, predict_std(static_cast<std::size_t>(s), k, row.data()));
    }
  }
  attach_delta(mask, delta_cfg, rule);
  return mask;
}

BinaryMask EstimatorBank::predict_mask_pooled(const Matrix& features_raw,
                                              const DeltaConfig& delta_cfg,
                                              DeltaMaskRule rule) const {
  const std::size_t T = features_raw.rows();
  if (features_raw.cols() != feature_dim_) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  BinaryMask mask(T, k_);
  std::vector<double> row(feature_dim_);
  for (std::size_t t = 0; t < T; ++t) {
    standardize_saturated(std_, features_raw.row(t), row.data());
    for (std::size_t k = 0; k < k_; ++k) {
      mask.set(t, k, predict_pooled_std(k, row.data()));
    }
  }
  attach_delta(mask, delta_cfg, rule);
  return mask;
}

// ---------------------------------------------------------- serialization

namespace {

void write_svm(std::ostream& os, const LinearSvm& svm) {
  write_f64_vec(os, svm.w);
  write_f64(os, svm.b);
  write_u64(os, svm.n_samples);
  write_f64(os, svm.positive_fraction);
}

LinearSvm read_svm(std::istream& is, std::size_t dim) {
  LinearSvm svm;
  read_f64_vec(is, svm.w, dim);
  svm.b = read_f64(is);
  svm.n_samples = read_u64(is);
  svm.positive_fraction = read_f64(is);
  return svm;
}

}  // namespace

void EstimatorBank::save(const std::filesystem::path& path) const {
  auto os = open_out(path);
  write_magic(os, "SVMB");
  write_u32(os, static_cast<std::uint32_t>(s_total_));
  write_u32(os, static_cast<std::uint32_t>(k_));
  write_u32(os, static_cast<std::uint32_t>(feature_dim_));
  write_f64_vec(os, std_.mean);
  write_f64_vec(os, std_.scale);
  for (const auto& pm : pooled_) {
    write_u8(os, pm.trained ? 0 : 1);
    if (pm.trained) {
      write_svm(os, pm.svm);
    } else {
      write_u8(os, pm.const_label);
    }
  }
  for (const auto& sl : slots_) {
    write_u8(os, static_cast<std::uint8_t>(sl.kind));
    if (sl.kind == SlotKind::kTrained) {
      write_svm(os, sl.svm);
    } else if (sl.kind == SlotKind::kConstant) {
      write_u8(os, sl.const_label);
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

EstimatorBank EstimatorBank::load(const std::filesystem::path& path) {
  auto is = open_in(path);
  expect_magic(is, "SVMB", "bank file " + path.string());
  const std::uint32_t S = read_u32(is);
  const std::uint32_t K = read_u32(is);
  const std::uint32_t D = read_u32(is);
  EstimatorBank bank(S, K, D);
  read_f64_vec(is, bank.std_.mean, D);
  read_f64_vec(is, bank.std_.scale, D);
  for (auto& pm : bank.pooled_) {
    const std::uint8_t tag = read_u8(is);
    if (tag == 0) {
      pm.trained = true;
      pm.svm = read_svm(is, D);
    } else if (tag == 1) {
      pm.trained = false;
      pm.const_label = read_u8(is);
    } else {
      throw std::runtime_error("malformed bank file: bad pooled tag");
    }
  }
  for (auto& sl : bank.slots_) {
    const std::uint8_t tag = read_u8(is);
    if (tag > 2) throw std::runtime_error("malformed bank file: bad slot tag");
    sl.kind = static_cast<SlotKind>(tag);
    if (sl.kind == SlotKind::kTrained) {
      sl.svm = read_svm(is, D);
    } else if (sl.kind == SlotKind::kConstant) {
      sl.const_label = read_u8(is);
    }
  }
  return bank;
}

// --------------------------------------------------------------- training

EstimatorBank train_estimator_bank(const std::vector<BankTrainEntry>& entries,
                                   std::size_t s_total, std::size_t k,
                                   const SvmTrainConfig& cfg, unsigned jobs,
                                   BankStats* stats) {
  if (entries.empty()) {
    throw std::invalid_argument("empty train split for the estimator bank");
  }
  const std::size_t dim = entries[0].features.cols();
  for (const auto& e : entries) {
    if (e.features.cols() != dim) {
      throw std::invalid_argument("inconsistent feature dimension");
    }
    const std::size_t T = e.features.rows();
    if (e.alignment.size() != T || e.labels.size() != T * k) {
      throw std::invalid_argument("entry alignment/label size mismatch");
    }
  }

  EstimatorBank bank(s_total, k, dim);

  // global standardization, accumulated in entry order
  StandardizationAccumulator acc;
  for (const auto& e : entries) acc.add(e.features);
  bank.standardization() = acc.finish();
  const Standardization& st = bank.standardization();

  struct FrameRef {
    std::uint32_t entry;
    std::uint32_t frame;
  };
  std::vector<std::vector<FrameRef>> buckets(s_total);
  std::size_t total_frames = 0;
  for (std::size_t ei = 0; ei < entries.size(); ++ei) {
    const auto& e = entries[ei];
    for (std::size_t t = 0; t < e.features.rows(); ++t) {
      const int s = e.alignment[t];
      if (s < 0 || static_cast<std::size_t>(s) >= s_total) {
        throw std::invalid_argument("alignment state out of range");
      }
      buckets[static_cast<std::size_t>(s)].push_back(
          {static_cast<std::uint32_t>(ei), static_cast<std::uint32_t>(t)});
      ++total_frames;
    }
  }

  // pooled per-band fallbacks on all frames regardless of state
  {
    Matrix X(total_frames, dim);
    std::size_t r = 0;
    for (std::size_t ei = 0; ei < entries.size(); ++ei) {
      const auto& e = entries[ei];
      for (std::size_t t = 0; t < e.features.rows(); ++t, ++r) {
        standardize_saturated(st, e.features.row(t), X.row(r));
      }
    }
    parallel_for(k, jobs, [&](std::size_t band) {
      std::vector<std::uint8_t> y(total_frames);
      std::size_t rr = 0;
      std::size_t n_pos = 0;
      for (const auto& e : entries) {
        for (std::size_t t = 0; t < e.features.rows(); ++t, ++rr) {
          y[rr] = e.labels[t * k + band];
          n_pos += y[rr] ? 1 : 0;
        }
      }
      PooledModel& pm = bank.pooled(band);
      if (n_pos == 0 || n_pos == total_frames) {
        pm.trained = false;
        pm.const_label = n_pos == 0 ? 0 : 1;
        return;
      }
      SvmTrainConfig band_cfg = cfg;
      band_cfg.seed = derive_seed(cfg.seed, SeedStream::kSvmModel,
                                  {static_cast<std::uint64_t>(s_total), band});
      pm.trained = true;
      pm.svm = train_svm(X, y, band_cfg).model;
    });
  }

  // per-(state, band) models; one standardized matrix per state bucket
  parallel_for(s_total, jobs, [&](std::size_t s) {
    const auto& bucket = buckets[s];
    const std::size_t n = bucket.size();
    if (n == 0) return;  // all bands of this state stay on the fallback

    Matrix X(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      standardize_saturated(
          st, entries[bucket[i].entry].features.row(bucket[i].frame),
          X.row(i));
    }
    std::vector<std::uint8_t> y(n);
    for (std::size_t band = 0; band < k; ++band) {
      BankSlot& sl = bank.slot(s, band);
      if (n < static_cast<std::size_t>(cfg.min_samples_per_model)) {
        sl.kind = SlotKind::kFallback;
        continue;
      }
      std::size_t n_pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = entries[bucket[i].entry]
                   .labels[static_cast<std::size_t>(bucket[i].frame) * k + band];
        n_pos += y[i] ? 1 : 0;
      }
      const std::size_t minority = std::min(n_pos, n - n_pos);
      if (minority < 2) {
        sl.kind = SlotKind::kConstant;
        sl.const_label = n_pos * 2 >= n ? 1 : 0;
        continue;
      }
      SvmTrainConfig slot_cfg = cfg;
      slot_cfg.seed = derive_seed(cfg.seed, SeedStream::kSvmModel, {s, band});
      sl.kind = SlotKind::kTrained;
      sl.svm = train_svm(X, y, slot_cfg).model;
    }
  });

  if (stats) *stats = bank.stats();
  return bank;
}

// ----------------------------------------------- state-conditioned decode

namespace {

class BankMaskSource : public StateMaskSource {
 public:
  BankMaskSource(const EstimatorBank& bank, const Matrix& features_raw,
                 const DeltaConfig& delta_cfg, DeltaMaskRule rule,
                 std::size_t s_total) {
    const std::size_t T = features_raw.rows();
    const std::size_t K = bank.n_bands();
    flags_.assign(s_total, {});
    std::vector<double> row(bank.feature_dim());
    for (std::size_t s = 0; s < s_total; ++s) {
      BinaryMask mask(T, K);
      for (std::size_t t = 0; t < T; ++t) {
        standardize_saturated(bank.standardization(),
                              features_raw.row(t), row.data());
        for (std::size_t band = 0; band < K; ++band) {
          mask.set(t, band, bank.predict_std(s, band, row.data()));
        }
      }
      attach_delta(mask, delta_cfg, rule);
      auto& f = flags_[s];
      f.resize(T * 2 * K);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t band = 0; band < K; ++band) {
          f[t * 2 * K + band] = mask.statics[t * K + band];
          f[t * 2 * K + K + band] = (*mask.delta)[t * K + band];
        }
      }
      dims_ = 2 * K;
    }
    evaluations_ = static_cast<std::uint64_t>(T) * s_total;
  }

  const std::uint8_t* mask(std::size_t t, int global_state) override {
    return flags_[static_cast<std::size_t>(global_state)].data() + t * dims_;
  }

  std::uint64_t evaluations() const { return evaluations_; }

 private:
  std::vector<std::vector<std::uint8_t>> flags_;
  std::size_t dims_ = 0;
  std::uint64_t evaluations_ = 0;
};

}  // namespace

DecodeResult decode_state_conditioned(const HmmSet& hmm, const Matrix& obs,
                                      const EstimatorBank& bank,
                                      const Matrix& features_raw,
                                      const DecodeGraph& graph,
                                      const MarginalOptions& opt,
                                      DeltaMaskRule rule,
                                      std::uint64_t* mask_evaluations_out) {
  if (bank.s_total() != static_cast<std::size_t>(hmm.topo.total_states())) {
    throw std::invalid_argument("bank state count does not match the model");
  }
  DeltaConfig delta_cfg{hmm.delta_half_width};
  BankMaskSource source(bank, features_raw, delta_cfg, rule, bank.s_total());
  if (mask_evaluations_out) *mask_evaluations_out = source.evaluations();
  return viterbi_decode_state_conditioned(hmm, obs, source, graph, opt);
}

}  // namespace mdt
