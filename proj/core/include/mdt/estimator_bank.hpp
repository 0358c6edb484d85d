#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mdt/hmm.hpp"
#include "mdt/mask.hpp"
#include "mdt/mask_features.hpp"
#include "mdt/matrix.hpp"
#include "mdt/svm.hpp"

namespace mdt {

enum class SlotKind : std::uint8_t {
  kTrained = 0,
  kConstant = 1,
  kFallback = 2,  // resolves to the pooled per-band model
};

struct BankSlot {
  SlotKind kind = SlotKind::kFallback;
  LinearSvm svm;               // kTrained
  std::uint8_t const_label = 1;  // kConstant
};

struct PooledModel {
  bool trained = false;
  LinearSvm svm;
  std::uint8_t const_label = 1;
};

struct BankStats {
  std::size_t trained = 0;
  std::size_t constant = 0;
  std::size_t fallback = 0;
};

// One binary linear classifier per (global HMM state, mel band) plus one
// pooled state-independent model per band as the fallback for
// under-populated slots. Every slot resolves to a usable predictor.
class EstimatorBank {
 public:
  EstimatorBank() = default;
  EstimatorBank(std::size_t s_total, std::size_t k, std::size_t feature_dim);

  std::size_t s_total() const { return s_total_; }
  std::size_t n_bands() const { return k_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t slot_count() const { return s_total_ * k_; }

  BankSlot& slot(std::size_t s, std::size_t k) { return slots_[s * k_ + k]; }
  const BankSlot& slot(std::size_t s, std::size_t k) const {
    return slots_[s * k_ + k];
  }
  PooledModel& pooled(std::size_t k) { return pooled_[k]; }
  const PooledModel& pooled(std::size_t k) const { return pooled_[k]; }

  Standardization& standardization() { return std_; }
  const Standardization& standardization() const { return std_; }

  // x is a standardized feature row
  bool predict_std(std::size_t s, std::size_t k, const double* x) const;
  bool predict_pooled_std(std::size_t k, const double* x) const;

  BankStats stats() const;

  // Static mask from per-frame states, delta companion via the mask rule.
  BinaryMask predict_mask(const Matrix& features_raw,
                          const std::vector<int>& alignment,
                          const DeltaConfig& delta_cfg,
                          DeltaMaskRule rule = DeltaMaskRule::kAnd) const;

  // State-independent baseline: the pooled models applied to every frame.
  BinaryMask predict_mask_pooled(const Matrix& features_raw,
                                 const DeltaConfig& delta_cfg,
                                 DeltaMaskRule rule = DeltaMaskRule::kAnd) const;

  // SVMB file: magic, u32 S_total, u32 K, u32 feature_dim, standardization
  // vectors, K pooled records, then S_total*K slot records row-major.
  void save(const std::filesystem::path& path) const;
  static EstimatorBank load(const std::filesystem::path& path);

 private:
  std::size_t s_total_ = 0;
  std::size_t k_ = 0;
  std::size_t feature_dim_ = 0;
  Standardization std_;
  std::vector<BankSlot> slots_;
  std::vector<PooledModel> pooled_;
};

struct BankTrainEntry {
  Matrix features;                   // T x 6K, raw (unstandardized)
  std::vector<std::uint8_t> labels;  // T x K oracle reliability, row-major
  std::vector<int> alignment;        // T global state indices
};

// Buckets frames by aligned state, trains one model per (state, band) with
// enough two-class data, substitutes constants for single-class buckets and
// the pooled fallback for under-populated ones. Per-model seeds derive from
// (state, band), so the parallel schedule cannot change any model.
EstimatorBank train_estimator_bank(const std::vector<BankTrainEntry>& entries,
                                   std::size_t s_total, std::size_t k,
                                   const SvmTrainConfig& cfg, unsigned jobs,
                                   BankStats* stats = nullptr);

// State-conditioned decoding: each state scores each frame under the mask
// its own estimators predict. mask_evaluations_out (optional) receives the
// number of per-frame mask vectors evaluated, i.e. T * S_total.
DecodeResult decode_state_conditioned(const HmmSet& hmm, const Matrix& obs,
                                      const EstimatorBank& bank,
                                      const Matrix& features_raw,
                                      const DecodeGraph& graph,
                                      const MarginalOptions& opt,
                                      DeltaMaskRule rule = DeltaMaskRule::kAnd,
                                      std::uint64_t* mask_evaluations_out =
                                          nullptr);

}  // namespace mdt
