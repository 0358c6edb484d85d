#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mdt/frontend.hpp"

namespace mdt {

// T x K reliability mask; true = reliable (speech-dominated) cell. The
// optional companion covers the delta coefficients of the same utterance.
struct BinaryMask {
  std::size_t T = 0;
  std::size_t K = 0;
  std::vector<std::uint8_t> statics;                 // T*K, row-major
  std::optional<std::vector<std::uint8_t>> delta;    // same layout

  BinaryMask() = default;
  BinaryMask(std::size_t t, std::size_t k, bool fill = false)
      : T(t), K(k), statics(t * k, fill ? 1 : 0) {}

  bool at(std::size_t t, std::size_t k) const { return statics[t * K + k] != 0; }
  void set(std::size_t t, std::size_t k, bool v) { statics[t * K + k] = v ? 1 : 0; }
  bool delta_at(std::size_t t, std::size_t k) const {
    return (*delta)[t * K + k] != 0;
  }
  std::size_t count_reliable() const;
};

struct OracleThreshold {
  double theta_db = 0.0;
};

enum class DeltaMaskRule {
  kAnd,  // delta cell reliable iff all static cells in the +-W window are
  kOr,   // ablation alternative: any static cell in the window reliable
};

BinaryMask all_reliable_mask(std::size_t T, std::size_t K);

// cell (t,k) reliable  <=>  10*log10(speech/noise) >= theta_db, ties reliable.
// Both inputs must be linear-power mel matrices of the same shape.
BinaryMask oracle_mask(const SpectroTemporal& speech,
                       const SpectroTemporal& noise,
                       const OracleThreshold& thr);

// Derives the delta-coefficient mask from a static mask over the same +-W
// window the delta features use, with replicated edges.
std::vector<std::uint8_t> delta_mask(const BinaryMask& static_mask,
                                     const DeltaConfig& cfg,
                                     DeltaMaskRule rule = DeltaMaskRule::kAnd);

void attach_delta(BinaryMask& mask, const DeltaConfig& cfg,
                  DeltaMaskRule rule = DeltaMaskRule::kAnd);

// Reliable cells with no reliable 4-neighbor (t+-1, k+-1 within bounds).
std::size_t count_isolated_reliable(const BinaryMask& mask);

// MASK file: magic "MASK", u32 T, u32 K, u8 has_delta, then T*K bits
// row-major packed LSB-first (static), then optionally T*K bits (delta).
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

}  // namespace mdt
