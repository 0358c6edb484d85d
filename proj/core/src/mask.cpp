#include "mdt/mask.hpp"

#include <cmath>
#include <stdexcept>

#include "mdt/io_util.hpp"

namespace mdt {

std::size_t BinaryMask::count_reliable() const {
  std::size_t n = 0;
  for (std::uint8_t v : statics) n += v;
  return n;
}

BinaryMask all_reliable_mask(std::size_t T, std::size_t K) {
  BinaryMask m(T, K, true);
  m.delta = std::vector<std::uint8_t>(T * K, 1);
  return m;
}

BinaryMask oracle_mask(const SpectroTemporal& speech,
                       const SpectroTemporal& noise,
                       const OracleThreshold& thr) {
  if (speech.domain != Domain::kLinearPower ||
      noise.domain != Domain::kLinearPower) {
    throw std::invalid_argument("oracle_mask needs linear-power inputs");
  }
  if (!speech.values.same_shape(noise.values)) {
    throw std::invalid_argument("oracle_mask: shape mismatch");
  }
  if (!std::isfinite(thr.theta_db)) {
    throw std::invalid_argument("oracle_mask: threshold must be finite");
  }
  const std::size_t T = speech.num_frames();
  const std::size_t K = speech.num_bands();
  BinaryMask mask(T, K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      const double snr_db =
          10.0 * std::log10(speech.values(t, k) / noise.values(t, k));
      mask.set(t, k, snr_db >= thr.theta_db);
    }
  }
  return mask;
}

std::vector<std::uint8_t> delta_mask(const BinaryMask& static_mask,
                                     const DeltaConfig& cfg,
                                     DeltaMaskRule rule) {
  const std::size_t T = static_mask.T;
  const std::size_t K = static_mask.K;
  const int W = cfg.half_width;
  std::vector<std::uint8_t> out(T * K, 0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      bool acc = rule == DeltaMaskRule::kAnd;
      for (int w = -W; w <= W; ++w) {
        std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t) + w;
        if (tt < 0) tt = 0;
        if (tt >= static_cast<std::ptrdiff_t>(T)) {
          tt = static_cast<std::ptrdiff_t>(T) - 1;
        }
        const bool v = static_mask.at(static_cast<std::size_t>(tt), k);
        acc = rule == DeltaMaskRule::kAnd ? (acc && v) : (acc || v);
      }
      out[t * K + k] = acc ? 1 : 0;
    }
  }
  return out;
}

void attach_delta(BinaryMask& mask, const DeltaConfig& cfg,
                  DeltaMaskRule rule) {
  mask.delta = delta_mask(mask, cfg, rule);
}

std::size_t count_isolated_reliable(const BinaryMask& mask) {
  const std::size_t T = mask.T;
  const std::size_t K = mask.K;
  std::size_t count = 0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      if (!mask.at(t, k)) continue;
      bool neighbor = false;
      if (t > 0 && mask.at(t - 1, k)) neighbor = true;
      if (!neighbor && t + 1 < T && mask.at(t + 1, k)) neighbor = true;
      if (!neighbor && k > 0 && mask.at(t, k - 1)) neighbor = true;
      if (!neighbor && k + 1 < K && mask.at(t, k + 1)) neighbor = true;
      if (!neighbor) ++count;
    }
  }
  return count;
}

namespace {

void pack_bits(std::ostream& os, const std::vector<std::uint8_t>& bits) {
  std::uint8_t byte = 0;
  int filled = 0;
  for (std::uint8_t b : bits) {
    if (b) byte |= static_cast<std::uint8_t>(1u << filled);
    if (++filled == 8) {
      write_u8(os, byte);
      byte = 0;
      filled = 0;
    }
  }
  if (filled > 0) write_u8(os, byte);
}

std::vector<std::uint8_t> unpack_bits(std::istream& is, std::size_t n) {
  std::vector<std::uint8_t> bits(n, 0);
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 8 == 0) byte = read_u8(is);
    bits[i] = (byte >> (i % 8)) & 1u;
  }
  return bits;
}

}  // namespace

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  if (mask.T == 0 || mask.K == 0) {
    throw std::invalid_argument("refusing to write empty mask: " +
                                path.string());
  }
  auto os = open_out(path);
  write_magic(os, "MASK");
  write_u32(os, static_cast<std::uint32_t>(mask.T));
  write_u32(os, static_cast<std::uint32_t>(mask.K));
  write_u8(os, mask.delta.has_value() ? 1 : 0);
  pack_bits(os, mask.statics);
  if (mask.delta) pack_bits(os, *mask.delta);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

BinaryMask read_mask(const std::filesystem::path& path) {
  auto is = open_in(path);
  expect_magic(is, "MASK", "mask file " + path.string());
  const std::uint32_t T = read_u32(is);
  const std::uint32_t K = read_u32(is);
  const std::uint8_t has_delta = read_u8(is);
  if (T == 0 || K == 0) {
    throw std::runtime_error("malformed mask file " + path.string() +
                             ": empty dimensions");
  }
  BinaryMask mask(T, K);
  mask.statics = unpack_bits(is, static_cast<std::size_t>(T) * K);
  if (has_delta) {
    mask.delta = unpack_bits(is, static_cast<std::size_t>(T) * K);
  }
  return mask;
}

}  // namespace mdt
