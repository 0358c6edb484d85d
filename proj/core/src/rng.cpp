#include "mdt/rng.hpp"

#include <cmath>

namespace mdt {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGamma;
  return mix(state_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  // modulo bias is irrelevant at our n << 2^64
  return next_u64() % n;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t z = mix(base + kGamma);
  for (std::uint64_t p : path) {
    z = mix(z ^ (p + kGamma));
  }
  return z;
}

std::uint64_t derive_seed(std::uint64_t base, SeedStream stream,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t z = mix(base + kGamma);
  z = mix(z ^ (static_cast<std::uint64_t>(stream) + kGamma));
  for (std::uint64_t p : path) {
    z = mix(z ^ (p + kGamma));
  }
  return z;
}

}  // namespace mdt
