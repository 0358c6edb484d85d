#pragma once

namespace mdt {

// Rational-approximation complementary error function (Cody's algorithm).
// Self-contained so that results are bit-identical regardless of the host
// libm. Relative error is far below the 1e-7 the decoder needs.
double erfc_cody(double x);

// log of the standard normal CDF, finite and accurate for any z (asymptotic
// tail expansion below z = -37 where erfc underflows).
double log_phi(double z);

// log N(x; mu, sigma^2) for a scalar dimension.
double log_gauss_density(double x, double mean, double inv_sigma,
                         double log_sigma);

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kHalfLogTwoPi = 0.9189385332046727418;

}  // namespace mdt
