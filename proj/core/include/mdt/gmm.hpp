#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mdt {

struct GaussianComponent {
  double log_weight = 0.0;
  std::vector<double> mean;
  std::vector<double> var;  // diagonal

  // derived, filled by finalize()
  std::vector<double> inv_sigma;
  std::vector<double> log_sigma;

  void finalize();
};

struct GaussianMixture {
  std::vector<GaussianComponent> comps;

  std::size_t dim() const { return comps.empty() ? 0 : comps[0].mean.size(); }
  void finalize();
};

// How unreliable dimensions are treated. The observation vector is
// [static 0..n_static-1 | delta n_static..2*n_static-1]. Unreliable static
// dims use the bounded marginal (noisy log-energy upper-bounds the clean
// value under additive noise); unreliable delta dims are fully marginalized
// unless bounded_deltas is set, because the delta of an upper bound is not
// itself a bound.
struct MarginalOptions {
  std::size_t n_static = 0;
  bool bounded_deltas = false;
};

// reliable dim d: log N(obs_d; mu_d, sigma_d^2)
// unreliable static dim: log Phi((obs_d - mu_d) / sigma_d)
// unreliable delta dim: 0 (or the bounded term if bounded_deltas)
double gaussian_marginal_loglik(const GaussianComponent& comp,
                                std::span<const double> obs,
                                std::span<const std::uint8_t> reliable,
                                const MarginalOptions& opt);

// the mask-free path: plain diagonal Gaussian log-density over all dims
double gaussian_full_loglik(const GaussianComponent& comp,
                            std::span<const double> obs);

// log-sum-exp over mixture components of (log weight + component loglik)
double state_loglik(const GaussianMixture& gmm, std::span<const double> obs,
                    std::span<const std::uint8_t> reliable,
                    const MarginalOptions& opt);

double state_full_loglik(const GaussianMixture& gmm,
                         std::span<const double> obs);

}  // namespace mdt
