#include "mdt/gmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdt/normal.hpp"

namespace mdt {

void GaussianComponent::finalize() {
  inv_sigma.resize(var.size());
  log_sigma.resize(var.size());
  for (std::size_t d = 0; d < var.size(); ++d) {
    if (!(var[d] > 0.0)) {
      throw std::invalid_argument("gaussian variance must be positive");
    }
    const double sigma = std::sqrt(var[d]);
    inv_sigma[d] = 1.0 / sigma;
    log_sigma[d] = std::log(sigma);
  }
}

void GaussianMixture::finalize() {
  for (auto& c : comps) c.finalize();
}

double gaussian_marginal_loglik(const GaussianComponent& comp,
                                std::span<const double> obs,
                                std::span<const std::uint8_t> reliable,
                                const MarginalOptions& opt) {
  const std::size_t D = comp.mean.size();
  if (obs.size() != D || reliable.size() != D) {
    throw std::invalid_argument("observation/mask dimension mismatch");
  }
  double ll = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    const double x = obs[d];
    if (!std::isfinite(x)) {
      throw std::invalid_argument("non-finite observation");
    }
    if (reliable[d]) {
      ll += log_gauss_density(x, comp.mean[d], comp.inv_sigma[d],
                              comp.log_sigma[d]);
    } else if (d < opt.n_static || opt.bounded_deltas) {
      ll += log_phi((x - comp.mean[d]) * comp.inv_sigma[d]);
    }
    // fully marginalized dims integrate to 1 and contribute 0
  }
  return ll;
}

double gaussian_full_loglik(const GaussianComponent& comp,
                            std::span<const double> obs) {
  const std::size_t D = comp.mean.size();
  if (obs.size() != D) {
    throw std::invalid_argument("observation dimension mismatch");
  }
  double ll = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    ll += log_gauss_density(obs[d], comp.mean[d], comp.inv_sigma[d],
                            comp.log_sigma[d]);
  }
  return ll;
}

namespace {

template <typename PerComp>
double logsumexp_over(const GaussianMixture& gmm, PerComp&& value) {
  if (gmm.comps.empty()) throw std::invalid_argument("empty mixture");
  if (gmm.comps.size() == 1) {
    return gmm.comps[0].log_weight + value(gmm.comps[0]);
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> vals(gmm.comps.size());
  for (std::size_t m = 0; m < gmm.comps.size(); ++m) {
    vals[m] = gmm.comps[m].log_weight + value(gmm.comps[m]);
    if (vals[m] > best) best = vals[m];
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double v : vals) acc += std::exp(v - best);
  return best + std::log(acc);
}

}  // namespace

double state_loglik(const GaussianMixture& gmm, std::span<const double> obs,
                    std::span<const std::uint8_t> reliable,
                    const MarginalOptions& opt) {
  return logsumexp_over(gmm, [&](const GaussianComponent& c) {
    return gaussian_marginal_loglik(c, obs, reliable, opt);
  });
}

double state_full_loglik(const GaussianMixture& gmm,
                         std::span<const double> obs) {
  return logsumexp_over(gmm, [&](const GaussianComponent& c) {
    return gaussian_full_loglik(c, obs);
  });
}

}  // namespace mdt
