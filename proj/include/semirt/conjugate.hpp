#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "semirt/rng.hpp"

namespace semirt {

/// Independent priors mu ~ Normal(mean, mean_variance) and
/// sigma2 ~ InvGamma(shape, scale) for a normal kernel. Used both for the
/// parametric ability hyperparameters and for the DP base measure G0.
struct NormalInvGammaPrior {
  double mean = 0.0;
  double mean_variance = 3.0;
  double shape = 2.01;
  double scale = 1.01;

  void validate() const {
    if (!(mean_variance > 0.0) || !(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("normal/inverse-gamma prior: variance, shape and scale must be positive");
  }
};

struct NormalDraw {
  double mean;
  double variance;
};

/// Full conditional of the mean given the variance: Normal(m, v).
inline NormalDraw mean_full_conditional(std::span<const double> obs, double variance, const NormalInvGammaPrior& prior) {
  double sum = 0.0;
  for (double x : obs) sum += x;
  const double precision = 1.0 / prior.mean_variance + static_cast<double>(obs.size()) / variance;
  const double m = (prior.mean / prior.mean_variance + sum / variance) / precision;
  return {m, 1.0 / precision};
}

/// Full conditional of the variance given the mean: InvGamma(shape, scale).
inline std::pair<double, double> variance_full_conditional(std::span<const double> obs, double mean,
                                                           const NormalInvGammaPrior& prior) {
  double ss = 0.0;
  for (double x : obs) ss += (x - mean) * (x - mean);
  return {prior.shape + 0.5 * static_cast<double>(obs.size()), prior.scale + 0.5 * ss};
}

inline double draw_mean_given_variance(std::span<const double> obs, double variance, const NormalInvGammaPrior& prior,
                                       Rng& rng) {
  const auto fc = mean_full_conditional(obs, variance, prior);
  return rng.normal(fc.mean, std::sqrt(fc.variance));
}

inline double draw_variance_given_mean(std::span<const double> obs, double mean, const NormalInvGammaPrior& prior,
                                       Rng& rng) {
  const auto [shape, scale] = variance_full_conditional(obs, mean, prior);
  return rng.inv_gamma(shape, scale);
}

/// One Gibbs sweep over (mu, sigma2): mu | current sigma2, data, then
/// sigma2 | new mu, data. With no observations both draws come from the prior.
inline NormalDraw conjugate_normal_invgamma_update(std::span<const double> obs, double current_variance,
                                                   const NormalInvGammaPrior& prior, Rng& rng) {
  prior.validate();
  if (!(current_variance > 0.0)) throw std::invalid_argument("conjugate update: current variance must be positive");
  const double mu = draw_mean_given_variance(obs, current_variance, prior, rng);
  const double s2 = draw_variance_given_mean(obs, mu, prior, rng);
  return {mu, s2};
}

}  // namespace semirt
