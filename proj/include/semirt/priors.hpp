#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "semirt/base_measure.hpp"
#include "semirt/conjugate.hpp"
#include "semirt/crp.hpp"
#include "semirt/math.hpp"
#include "semirt/model.hpp"
#include "semirt/rng.hpp"
#include "semirt/strategy.hpp"

namespace semirt {

/// Priors on item parameters: log(lambda) ~ Normal(mean, variance),
/// beta ~ Normal(0, difficulty_variance), gamma ~ Normal(0, intercept_variance),
/// guessing ~ Beta(guessing_a, guessing_b) for 3PL.
struct ItemPriorConfig {
  double log_discrimination_mean = 0.5;
  double log_discrimination_variance = 0.5;
  double difficulty_variance = 3.0;
  double intercept_variance = 3.0;
  double guessing_a = 2.0;
  double guessing_b = 8.0;

  void validate() const {
    if (!(log_discrimination_variance > 0.0) || !(difficulty_variance > 0.0) || !(intercept_variance > 0.0))
      throw std::invalid_argument("item prior variances must be positive");
    if (!(guessing_a > 0.0) || !(guessing_b > 0.0)) throw std::invalid_argument("guessing prior shapes must be positive");
  }

  double location_variance(Parameterization p) const {
    return p == Parameterization::IRT ? difficulty_variance : intercept_variance;
  }
};

/// DP concentration: either fixed or alpha ~ Gamma(shape, rate), mean shape/rate.
struct ConcentrationPrior {
  bool random = true;
  double fixed_value = 1.0;
  double shape = 2.0;
  double rate = 4.0;

  static ConcentrationPrior fixed(double alpha) { return {false, alpha, 2.0, 4.0}; }
  static ConcentrationPrior gamma(double a, double b) { return {true, 1.0, a, b}; }

  void validate() const {
    if (random && (!(shape > 0.0) || !(rate > 0.0))) throw std::invalid_argument("concentration Gamma prior must have positive shape and rate");
    if (!random && !(fixed_value > 0.0)) throw std::invalid_argument("fixed concentration must be positive");
  }

  double draw(Rng& rng) const { return random ? rng.gamma(shape, rate) : fixed_value; }
  double initial() const { return random ? shape / rate : fixed_value; }
};

/// Ability priors. Parametric: eta ~ Normal(mu, s2) with (mu, s2) from
/// `parametric`. Semiparametric: DP mixture with base measure `base_measure`
/// and concentration `concentration`.
struct AbilityPriorConfig {
  NormalInvGammaPrior parametric{};
  NormalInvGammaPrior base_measure{};
  ConcentrationPrior concentration{};

  void validate() const {
    parametric.validate();
    base_measure.validate();
    concentration.validate();
  }
};

struct PriorConfig {
  ItemPriorConfig items{};
  AbilityPriorConfig abilities{};

  void validate() const {
    items.validate();
    abilities.validate();
  }
};

// ---------------------------------------------------------------------------
// Prior predictive

struct PriorPredictiveOptions {
  AbilityModel ability_model = AbilityModel::Parametric;
  Parameterization parameterization = Parameterization::IRT;
  /// Customers per forward-simulated restaurant in the semiparametric case.
  std::size_t crp_batch = 50;
};

/// Draws n_draws success probabilities from the prior predictive. Each draw
/// pairs a fresh item with one ability. Semiparametric abilities come from
/// forward CRP simulations of `crp_batch` customers, one ability per customer.
inline std::vector<double> simulate_prior_predictive(ModelKind kind, const ItemPriorConfig& item_prior,
                                                     const AbilityPriorConfig& ability_prior, std::size_t n_draws,
                                                     std::uint64_t seed, const PriorPredictiveOptions& opt = {}) {
  if (n_draws < 1) throw std::invalid_argument("simulate_prior_predictive: n_draws must be at least 1");
  if (opt.crp_batch < 1) throw std::invalid_argument("simulate_prior_predictive: crp_batch must be at least 1");
  item_prior.validate();
  ability_prior.validate();
  Rng item_rng = Rng::substream(seed, "prior-items");
  Rng ability_rng = Rng::substream(seed, "prior-abilities");

  std::vector<double> abilities;
  abilities.reserve(n_draws);
  if (opt.ability_model == AbilityModel::Parametric) {
    const auto& h = ability_prior.parametric;
    for (std::size_t t = 0; t < n_draws; ++t) {
      const double mu = ability_rng.normal(h.mean, std::sqrt(h.mean_variance));
      const double s2 = ability_rng.inv_gamma(h.shape, h.scale);
      abilities.push_back(ability_rng.normal(mu, std::sqrt(s2)));
    }
  } else {
    const BaseMeasure g0(ability_prior.base_measure);
    while (abilities.size() < n_draws) {
      const std::size_t m = std::min(opt.crp_batch, n_draws - abilities.size());
      const double alpha = ability_prior.concentration.draw(ability_rng);
      const auto labels = crp_forward_labels(alpha, m, ability_rng);
      std::vector<Atom> atoms;
      for (int z : labels) {
        if (static_cast<std::size_t>(z) == atoms.size()) atoms.push_back(g0.draw(ability_rng));
        const auto& a = atoms[static_cast<std::size_t>(z)];
        abilities.push_back(ability_rng.normal(a.mean, std::sqrt(a.variance)));
      }
    }
  }

  std::vector<double> pi(n_draws);
  for (std::size_t t = 0; t < n_draws; ++t) {
    double lambda = 1.0;
    if (has_discrimination(kind))
      lambda = std::exp(item_rng.normal(item_prior.log_discrimination_mean, std::sqrt(item_prior.log_discrimination_variance)));
    const double loc = item_rng.normal(0.0, std::sqrt(item_prior.location_variance(opt.parameterization)));
    const double guess = has_guessing(kind) ? item_rng.beta(item_prior.guessing_a, item_prior.guessing_b) : 0.0;
    const double x = opt.parameterization == Parameterization::IRT ? lambda * (abilities[t] - loc) : lambda * abilities[t] + loc;
    pi[t] = guess + (1.0 - guess) * math::expit(x);
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Number of clusters

struct ClusterMoments {
  double expected = 0.0;
  double variance = 0.0;
};

/// Mean and variance of the number of occupied tables K_N under CRP(alpha).
/// K_N is a sum of independent Bernoulli(alpha / (alpha + k)), k = 0..N-1,
/// so Var = sum_k alpha k / (alpha + k)^2.
inline ClusterMoments crp_cluster_moments(double alpha, std::size_t N) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("crp_cluster_moments: alpha must be positive");
  if (N < 1) throw std::invalid_argument("crp_cluster_moments: N must be at least 1");
  ClusterMoments m;
  for (std::size_t i = 1; i <= N; ++i) {
    const double k = static_cast<double>(N - i);
    m.expected += alpha / (alpha + k);
    m.variance += alpha * k / ((alpha + k) * (alpha + k));
  }
  return m;
}

/// Monte Carlo moments of K_N with alpha integrated over its prior:
/// E = mean of conditional means; Var = mean of conditional variances plus
/// the (1/R) variance of conditional means.
inline ClusterMoments marginal_cluster_moments(const ConcentrationPrior& prior, std::size_t N, std::size_t n_mc,
                                               std::uint64_t seed) {
  prior.validate();
  if (n_mc < 1) throw std::invalid_argument("marginal_cluster_moments: n_mc must be at least 1");
  if (!prior.random) return crp_cluster_moments(prior.fixed_value, N);
  Rng rng = Rng::substream(seed, "cluster-moments");
  std::vector<double> means(n_mc);
  double mean_var = 0.0;
  for (std::size_t r = 0; r < n_mc; ++r) {
    const auto m = crp_cluster_moments(rng.gamma(prior.shape, prior.rate), N);
    means[r] = m.expected;
    mean_var += m.variance;
  }
  double e = 0.0;
  for (double x : means) e += x;
  e /= static_cast<double>(n_mc);
  double v = 0.0;
  for (double x : means) v += (x - e) * (x - e);
  return {e, mean_var / static_cast<double>(n_mc) + v / static_cast<double>(n_mc)};
}

inline ClusterMoments marginal_cluster_moments(double a, double b, std::size_t N, std::size_t n_mc = 10000,
                                               std::uint64_t seed = 1) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("marginal_cluster_moments: Gamma parameters must be positive");
  return marginal_cluster_moments(ConcentrationPrior::gamma(a, b), N, n_mc, seed);
}

}  // namespace semirt
