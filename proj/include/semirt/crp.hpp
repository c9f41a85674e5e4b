#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semirt/base_measure.hpp"
#include "semirt/conjugate.hpp"
#include "semirt/math.hpp"
#include "semirt/rng.hpp"

namespace semirt {

/// Chinese-restaurant-process state of a DP mixture over abilities.
/// Occupied clusters are stored densely: labels index `atoms` and `counts`.
struct CRPState {
  std::vector<int> labels;
  std::vector<Atom> atoms;
  std::vector<int> counts;
  double alpha = 1.0;

  std::size_t n_clusters() const { return atoms.size(); }
  std::size_t n_individuals() const { return labels.size(); }

  /// Everyone in one cluster.
  static CRPState single_cluster(std::size_t n, Atom atom, double alpha) {
    CRPState s;
    s.labels.assign(n, 0);
    s.atoms = {atom};
    s.counts = {static_cast<int>(n)};
    s.alpha = alpha;
    return s;
  }

  void check_invariants() const {
    if (atoms.size() != counts.size()) throw std::logic_error("CRP state: atoms/counts size mismatch");
    std::vector<int> tally(counts.size(), 0);
    for (int z : labels) {
      if (z < 0 || static_cast<std::size_t>(z) >= counts.size()) throw std::logic_error("CRP state: label out of range");
      ++tally[static_cast<std::size_t>(z)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (tally[k] != counts[k] || counts[k] < 1) throw std::logic_error("CRP state: occupancy counts are inconsistent");
      if (!(atoms[k].variance > 0.0)) throw std::logic_error("CRP state: atom variance must be positive");
    }
    if (!(alpha > 0.0)) throw std::logic_error("CRP state: alpha must be positive");
  }
};

namespace detail {

// Drops cluster k (assumed empty) by moving the last cluster into its slot.
inline void remove_cluster(CRPState& s, int k) {
  const int last = static_cast<int>(s.atoms.size()) - 1;
  if (k != last) {
    s.atoms[static_cast<std::size_t>(k)] = s.atoms.back();
    s.counts[static_cast<std::size_t>(k)] = s.counts.back();
    for (int& z : s.labels) {
      if (z == last) z = k;
    }
  }
  s.atoms.pop_back();
  s.counts.pop_back();
}

}  // namespace detail

/// Collapsed reassignment of individual j:
///   P(z_j = k)   ∝ n_k^{-j} Normal(eta_j; mu_k, s2_k)
///   P(z_j = new) ∝ alpha * integral Normal(eta_j; theta) dG0(theta)
/// A new cluster's atom is drawn from its posterior given eta_j alone.
inline void crp_assignment_update(std::size_t j, CRPState& state, double eta_j, const BaseMeasure& base, Rng& rng) {
  if (j >= state.labels.size()) throw std::out_of_range("crp_assignment_update: individual index out of range");
  const int k_old = state.labels[j];
  if (k_old < 0 || static_cast<std::size_t>(k_old) >= state.counts.size() || state.counts[static_cast<std::size_t>(k_old)] < 1)
    throw std::logic_error("crp_assignment_update: corrupted occupancy counts");
  if (!std::isfinite(eta_j)) throw std::domain_error("crp_assignment_update: ability is not finite");

  if (--state.counts[static_cast<std::size_t>(k_old)] == 0) {
    state.labels[j] = -1;
    detail::remove_cluster(state, k_old);
  }

  const std::size_t K = state.atoms.size();
  std::vector<double> log_w(K + 1);
  for (std::size_t k = 0; k < K; ++k) {
    log_w[k] = std::log(static_cast<double>(state.counts[k])) +
               math::normal_logpdf(eta_j, state.atoms[k].mean, state.atoms[k].variance);
  }
  log_w[K] = std::log(state.alpha) + base.log_marginal(eta_j);
  const double m = math::log_sum_exp(log_w);
  std::vector<double> w(K + 1);
  for (std::size_t k = 0; k <= K; ++k) w[k] = std::exp(log_w[k] - m);

  const std::size_t k_new = rng.categorical(w);
  if (k_new == K) {
    state.atoms.push_back(base.draw_posterior(eta_j, rng));
    state.counts.push_back(1);
  } else {
    ++state.counts[k_new];
  }
  state.labels[j] = static_cast<int>(k_new);
}

inline void crp_label_sweep(CRPState& state, std::span<const double> etas, const BaseMeasure& base, Rng& rng) {
  for (std::size_t j = 0; j < etas.size(); ++j) crp_assignment_update(j, state, etas[j], base, rng);
}

/// Gibbs update of every occupied atom: mu_k | s2_k, then s2_k | mu_k.
inline void crp_atom_update(CRPState& state, std::span<const double> etas, const NormalInvGammaPrior& g0, Rng& rng) {
  std::vector<std::vector<double>> members(state.atoms.size());
  for (std::size_t j = 0; j < etas.size(); ++j) members[static_cast<std::size_t>(state.labels[j])].push_back(etas[j]);
  for (std::size_t k = 0; k < state.atoms.size(); ++k) {
    auto& a = state.atoms[k];
    a.mean = draw_mean_given_variance(members[k], a.variance, g0, rng);
    a.variance = draw_variance_given_mean(members[k], a.mean, g0, rng);
  }
}

/// Auxiliary-variable update of the concentration under a Gamma(shape, rate)
/// prior: x ~ Beta(alpha + 1, N), then alpha from the two-component Gamma
/// mixture with odds (a + K - 1) / (N (b - log x)).
inline double escobar_west_alpha_update(double alpha, std::size_t K, std::size_t N, double shape, double rate, Rng& rng) {
  if (N == 0 || K < 1 || K > N) throw std::invalid_argument("escobar_west_alpha_update: K must lie in [1, N]");
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("escobar_west_alpha_update: Gamma prior must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("escobar_west_alpha_update: alpha must be positive");
  const double x = rng.beta(alpha + 1.0, static_cast<double>(N));
  const double r = rate - std::log(x);
  const double k = static_cast<double>(K);
  const double odds = (shape + k - 1.0) / (static_cast<double>(N) * r);
  const double p_first = odds / (1.0 + odds);
  const double a = rng.bernoulli(p_first) ? shape + k : shape + k - 1.0;
  return rng.gamma(a, r);
}

/// Forward simulation of CRP(alpha) labels for N customers.
inline std::vector<int> crp_forward_labels(double alpha, std::size_t N, Rng& rng) {
  std::vector<int> labels(N);
  std::vector<double> counts;
  for (std::size_t j = 0; j < N; ++j) {
    counts.push_back(alpha);
    const auto k = rng.categorical(counts);
    counts.pop_back();
    if (k == counts.size()) counts.push_back(1.0);
    else counts[k] += 1.0;
    labels[j] = static_cast<int>(k);
  }
  return labels;
}

/// Number of occupied tables after N customers: sum of independent
/// Bernoulli(alpha / (alpha + j - 1)) indicators.
inline std::size_t crp_forward_cluster_count(double alpha, std::size_t N, Rng& rng) {
  std::size_t K = 0;
  for (std::size_t j = 0; j < N; ++j) K += rng.bernoulli(alpha / (alpha + static_cast<double>(j)));
  return K;
}

}  // namespace semirt
