#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "semirt/archive.hpp"
#include "semirt/model.hpp"

namespace semirt {

namespace detail {

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double mean_log_positive(std::span<const double> v, const char* what) {
  double s = 0.0;
  for (double x : v) {
    if (!(x > 0.0)) throw std::invalid_argument(std::string(what) + ": discrimination must be positive");
    s += std::log(x);
  }
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Maps auxiliary item parameters onto the sum-to-zero constrained ones:
/// log(lambda) minus its mean, location (beta or gamma) minus its mean.
/// An empty `discrimination` (1PL) stays empty.
inline ItemParametersIRT apply_item_constraints(const ItemParametersIRT& aux) {
  if (aux.difficulty.empty()) throw std::invalid_argument("apply_item_constraints: no items");
  ItemParametersIRT out = aux;
  if (!aux.discrimination.empty()) {
    const double m = detail::mean_log_positive(aux.discrimination, "apply_item_constraints");
    for (auto& x : out.discrimination) x = std::exp(std::log(x) - m);
  }
  const double b = detail::mean_of(aux.difficulty);
  for (auto& x : out.difficulty) x -= b;
  return out;
}

inline ItemParametersSI apply_item_constraints(const ItemParametersSI& aux) {
  ItemParametersIRT tmp{aux.slope, aux.intercept, aux.guessing};
  tmp = apply_item_constraints(tmp);
  return {tmp.discrimination, tmp.difficulty, tmp.guessing};
}

/// One draw in the base parameterization (IRT form, sum-to-zero items).
struct BaseDraw {
  std::vector<double> discrimination;
  std::vector<double> difficulty;
  std::vector<double> abilities;
};

struct PostprocessResult {
  BaseDraw draw;
  TransformRecord record;
};

/// IRT draw -> base: s = exp(-mean log lambda), b = mean beta;
/// lambda* = s lambda, beta* = (beta - b)/s, eta* = (eta - b)/s.
inline PostprocessResult postprocess_irt(std::span<const double> lambda, std::span<const double> beta,
                                         std::span<const double> eta) {
  if (lambda.size() != beta.size() || beta.empty()) throw std::invalid_argument("postprocess_irt: item parameter sizes differ");
  const double s = std::exp(-detail::mean_log_positive(lambda, "postprocess_irt"));
  const double b = detail::mean_of(beta);
  PostprocessResult r;
  r.record = {s, b, 0.0, b};
  for (double x : lambda) r.draw.discrimination.push_back(s * x);
  for (double x : beta) r.draw.difficulty.push_back((x - b) / s);
  for (double x : eta) r.draw.abilities.push_back((x - b) / s);
  return r;
}

/// SI draw -> base: s = exp(-mean log lambda), c = sum gamma / sum lambda;
/// lambda~ = s lambda, gamma~ = gamma - lambda c, eta~ = (eta + c)/s,
/// beta~ = -gamma~/lambda~, then beta* = beta~ - d with d = mean beta~.
/// Abilities are shifted by the same d so the logits are unchanged.
inline PostprocessResult postprocess_si(std::span<const double> lambda, std::span<const double> gamma,
                                        std::span<const double> eta) {
  if (lambda.size() != gamma.size() || gamma.empty()) throw std::invalid_argument("postprocess_si: item parameter sizes differ");
  const double s = std::exp(-detail::mean_log_positive(lambda, "postprocess_si"));
  const double c = std::accumulate(gamma.begin(), gamma.end(), 0.0) / std::accumulate(lambda.begin(), lambda.end(), 0.0);
  PostprocessResult r;
  std::vector<double> bt(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double lt = s * lambda[i];
    r.draw.discrimination.push_back(lt);
    bt[i] = -(gamma[i] - lambda[i] * c) / lt;
  }
  const double d = detail::mean_of(bt);
  for (double x : bt) r.draw.difficulty.push_back(x - d);
  for (double x : eta) r.draw.abilities.push_back((x + c) / s - d);
  r.record = {s, c, d, -c + d * s};
  return r;
}

/// Ability-scale map of a record, also applied to mixture atoms.
inline double transform_ability(double eta, const TransformRecord& r) { return (eta - r.offset) / r.scale; }
inline Atom transform_atom(const Atom& a, const TransformRecord& r) {
  return {(a.mean - r.offset) / r.scale, a.variance / (r.scale * r.scale)};
}

/// Density of eta* = (eta - offset)/scale given the density of eta:
/// p*(x) = p(scale x + offset) scale.
inline std::vector<double> rescale_density(const std::function<double(double)>& density, std::span<const double> grid,
                                           const TransformRecord& r) {
  if (!(r.scale > 0.0)) throw std::invalid_argument("rescale_density: scale must be positive");
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = density(r.scale * grid[k] + r.offset);
    if (v < 0.0) throw std::invalid_argument("rescale_density: density must be nonnegative");
    out[k] = v * r.scale;
  }
  return out;
}

/// Grid form: the input density is linearly interpolated (zero outside its
/// grid) and evaluated on `grid_out`.
inline std::vector<double> rescale_density(std::span<const double> grid_in, std::span<const double> dens_in,
                                           const TransformRecord& r, std::span<const double> grid_out) {
  if (grid_in.size() != dens_in.size() || grid_in.size() < 2) throw std::invalid_argument("rescale_density: grid and values differ in size");
  auto interp = [&](double x) {
    if (x < grid_in.front() || x > grid_in.back()) return 0.0;
    const auto it = std::upper_bound(grid_in.begin(), grid_in.end(), x);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - grid_in.begin()), grid_in.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = (x - grid_in[lo]) / (grid_in[hi] - grid_in[lo]);
    return (1.0 - w) * dens_in[lo] + w * dens_in[hi];
  };
  return rescale_density(interp, grid_out, r);
}

/// Maps every draw of an IRT or SI archive onto the base parameterization.
/// Hyperparameters follow the abilities (mu -> (mu - offset)/s,
/// s2 -> s2/s^2); under constrained abilities the implied Normal(0, 1) is
/// archived as mu_eta / sigma2_eta in base units.
inline SampleArchive postprocess_archive(const SampleArchive& in) {
  const auto& meta = in.meta;
  const std::size_t I = meta.n_items, N = meta.n_individuals;
  const bool si = meta.parameterization == "SI";
  const bool disc = has_discrimination(meta.strategy.kind);
  const bool guess = has_guessing(meta.strategy.kind);
  const auto lam_c = in.indexed_columns("lambda");
  const auto loc_c = in.indexed_columns(si ? "gamma" : "beta");
  const auto guess_c = in.indexed_columns("guess");
  const auto eta_c = in.indexed_columns("eta");
  if (loc_c.size() != I || eta_c.size() != N || (disc && lam_c.size() != I) || (guess && guess_c.size() != I))
    throw std::invalid_argument("postprocess: archive columns do not match its metadata");
  const auto mu_c = in.find("mu_eta");
  const auto s2_c = in.find("sigma2_eta");
  const auto alpha_c = in.find("alpha");
  const auto k_c = in.find("K");
  const auto ll_c = in.find("log_likelihood");
  const bool param = meta.strategy.ability_model == AbilityModel::Parametric;

  SampleArchive out;
  out.meta = meta;
  out.meta.parameterization = "base";
  if (disc) for (std::size_t i = 0; i < I; ++i) out.columns.push_back(indexed_name("lambda", i));
  for (std::size_t i = 0; i < I; ++i) out.columns.push_back(indexed_name("beta", i));
  if (guess) for (std::size_t i = 0; i < I; ++i) out.columns.push_back(indexed_name("guess", i));
  for (std::size_t j = 0; j < N; ++j) out.columns.push_back(indexed_name("eta", j));
  if (param) {
    out.columns.push_back("mu_eta");
    out.columns.push_back("sigma2_eta");
  } else {
    out.columns.push_back("alpha");
    out.columns.push_back("K");
  }
  if (ll_c) out.columns.push_back("log_likelihood");

  const std::size_t T = in.n_draws();
  out.values.reserve(T * out.columns.size());
  std::vector<double> lam(I, 1.0), loc(I), eta(N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < I; ++i) {
      if (disc) lam[i] = in(t, lam_c[i]);
      loc[i] = in(t, loc_c[i]);
    }
    for (std::size_t j = 0; j < N; ++j) eta[j] = in(t, eta_c[j]);
    const auto r = si ? postprocess_si(lam, loc, eta) : postprocess_irt(lam, loc, eta);
    auto& v = out.values;
    if (disc) v.insert(v.end(), r.draw.discrimination.begin(), r.draw.discrimination.end());
    v.insert(v.end(), r.draw.difficulty.begin(), r.draw.difficulty.end());
    if (guess) for (std::size_t i = 0; i < I; ++i) v.push_back(in(t, guess_c[i]));
    v.insert(v.end(), r.draw.abilities.begin(), r.draw.abilities.end());
    if (param) {
      const double mu = mu_c ? in(t, *mu_c) : 0.0;
      const double s2 = s2_c ? in(t, *s2_c) : 1.0;
      v.push_back(transform_ability(mu, r.record));
      v.push_back(s2 / (r.record.scale * r.record.scale));
    } else {
      v.push_back(alpha_c ? in(t, *alpha_c) : 0.0);
      v.push_back(k_c ? in(t, *k_c) : 0.0);
    }
    if (ll_c) v.push_back(in(t, *ll_c));
    out.transforms.push_back(r.record);
  }
  if (in.has_clusters()) {
    out.labels = in.labels;
    out.counts = in.counts;
    out.atoms = in.atoms;
    for (std::size_t t = 0; t < T; ++t) {
      for (auto& a : out.atoms[t]) a = transform_atom(a, out.transforms[t]);
    }
  }
  return out;
}

}  // namespace semirt
