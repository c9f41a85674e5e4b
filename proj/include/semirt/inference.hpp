#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semirt/archive.hpp"
#include "semirt/base_measure.hpp"
#include "semirt/identifiability.hpp"
#include "semirt/math.hpp"
#include "semirt/model.hpp"
#include "semirt/rng.hpp"

namespace semirt {

/// Posterior mean density on a grid with pointwise 95% bands.
struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("grid needs at least two points and hi > lo");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

/// Posterior mean of every column named prefix[1..].
inline std::vector<double> posterior_means(const SampleArchive& a, const std::string& prefix) {
  const auto cols = a.indexed_columns(prefix);
  std::vector<double> out(cols.size(), 0.0);
  const std::size_t T = a.n_draws();
  if (T == 0) throw std::invalid_argument("posterior_means: empty archive");
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < cols.size(); ++k) out[k] += a(t, cols[k]);
  }
  for (auto& x : out) x /= static_cast<double>(T);
  return out;
}

/// 512 points over [min - 2, max + 2] of the posterior-mean abilities.
inline std::vector<double> default_density_grid(const SampleArchive& a, std::size_t n_points = 512) {
  const auto m = posterior_means(a, "eta");
  if (m.empty()) throw std::invalid_argument("archive has no ability columns");
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  return linear_grid(*lo - 2.0, *hi + 2.0, n_points);
}

namespace detail {

// Summarizes draw-major curves (T x G) into mean and 2.5/97.5% bands.
inline DensityEstimate summarize_curves(std::vector<double> grid, const std::vector<double>& curves, std::size_t T) {
  const std::size_t G = grid.size();
  DensityEstimate d{std::move(grid), std::vector<double>(G, 0.0), std::vector<double>(G), std::vector<double>(G)};
  std::vector<double> col(T);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t t = 0; t < T; ++t) col[t] = curves[t * G + g];
    double s = 0.0;
    for (double x : col) s += x;
    d.mean[g] = s / static_cast<double>(T);
    std::sort(col.begin(), col.end());
    d.lower[g] = math::sorted_quantile(col, 0.025);
    d.upper[g] = math::sorted_quantile(col, 0.975);
  }
  return d;
}

}  // namespace detail

/// Mean over draws of Normal(x; mu_t, s2_t).
inline DensityEstimate parametric_density_estimate(std::span<const double> mu, std::span<const double> sigma2,
                                                   std::vector<double> grid) {
  if (mu.empty()) throw std::invalid_argument("parametric_density_estimate: empty archive");
  if (mu.size() != sigma2.size()) throw std::invalid_argument("parametric_density_estimate: draw counts differ");
  const std::size_t T = mu.size(), G = grid.size();
  std::vector<double> curves(T * G);
  for (std::size_t t = 0; t < T; ++t) {
    if (!(sigma2[t] > 0.0)) throw std::invalid_argument("parametric_density_estimate: variance must be positive");
    for (std::size_t g = 0; g < G; ++g) curves[t * G + g] = math::normal_pdf(grid[g], mu[t], sigma2[t]);
  }
  return detail::summarize_curves(std::move(grid), curves, T);
}

inline DensityEstimate parametric_density_estimate(const SampleArchive& a, std::vector<double> grid) {
  return parametric_density_estimate(a.column("mu_eta"), a.column("sigma2_eta"), std::move(grid));
}

/// Conditional predictive density of one CRP draw:
///   sum_k n_k/(alpha+N) Normal(x; theta_k) + alpha/(alpha+N) Normal(x; fresh).
inline std::vector<double> crp_predictive_density(std::span<const int> counts, std::span<const Atom> atoms, double alpha,
                                                  const Atom& fresh, std::span<const double> grid) {
  if (counts.size() != atoms.size() || counts.empty()) throw std::invalid_argument("crp density: occupancy/label inconsistency");
  double n = 0.0;
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("crp density: occupancy/label inconsistency");
    n += c;
  }
  const double denom = alpha + n;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double v = alpha / denom * math::normal_pdf(grid[g], fresh.mean, fresh.variance);
    for (std::size_t k = 0; k < atoms.size(); ++k) v += counts[k] / denom * math::normal_pdf(grid[g], atoms[k].mean, atoms[k].variance);
    out[g] = v;
  }
  return out;
}

/// Mean of the per-draw CRP predictive densities. The fresh atom of each
/// draw comes from G0 on the sampling scale and is mapped through the draw's
/// transform record when the archive has been post-processed.
inline DensityEstimate crp_predictive_density_estimate(const SampleArchive& a, std::vector<double> grid, Rng& rng) {
  if (!a.has_clusters()) throw std::invalid_argument("crp density: archive has no clustering draws");
  const std::size_t T = a.n_draws(), G = grid.size();
  if (a.labels.size() != T || a.atoms.size() != T || a.counts.size() != T)
    throw std::invalid_argument("crp density: occupancy/label inconsistency");
  const BaseMeasure g0(a.meta.priors.abilities.base_measure);
  const auto alpha_c = a.index_of("alpha");
  std::vector<double> curves(T * G);
  for (std::size_t t = 0; t < T; ++t) {
    Atom fresh = g0.draw(rng);
    if (!a.transforms.empty()) fresh = transform_atom(fresh, a.transforms[t]);
    const auto c = crp_predictive_density(a.counts[t], a.atoms[t], a(t, alpha_c), fresh, grid);
    std::copy(c.begin(), c.end(), curves.begin() + static_cast<std::ptrdiff_t>(t * G));
  }
  return detail::summarize_curves(std::move(grid), curves, T);
}

// ---------------------------------------------------------------------------
// DP measure samples

struct MeasureSample {
  std::vector<double> weights;
  std::vector<Atom> atoms;

  std::size_t truncation() const { return weights.size(); }
  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Draw of G | clustering. Uses F = p0 F0 + sum_k p_k delta(theta_k) with
/// (p0, p_1..p_K) ~ Dirichlet(alpha, n_1..n_K) and F0 ~ DP(alpha, G0); F0 is
/// stick-broken until the unassigned mass p0 * remainder drops below eps.
/// `fresh_map` is applied to atoms drawn from G0 (identity by default).
inline MeasureSample sample_dp_measure(std::span<const int> counts, std::span<const Atom> atoms, double alpha,
                                       const BaseMeasure& g0, double eps_trunc, Rng& rng,
                                       const TransformRecord& fresh_map = {}) {
  if (!(eps_trunc > 0.0) || !(eps_trunc < 1.0)) throw std::invalid_argument("sample_dp_measure: eps_trunc must lie in (0, 1)");
  if (counts.size() != atoms.size() || counts.empty()) throw std::invalid_argument("sample_dp_measure: invalid clustering");
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_dp_measure: alpha must be positive");
  MeasureSample m;
  std::vector<double> g(counts.size() + 1);
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 1) throw std::invalid_argument("sample_dp_measure: invalid clustering");
    g[k] = rng.gamma(counts[k], 1.0);
    total += g[k];
  }
  g.back() = rng.gamma(alpha, 1.0);
  total += g.back();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    m.weights.push_back(g[k] / total);
    m.atoms.push_back(atoms[k]);
  }
  const double p0 = g.back() / total;
  double remainder = 1.0;
  while (p0 * remainder >= eps_trunc) {
    const double v = rng.beta(1.0, alpha);
    m.weights.push_back(p0 * remainder * v);
    m.atoms.push_back(transform_atom(g0.draw(rng), fresh_map));
    remainder *= 1.0 - v;
  }
  return m;
}

/// sum_l w_l Phi((eta - mu_l) / sigma_l).
inline double measure_cdf(const MeasureSample& m, double eta) {
  double p = 0.0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) p += m.weights[l] * math::normal_cdf(eta, m.atoms[l].mean, std::sqrt(m.atoms[l].variance));
  return std::clamp(p, 0.0, 1.0);
}

struct PercentileEstimate {
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

namespace detail {

inline PercentileEstimate summarize_percentiles(const std::vector<double>& p, std::size_t T, std::size_t N) {
  PercentileEstimate out{std::vector<double>(N), std::vector<double>(N), std::vector<double>(N)};
  std::vector<double> col(T);
  for (std::size_t j = 0; j < N; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      col[t] = p[t * N + j];
      s += col[t];
    }
    out.mean[j] = s / static_cast<double>(T);
    std::sort(col.begin(), col.end());
    out.lower[j] = math::sorted_quantile(col, 0.025);
    out.upper[j] = math::sorted_quantile(col, 0.975);
  }
  return out;
}

}  // namespace detail

/// Semiparametric percentiles; `eta` is draw-major (T x N).
inline PercentileEstimate percentile_estimates(std::span<const double> eta, std::size_t n_individuals,
                                               std::span<const MeasureSample> measures) {
  const std::size_t T = measures.size();
  if (T == 0 || eta.size() != T * n_individuals) throw std::invalid_argument("percentile_estimates: mismatched draw counts");
  std::vector<double> p(T * n_individuals);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < n_individuals; ++j) p[t * n_individuals + j] = measure_cdf(measures[t], eta[t * n_individuals + j]);
  }
  return detail::summarize_percentiles(p, T, n_individuals);
}

/// Parametric percentiles Phi((eta - mu_t) / sigma_t).
inline PercentileEstimate percentile_estimates(std::span<const double> eta, std::size_t n_individuals,
                                               std::span<const double> mu, std::span<const double> sigma2) {
  const std::size_t T = mu.size();
  if (T == 0 || sigma2.size() != T || eta.size() != T * n_individuals)
    throw std::invalid_argument("percentile_estimates: mismatched draw counts");
  std::vector<double> p(T * n_individuals);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < n_individuals; ++j) p[t * n_individuals + j] = math::normal_cdf(eta[t * n_individuals + j], mu[t], std::sqrt(sigma2[t]));
  }
  return detail::summarize_percentiles(p, T, n_individuals);
}

/// Archive front end: measure samples for semiparametric archives,
/// (mu_eta, sigma2_eta) otherwise.
inline PercentileEstimate percentile_estimates(const SampleArchive& a, double eps_trunc, Rng& rng) {
  const auto eta_c = a.indexed_columns("eta");
  const std::size_t T = a.n_draws(), N = eta_c.size();
  std::vector<double> eta(T * N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) eta[t * N + j] = a(t, eta_c[j]);
  }
  if (!a.has_clusters()) return percentile_estimates(eta, N, a.column("mu_eta"), a.column("sigma2_eta"));
  const BaseMeasure g0(a.meta.priors.abilities.base_measure);
  const auto alpha_c = a.index_of("alpha");
  std::vector<MeasureSample> ms;
  ms.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const TransformRecord r = a.transforms.empty() ? TransformRecord{} : a.transforms[t];
    ms.push_back(sample_dp_measure(a.counts[t], a.atoms[t], a(t, alpha_c), g0, eps_trunc, rng, r));
  }
  return percentile_estimates(eta, N, ms);
}

// ---------------------------------------------------------------------------
// WAIC

struct WaicResult {
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
};

/// Streaming WAIC over draws: per observation a running log-sum-exp and a
/// Welford variance, so the T x n matrix is never stored.
class WaicAccumulator {
 public:
  explicit WaicAccumulator(std::size_t n_obs)
      : max_(n_obs, -std::numeric_limits<double>::infinity()), sum_(n_obs, 0.0), mean_(n_obs, 0.0), m2_(n_obs, 0.0) {}

  void add_draw(std::span<const double> ll) {
    if (ll.size() != max_.size()) throw std::invalid_argument("waic: pointwise vector has the wrong length");
    ++draws_;
    for (std::size_t k = 0; k < ll.size(); ++k) {
      const double x = ll[k];
      if (!std::isfinite(x)) throw std::invalid_argument("waic: log-densities must be finite");
      if (x > max_[k]) {
        sum_[k] = sum_[k] * std::exp(max_[k] - x) + 1.0;
        max_[k] = x;
      } else {
        sum_[k] += std::exp(x - max_[k]);
      }
      const double d = x - mean_[k];
      mean_[k] += d / static_cast<double>(draws_);
      m2_[k] += d * (x - mean_[k]);
    }
  }

  std::size_t draws() const { return draws_; }

  WaicResult result() const {
    if (draws_ < 2) throw std::invalid_argument("waic: at least two draws are needed for the variance term");
    WaicResult r;
    const double log_t = std::log(static_cast<double>(draws_));
    for (std::size_t k = 0; k < max_.size(); ++k) {
      r.lppd += max_[k] + std::log(sum_[k]) - log_t;
      r.p_waic += m2_[k] / static_cast<double>(draws_ - 1);
    }
    r.waic = -2.0 * (r.lppd - r.p_waic);
    return r;
  }

 private:
  std::vector<double> max_, sum_, mean_, m2_;
  std::size_t draws_ = 0;
};

/// WAIC from a draw-major T x n matrix of pointwise log-densities.
inline WaicResult waic(std::span<const double> ll, std::size_t n_obs) {
  if (n_obs == 0 || ll.size() % n_obs != 0) throw std::invalid_argument("waic: matrix shape mismatch");
  WaicAccumulator acc(n_obs);
  for (std::size_t t = 0; t < ll.size() / n_obs; ++t) acc.add_draw(ll.subspan(t * n_obs, n_obs));
  return acc.result();
}

/// Conditional (given abilities) WAIC of an archive against its data.
/// Works on IRT, SI and base archives.
inline WaicResult waic(const SampleArchive& a, const ResponseMatrix& data) {
  const bool si = a.meta.parameterization == "SI";
  const ModelKind kind = a.meta.strategy.kind;
  const auto lam_c = a.indexed_columns("lambda");
  const auto loc_c = a.indexed_columns(si ? "gamma" : "beta");
  const auto guess_c = a.indexed_columns("guess");
  const auto eta_c = a.indexed_columns("eta");
  const std::size_t I = data.n_items(), N = data.n_individuals();
  if (loc_c.size() != I || eta_c.size() != N) throw std::invalid_argument("waic: archive does not match the data");
  const bool disc = has_discrimination(kind), guess = has_guessing(kind);
  WaicAccumulator acc(data.n_observed());
  std::vector<double> ll;
  ll.reserve(data.n_observed());
  for (std::size_t t = 0; t < a.n_draws(); ++t) {
    ll.clear();
    for (std::size_t j = 0; j < N; ++j) {
      const double eta = a(t, eta_c[j]);
      for (std::size_t i = 0; i < I; ++i) {
        if (data.missing(j, i)) continue;
        const double lam = disc ? a(t, lam_c[i]) : 1.0;
        const double loc = a(t, loc_c[i]);
        const double x = si ? lam * eta + loc : lam * (eta - loc);
        ll.push_back(response_log_prob(data(j, i), x, guess ? a(t, guess_c[i]) : 0.0));
      }
    }
    acc.add_draw(ll);
  }
  return acc.result();
}

// ---------------------------------------------------------------------------
// Point-estimate error

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

inline ErrorMetrics error_metrics(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || estimate.empty()) throw std::invalid_argument("error_metrics: length mismatch");
  ErrorMetrics m;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double d = estimate[k] - truth[k];
    m.mae += std::abs(d);
    m.mse += d * d;
  }
  m.mae /= static_cast<double>(estimate.size());
  m.mse /= static_cast<double>(estimate.size());
  return m;
}

/// Gaussian KDE of point estimates with Silverman's bandwidth. Only a
/// comparison curve: it ignores posterior uncertainty.
inline std::vector<double> kde_curve(std::span<const double> points, std::span<const double> grid) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("kde_curve: need at least two points");
  double m = 0.0;
  for (double x : points) m += x;
  m /= static_cast<double>(n);
  double v = 0.0;
  for (double x : points) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / static_cast<double>(n - 1));
  std::vector<double> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = math::sorted_quantile(sorted, 0.75) - math::sorted_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (double x : points) out[g] += math::normal_pdf(grid[g], x, h * h);
    out[g] /= static_cast<double>(n);
  }
  return out;
}

/// Number of strict local maxima of a curve and the depth of the deepest
/// trough between the two highest peaks, as a fraction of the lower peak.
struct ModeSummary {
  std::size_t n_modes = 0;
  double trough_depth = 0.0;
};

inline ModeSummary mode_summary(std::span<const double> curve) {
  ModeSummary s;
  std::vector<std::size_t> peaks;
  for (std::size_t k = 1; k + 1 < curve.size(); ++k) {
    if (curve[k] > curve[k - 1] && curve[k] >= curve[k + 1]) peaks.push_back(k);
  }
  s.n_modes = peaks.size();
  if (peaks.size() < 2) return s;
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return curve[a] > curve[b]; });
  const std::size_t lo = std::min(peaks[0], peaks[1]), hi = std::max(peaks[0], peaks[1]);
  const double trough = *std::min_element(curve.begin() + static_cast<std::ptrdiff_t>(lo), curve.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  const double lower_peak = std::min(curve[lo], curve[hi]);
  s.trough_depth = 1.0 - trough / lower_peak;
  return s;
}

}  // namespace semirt
