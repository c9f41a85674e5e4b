#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "semirt/conjugate.hpp"
#include "semirt/math.hpp"
#include "semirt/rng.hpp"

namespace semirt {

/// Parameters (mu, sigma2) of one normal mixture component.
struct Atom {
  double mean = 0.0;
  double variance = 1.0;
};

/// DP base measure G0 = Normal(mean, mean_variance) x InvGamma(shape, scale).
///
/// The two factors are independent, so the prior predictive of a single
/// ability has no closed form. It is evaluated by trapezoid quadrature over
/// u = log(sigma2), which converges geometrically for this integrand, and
/// tabulated for cubic Hermite lookup. Posterior draws of an atom given one
/// ability are exact (cell-wise rejection, see draw_posterior).
class BaseMeasure {
 public:
  explicit BaseMeasure(NormalInvGammaPrior prior = {}) : prior_(prior) {
    prior_.validate();
    u_mode_ = std::log(prior_.scale / prior_.shape);
    build_table();
    build_cells();
  }

  const NormalInvGammaPrior& prior() const { return prior_; }

  Atom draw(Rng& rng) const {
    return {rng.normal(prior_.mean, std::sqrt(prior_.mean_variance)), rng.inv_gamma(prior_.shape, prior_.scale)};
  }

  /// log of  integral Normal(eta; mu, s2) dG0(mu, s2).
  double log_marginal(double eta) const {
    const double d = std::abs(eta - prior_.mean);
    if (d >= kTableMax) return log_marginal_exact(eta);
    const auto k = static_cast<std::size_t>(d / kTableStep);
    const double t = (d - static_cast<double>(k) * kTableStep) / kTableStep;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * table_value_[k] + (t3 - 2 * t2 + t) * kTableStep * table_slope_[k] +
           (-2 * t3 + 3 * t2) * table_value_[k + 1] + (t3 - t2) * kTableStep * table_slope_[k + 1];
  }

  double log_marginal_exact(double eta) const { return quadrature(std::abs(eta - prior_.mean)).first; }

  /// Exact draw from p(mu, s2 | eta) for a component holding one ability.
  ///
  /// s2 | eta has density  IG(s2) * N(eta; mean, mean_variance + s2). The
  /// second factor is unimodal in s2, so on each cell of a fixed log-s2
  /// partition it is bounded by its value at the clamped mode. Cells are
  /// chosen by (IG mass x bound), s2 is drawn from the truncated IG by
  /// inverse CDF, then accepted against the bound. mu | s2, eta is normal.
  Atom draw_posterior(double eta, Rng& rng) const {
    const double d2 = (eta - prior_.mean) * (eta - prior_.mean);
    const double v0 = prior_.mean_variance;
    std::vector<double> log_w(cells_.size());
    std::vector<double> bound(cells_.size());
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const double w_lo = v0 + cells_[c].v_lo;
      const double w_hi = v0 + cells_[c].v_hi;
      const double w_star = std::clamp(d2, w_lo, w_hi);
      bound[c] = -0.5 * std::log(w_star) - 0.5 * d2 / w_star;
      log_w[c] = cells_[c].log_mass + bound[c];
      max_lw = std::max(max_lw, log_w[c]);
    }
    std::vector<double> weights(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) weights[c] = std::exp(log_w[c] - max_lw);

    double s2 = 1.0;
    for (int attempt = 0;; ++attempt) {
      const std::size_t c = rng.categorical(weights);
      s2 = draw_truncated_inv_gamma(cells_[c], rng);
      const double w = v0 + s2;
      const double log_ratio = -0.5 * std::log(w) - 0.5 * d2 / w - bound[c];
      if (std::log(rng.uniform()) < log_ratio) break;
      if (attempt > 1000000) throw std::runtime_error("base measure posterior draw did not terminate");
    }
    const double precision = 1.0 / v0 + 1.0 / s2;
    const double m = (prior_.mean / v0 + eta / s2) / precision;
    return {rng.normal(m, std::sqrt(1.0 / precision)), s2};
  }

 private:
  static constexpr double kTableStep = 0.02;
  static constexpr double kTableMax = 20.0;
  static constexpr double kQuadStep = 0.1;

  struct Cell {
    double v_lo;
    double v_hi;
    double log_mass;
  };

  // Returns (log m, d/dd log m) at distance d from the prior mean.
  std::pair<double, double> quadrature(double d) const {
    const double v0 = prior_.mean_variance;
    const double a = prior_.shape, b = prior_.scale;
    const double lo = u_mode_ - 8.0;
    const double tail = 40.0 / (a + 0.5);
    const double hi = std::max(u_mode_, std::log(std::max(d * d, 1e-300))) + tail;
    const double log_norm = a * std::log(b) - std::lgamma(a) + std::log(kQuadStep);
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    std::vector<double> slopes;
    for (double u = lo; u <= hi; u += kQuadStep) {
      const double w = v0 + std::exp(u);
      const double t = log_norm - a * u - b * std::exp(-u) + math::normal_logpdf(d, 0.0, w);
      terms.push_back(t);
      slopes.push_back(-d / w);
      m = std::max(m, t);
    }
    double s = 0.0, ds = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const double e = std::exp(terms[k] - m);
      s += e;
      ds += e * slopes[k];
    }
    return {m + std::log(s), ds / s};
  }

  void build_table() {
    const auto n = static_cast<std::size_t>(kTableMax / kTableStep) + 2;
    table_value_.resize(n);
    table_slope_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto [v, s] = quadrature(static_cast<double>(k) * kTableStep);
      table_value_[k] = v;
      table_slope_[k] = s;
    }
  }

  // X = scale / s2 ~ Gamma(shape, 1). Masses use whichever incomplete-gamma
  // tail is small at the cell to keep relative precision.
  void build_cells() {
    namespace bm = boost::math;
    const double a = prior_.shape, b = prior_.scale;
    const double step = 0.1;
    const double u_lo = u_mode_ - 12.0;
    const int n_inner = 420;
    std::vector<double> edges{0.0};
    for (int k = 0; k <= n_inner; ++k) edges.push_back(std::exp(u_lo + step * k));
    edges.push_back(std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
      const double x_hi = edges[c] > 0.0 ? b / edges[c] : std::numeric_limits<double>::infinity();
      const double x_lo = std::isinf(edges[c + 1]) ? 0.0 : b / edges[c + 1];
      double mass;
      if (x_lo >= a) {
        mass = bm::gamma_q(a, x_lo) - (std::isinf(x_hi) ? 0.0 : bm::gamma_q(a, x_hi));
      } else {
        mass = (std::isinf(x_hi) ? 1.0 : bm::gamma_p(a, x_hi)) - bm::gamma_p(a, x_lo);
      }
      cells_.push_back({edges[c], edges[c + 1], mass > 0.0 ? std::log(mass) : -std::numeric_limits<double>::infinity()});
    }
  }

  double draw_truncated_inv_gamma(const Cell& cell, Rng& rng) const {
    namespace bm = boost::math;
    const double a = prior_.shape, b = prior_.scale;
    const double x_hi = cell.v_lo > 0.0 ? b / cell.v_lo : std::numeric_limits<double>::infinity();
    const double x_lo = std::isinf(cell.v_hi) ? 0.0 : b / cell.v_hi;
    double x;
    if (x_lo >= a) {
      const double q_hi = bm::gamma_q(a, x_lo);
      const double q_lo = std::isinf(x_hi) ? 0.0 : bm::gamma_q(a, x_hi);
      double q = q_lo + (q_hi - q_lo) * rng.uniform();
      q = std::clamp(q, std::numeric_limits<double>::min(), 1.0 - 1e-16);
      x = bm::gamma_q_inv(a, q);
    } else {
      const double p_lo = bm::gamma_p(a, x_lo);
      const double p_hi = std::isinf(x_hi) ? 1.0 : bm::gamma_p(a, x_hi);
      double p = p_lo + (p_hi - p_lo) * rng.uniform();
      p = std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 1e-16);
      x = bm::gamma_p_inv(a, p);
    }
    x = std::clamp(x, std::max(x_lo, std::numeric_limits<double>::min()), x_hi);
    return b / x;
  }

  NormalInvGammaPrior prior_;
  double u_mode_ = 0.0;
  std::vector<double> table_value_;
  std::vector<double> table_slope_;
  std::vector<Cell> cells_;
};

}  // namespace semirt
