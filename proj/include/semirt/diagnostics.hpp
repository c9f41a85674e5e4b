#pragma once

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semirt/archive.hpp"

namespace semirt {

struct UnivariateEss {
  double value = 0.0;
  /// Set for a zero-variance chain, whose ESS is reported as n.
  bool constant = false;
};

/// Batch-means ESS with batch size floor(sqrt(n)):
/// n * sample variance / (b * variance of batch means).
inline UnivariateEss univariate_ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 100) throw std::invalid_argument("univariate_ess: need at least 100 draws");
  const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t a = n / b;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (!(var > 0.0)) return {static_cast<double>(n), true};
  // Batch means are centred on the mean of the draws they cover.
  double used_mean = 0.0;
  for (std::size_t k = 0; k < a * b; ++k) used_mean += x[k];
  used_mean /= static_cast<double>(a * b);
  double s = 0.0;
  for (std::size_t k = 0; k < a; ++k) {
    double bm = 0.0;
    for (std::size_t l = 0; l < b; ++l) bm += x[k * b + l];
    bm /= static_cast<double>(b);
    s += (bm - used_mean) * (bm - used_mean);
  }
  const double sigma2 = static_cast<double>(b) * s / static_cast<double>(a - 1);
  return {static_cast<double>(n) * var / sigma2, false};
}

struct MultivariateEss {
  double value = 0.0;
  std::vector<std::size_t> kept;
  /// Dropped column index and reason ("constant" or "collinear").
  std::vector<std::pair<std::size_t, std::string>> dropped;
};

/// Multivariate batch-means ESS: n (det Lambda / det Sigma)^(1/p) with
/// Lambda the sample covariance and Sigma the batch-means covariance, via
/// log-determinants. Constant and collinear columns are dropped first.
inline MultivariateEss multivariate_ess(const Eigen::MatrixXd& draws) {
  const auto n = static_cast<std::size_t>(draws.rows());
  if (n < 100) throw std::invalid_argument("multivariate_ess: need at least 100 draws");
  if (draws.cols() == 0) throw std::invalid_argument("multivariate_ess: no columns");

  MultivariateEss out;
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const Eigen::MatrixXd cov_all = centered.transpose() * centered / static_cast<double>(n - 1);

  // Greedy pivot-free Cholesky on the correlation scale: a column whose
  // residual variance given the kept ones is negligible is collinear.
  const auto p_all = static_cast<std::size_t>(draws.cols());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p_all), static_cast<Eigen::Index>(p_all));
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < p_all; ++c) {
    const double vc = cov_all(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
    if (!(vc > 0.0) || vc < 1e-300) {
      out.dropped.push_back({c, "constant"});
      continue;
    }
    const auto m = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd row(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto ck = static_cast<Eigen::Index>(kept[static_cast<std::size_t>(k)]);
      double v = cov_all(static_cast<Eigen::Index>(c), ck) / std::sqrt(vc * cov_all(ck, ck));
      for (Eigen::Index l = 0; l < k; ++l) v -= row(l) * L(k, l);
      row(k) = v / L(k, k);
    }
    const double resid = 1.0 - row.squaredNorm();
    if (resid < 1e-10) {
      out.dropped.push_back({c, "collinear"});
      continue;
    }
    for (Eigen::Index k = 0; k < m; ++k) L(m, k) = row(k);
    L(m, m) = std::sqrt(resid);
    kept.push_back(c);
  }
  const std::size_t p = kept.size();
  if (p == 0) throw std::invalid_argument("multivariate_ess: every column is constant");

  const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t a = n / b;
  if (a <= p) throw std::invalid_argument("multivariate_ess: number of batches must exceed the number of parameters");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < p; ++k) X.col(static_cast<Eigen::Index>(k)) = draws.col(static_cast<Eigen::Index>(kept[k]));
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - mu;
  const Eigen::MatrixXd lambda = Xc.transpose() * Xc / static_cast<double>(n - 1);

  const Eigen::RowVectorXd used_mean = X.topRows(static_cast<Eigen::Index>(a * b)).colwise().mean();
  Eigen::MatrixXd bm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < a; ++k) {
    bm.row(static_cast<Eigen::Index>(k)) =
        X.middleRows(static_cast<Eigen::Index>(k * b), static_cast<Eigen::Index>(b)).colwise().mean() - used_mean;
  }
  const Eigen::MatrixXd sigma = static_cast<double>(b) * bm.transpose() * bm / static_cast<double>(a - 1);

  Eigen::LLT<Eigen::MatrixXd> llt_l(lambda), llt_s(sigma);
  if (llt_l.info() != Eigen::Success || llt_s.info() != Eigen::Success)
    throw std::runtime_error("multivariate_ess: covariance estimate is not positive definite");
  const double logdet_l = 2.0 * llt_l.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_s = 2.0 * llt_s.matrixL().toDenseMatrix().diagonal().array().log().sum();
  out.value = static_cast<double>(n) * std::exp((logdet_l - logdet_s) / static_cast<double>(p));
  out.kept = std::move(kept);
  return out;
}

struct EfficiencyReport {
  std::string strategy;
  std::size_t n_draws = 0;
  std::vector<std::string> parameters;
  double mess = 0.0;
  std::map<std::string, double> univariate;
  std::vector<std::string> dropped;
  double sampling_seconds = 0.0;
  double total_seconds = 0.0;
  double mess_per_sampling_second = 0.0;
  double mess_per_total_second = 0.0;
};

/// Item-parameter columns plus an evenly spaced subset of abilities, capped
/// so the parameter count stays at most half the number of batches.
inline std::vector<std::string> default_selection(const SampleArchive& a) {
  std::vector<std::string> sel;
  for (const char* prefix : {"lambda", "beta", "gamma", "guess"}) {
    for (auto c : a.indexed_columns(prefix)) sel.push_back(a.columns[c]);
  }
  const auto eta = a.indexed_columns("eta");
  const std::size_t n = a.n_draws();
  if (n < 100) throw std::invalid_argument("efficiency report: need at least 100 draws");
  const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t cap = (n / b) / 2;
  const std::size_t room = cap > sel.size() ? cap - sel.size() : 0;
  const std::size_t m = std::min(room, eta.size());
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = (m == eta.size()) ? k : (k * eta.size()) / m;
    sel.push_back(a.columns[eta[j]]);
  }
  return sel;
}

inline EfficiencyReport efficiency_report(const SampleArchive& a, const std::vector<std::string>& selection) {
  if (!(a.meta.sampling_seconds > 0.0) || !(a.meta.total_seconds() > 0.0))
    throw std::invalid_argument("efficiency report: archive has no timings");
  if (selection.empty()) throw std::invalid_argument("efficiency report: empty parameter selection");
  EfficiencyReport r;
  r.strategy = a.meta.strategy.name();
  r.n_draws = a.n_draws();
  r.parameters = selection;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(a.n_draws()), static_cast<Eigen::Index>(selection.size()));
  for (std::size_t k = 0; k < selection.size(); ++k) {
    const auto col = a.column(selection[k]);
    for (std::size_t t = 0; t < col.size(); ++t) X(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = col[t];
    r.univariate[selection[k]] = univariate_ess(col).value;
  }
  const auto m = multivariate_ess(X);
  r.mess = m.value;
  for (const auto& [c, why] : m.dropped) r.dropped.push_back(selection[c] + " (" + why + ")");
  r.sampling_seconds = a.meta.sampling_seconds;
  r.total_seconds = a.meta.total_seconds();
  r.mess_per_sampling_second = r.mess / r.sampling_seconds;
  r.mess_per_total_second = r.mess / r.total_seconds;
  return r;
}

inline EfficiencyReport efficiency_report(const SampleArchive& a) { return efficiency_report(a, default_selection(a)); }

inline nlohmann::json to_json(const EfficiencyReport& r) {
  return {{"strategy", r.strategy},
          {"n_draws", r.n_draws},
          {"n_parameters", r.parameters.size()},
          {"mess", r.mess},
          {"univariate_ess", r.univariate},
          {"dropped", r.dropped},
          {"sampling_seconds", r.sampling_seconds},
          {"total_seconds", r.total_seconds},
          {"mess_per_sampling_second", r.mess_per_sampling_second},
          {"mess_per_total_second", r.mess_per_total_second}};
}

}  // namespace semirt
