#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semirt/adaptive_mh.hpp"
#include "semirt/archive.hpp"
#include "semirt/base_measure.hpp"
#include "semirt/conjugate.hpp"
#include "semirt/crp.hpp"
#include "semirt/math.hpp"
#include "semirt/model.hpp"
#include "semirt/priors.hpp"
#include "semirt/rng.hpp"
#include "semirt/strategy.hpp"

namespace semirt {

/// Latent quantities of one chain. Under ConstrainedItems, `log_lambda` and
/// `location` hold the auxiliary (unconstrained) parameters; the identified
/// values are their centered versions. `location` is beta (IRT) or gamma (SI).
struct ChainState {
  std::vector<double> log_lambda;
  std::vector<double> location;
  std::vector<double> guessing;
  std::vector<double> eta;
  double mu = 0.0;
  double sigma2 = 1.0;
  CRPState crp;
  std::uint64_t iteration = 0;
};

struct RunOptions {
  std::size_t n_iter = 10000;
  std::size_t n_burnin = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  /// Structural CRP checks after every sweep.
  bool check_invariants = false;
};

/// Joint random-walk move on (log lambda_i, gamma_i) that keeps the logit at
/// the current mean ability fixed: gamma* = gamma + eta_bar (lambda - lambda*).
/// The move is a shear with unit Jacobian on the (log lambda, gamma) scale
/// and its reverse uses the negated increment, so the ratio is the target
/// ratio alone.
template <class LogTarget>
std::pair<double, double> centered_pair_update(double log_lambda, double gamma, double eta_bar, LogTarget&& target,
                                               AdaptiveMHState& state, Rng& rng) {
  const double cur = target(log_lambda, gamma);
  if (!std::isfinite(cur)) throw std::domain_error("centered pair update: log density is not finite at the current value");
  const double ll_new = log_lambda + state.scale() * rng.normal();
  const double g_new = gamma + eta_bar * (std::exp(log_lambda) - std::exp(ll_new));
  const double prop = target(ll_new, g_new);
  const bool jump = std::log(rng.uniform()) < prop - cur;
  state.record(jump);
  return jump ? std::pair{ll_new, g_new} : std::pair{log_lambda, gamma};
}

/// One MCMC chain for a given strategy. Each sweep updates abilities, then
/// item parameters, then the ability model (labels, atoms, alpha).
class ChainSampler {
 public:
  ChainSampler(const ResponseMatrix& data, StrategyConfig strategy, PriorConfig priors, std::uint64_t seed)
      : data_(data),
        strategy_(strategy),
        priors_(priors),
        base_(priors.abilities.base_measure),
        rng_(Rng::substream(seed, "chain")) {
    strategy_.validate();
    priors_.validate();
    data_.validate();
    n_ = data_.n_individuals();
    n_items_ = data_.n_items();
    by_person_.resize(n_);
    by_item_.resize(n_items_);
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t i = 0; i < n_items_; ++i) {
        if (data_.missing(j, i)) continue;
        by_person_[j].push_back({static_cast<std::uint32_t>(i), data_(j, i)});
        by_item_[i].push_back({static_cast<std::uint32_t>(j), data_(j, i)});
      }
    }
    initialize();
  }

  const ChainState& state() const { return s_; }
  const StrategyConfig& strategy() const { return strategy_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& location() const { return loc_; }

  /// Complete-data log-likelihood at the current state.
  double log_likelihood() const {
    double total = 0.0;
    for (std::size_t i = 0; i < n_items_; ++i) total += item_log_lik(i, lambda_[i], loc_[i], guess(i));
    return total;
  }

  void sweep() {
    update_abilities();
    update_items();
    update_ability_model();
    ++s_.iteration;
    if (check_invariants_ && semiparametric()) s_.crp.check_invariants();
  }

  void set_check_invariants(bool on) { check_invariants_ = on; }

  void freeze_adaptation() {
    for (auto* group : {&eta_mh_, &loglam_mh_, &loc_mh_, &guess_mh_, &pair_mh_}) {
      for (auto& st : *group) st.freeze();
    }
  }

  std::map<std::string, double> acceptance_rates() const {
    std::map<std::string, double> out;
    auto avg = [](const std::vector<AdaptiveMHState>& v) {
      double s = 0.0;
      for (const auto& st : v) s += st.acceptance_rate();
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    out["abilities"] = avg(eta_mh_);
    if (has_discrimination(strategy_.kind) && strategy_.algorithm == Algorithm::MHConjugate) out["log_discrimination"] = avg(loglam_mh_);
    out[strategy_.parameterization == Parameterization::IRT ? "difficulty" : "intercept"] = avg(loc_mh_);
    if (strategy_.algorithm == Algorithm::Centered) out["centered_pair"] = avg(pair_mh_);
    if (has_guessing(strategy_.kind)) out["guessing"] = avg(guess_mh_);
    return out;
  }

  /// Names of the archived scalar columns, in storage order.
  std::vector<std::string> column_names() const {
    std::vector<std::string> cols;
    if (has_discrimination(strategy_.kind)) {
      for (std::size_t i = 0; i < n_items_; ++i) cols.push_back(indexed_name("lambda", i));
    }
    const char* loc = strategy_.parameterization == Parameterization::IRT ? "beta" : "gamma";
    for (std::size_t i = 0; i < n_items_; ++i) cols.push_back(indexed_name(loc, i));
    if (has_guessing(strategy_.kind)) {
      for (std::size_t i = 0; i < n_items_; ++i) cols.push_back(indexed_name("guess", i));
    }
    for (std::size_t j = 0; j < n_; ++j) cols.push_back(indexed_name("eta", j));
    if (strategy_.ability_model == AbilityModel::Parametric) {
      if (strategy_.constraint != ConstraintMode::ConstrainedAbilities) {
        cols.push_back("mu_eta");
        cols.push_back("sigma2_eta");
      }
    } else {
      cols.push_back("alpha");
      cols.push_back("K");
    }
    cols.push_back("log_likelihood");
    return cols;
  }

  /// Appends the current state as one draw.
  void record(SampleArchive& a) const {
    if (has_discrimination(strategy_.kind)) a.values.insert(a.values.end(), lambda_.begin(), lambda_.end());
    a.values.insert(a.values.end(), loc_.begin(), loc_.end());
    if (has_guessing(strategy_.kind)) a.values.insert(a.values.end(), s_.guessing.begin(), s_.guessing.end());
    a.values.insert(a.values.end(), s_.eta.begin(), s_.eta.end());
    if (strategy_.ability_model == AbilityModel::Parametric) {
      if (strategy_.constraint != ConstraintMode::ConstrainedAbilities) {
        a.values.push_back(s_.mu);
        a.values.push_back(s_.sigma2);
      }
    } else {
      a.values.push_back(s_.crp.alpha);
      a.values.push_back(static_cast<double>(s_.crp.n_clusters()));
      a.labels.push_back(s_.crp.labels);
      a.atoms.push_back(s_.crp.atoms);
      a.counts.push_back(s_.crp.counts);
    }
    a.values.push_back(log_likelihood());
  }

 private:
  struct Obs {
    std::uint32_t index;
    std::int8_t y;
  };

  bool semiparametric() const { return strategy_.ability_model == AbilityModel::Semiparametric; }
  bool constrained_items() const { return strategy_.constraint == ConstraintMode::ConstrainedItems; }
  bool irt() const { return strategy_.parameterization == Parameterization::IRT; }
  double guess(std::size_t i) const { return has_guessing(strategy_.kind) ? s_.guessing[i] : 0.0; }

  double logit(double lambda, double loc, double eta) const { return irt() ? lambda * (eta - loc) : lambda * eta + loc; }

  double item_log_lik(std::size_t i, double lambda, double loc, double g) const {
    double total = 0.0;
    for (const auto& o : by_item_[i]) total += response_log_prob(o.y, logit(lambda, loc, s_.eta[o.index]), g);
    return total;
  }

  double person_log_lik(std::size_t j, double eta) const {
    double total = 0.0;
    for (const auto& o : by_person_[j]) total += response_log_prob(o.y, logit(lambda_[o.index], loc_[o.index], eta), guess(o.index));
    return total;
  }

  double ability_log_prior(std::size_t j, double eta) const {
    if (strategy_.constraint == ConstraintMode::ConstrainedAbilities) return math::normal_logpdf(eta, 0.0, 1.0);
    if (semiparametric()) {
      const auto& a = s_.crp.atoms[static_cast<std::size_t>(s_.crp.labels[j])];
      return math::normal_logpdf(eta, a.mean, a.variance);
    }
    return math::normal_logpdf(eta, s_.mu, s_.sigma2);
  }

  double log_lambda_prior(double x) const {
    return math::normal_logpdf(x, priors_.items.log_discrimination_mean, priors_.items.log_discrimination_variance);
  }
  double location_prior(double x) const { return math::normal_logpdf(x, 0.0, priors_.items.location_variance(strategy_.parameterization)); }

  // Effective (identified) item parameters from the stored ones.
  void refresh_effective() {
    lambda_.assign(n_items_, 1.0);
    loc_ = s_.location;
    if (has_discrimination(strategy_.kind)) {
      const double m = constrained_items() ? mean(s_.log_lambda) : 0.0;
      for (std::size_t i = 0; i < n_items_; ++i) lambda_[i] = std::exp(s_.log_lambda[i] - m);
    }
    if (constrained_items()) {
      const double m = mean(s_.location);
      for (auto& x : loc_) x -= m;
    }
  }

  static double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

  void initialize() {
    s_.log_lambda.assign(n_items_, 0.0);
    s_.location.assign(n_items_, 0.0);
    if (has_guessing(strategy_.kind)) s_.guessing.assign(n_items_, priors_.items.guessing_a / (priors_.items.guessing_a + priors_.items.guessing_b));
    s_.eta.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      double score = 0.0;
      for (const auto& o : by_person_[j]) score += o.y;
      s_.eta[j] = math::logit((score + 0.5) / (static_cast<double>(by_person_[j].size()) + 1.0));
    }
    const double m = mean(s_.eta);
    double v = 0.0;
    for (double x : s_.eta) v += (x - m) * (x - m);
    v /= static_cast<double>(n_);
    const double sd = v > 0.0 ? std::sqrt(v) : 1.0;
    for (auto& x : s_.eta) x = (x - m) / sd;
    s_.mu = 0.0;
    s_.sigma2 = 1.0;
    if (semiparametric()) s_.crp = CRPState::single_cluster(n_, Atom{0.0, 1.0}, priors_.abilities.concentration.initial());
    refresh_effective();

    eta_mh_.assign(n_, {});
    loglam_mh_.assign(n_items_, {});
    loc_mh_.assign(n_items_, {});
    guess_mh_.assign(has_guessing(strategy_.kind) ? n_items_ : 0, {});
    pair_mh_.assign(strategy_.algorithm == Algorithm::Centered ? n_items_ : 0, {});

    if (!std::isfinite(log_likelihood())) throw std::runtime_error("log posterior is not finite at initialization");
  }

  void update_abilities() {
    for (std::size_t j = 0; j < n_; ++j) {
      auto target = [&](double e) { return person_log_lik(j, e) + ability_log_prior(j, e); };
      s_.eta[j] = adaptive_rw_mh_step(target, s_.eta[j], eta_mh_[j], rng_).value;
    }
  }

  void update_items() {
    if (constrained_items()) {
      update_items_constrained();
      return;
    }
    for (std::size_t i = 0; i < n_items_; ++i) {
      if (strategy_.algorithm == Algorithm::Centered) {
        const double eta_bar = mean(s_.eta);
        auto pair_target = [&](double ll, double g) {
          return item_log_lik(i, std::exp(ll), g, guess(i)) + log_lambda_prior(ll) + location_prior(g);
        };
        std::tie(s_.log_lambda[i], s_.location[i]) =
            centered_pair_update(s_.log_lambda[i], s_.location[i], eta_bar, pair_target, pair_mh_[i], rng_);
        lambda_[i] = std::exp(s_.log_lambda[i]);
        loc_[i] = s_.location[i];
      } else if (has_discrimination(strategy_.kind)) {
        auto target = [&](double ll) { return item_log_lik(i, std::exp(ll), loc_[i], guess(i)) + log_lambda_prior(ll); };
        s_.log_lambda[i] = adaptive_rw_mh_step(target, s_.log_lambda[i], loglam_mh_[i], rng_).value;
        lambda_[i] = std::exp(s_.log_lambda[i]);
      }
      auto target = [&](double x) { return item_log_lik(i, lambda_[i], x, guess(i)) + location_prior(x); };
      s_.location[i] = adaptive_rw_mh_step(target, s_.location[i], loc_mh_[i], rng_).value;
      loc_[i] = s_.location[i];
      if (has_guessing(strategy_.kind)) update_guessing(i);
    }
  }

  // Auxiliary parameters enter every item through the centering, so each
  // scalar move is scored on the full likelihood.
  void update_items_constrained() {
    const bool disc = has_discrimination(strategy_.kind);
    auto full_log_lik = [&](const std::vector<double>& lam, const std::vector<double>& loc) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_items_; ++k) total += item_log_lik(k, lam[k], loc[k], guess(k));
      return total;
    };
    std::vector<double> lam(n_items_), loc(n_items_);
    const double inv_n = 1.0 / static_cast<double>(n_items_);
    for (std::size_t i = 0; i < n_items_; ++i) {
      if (disc) {
        const double sum_other = std::accumulate(s_.log_lambda.begin(), s_.log_lambda.end(), 0.0) - s_.log_lambda[i];
        auto target = [&](double ll) {
          const double m = (sum_other + ll) * inv_n;
          for (std::size_t k = 0; k < n_items_; ++k) lam[k] = std::exp((k == i ? ll : s_.log_lambda[k]) - m);
          return full_log_lik(lam, loc_) + log_lambda_prior(ll);
        };
        s_.log_lambda[i] = adaptive_rw_mh_step(target, s_.log_lambda[i], loglam_mh_[i], rng_).value;
        refresh_effective();
      }
      const double sum_other = std::accumulate(s_.location.begin(), s_.location.end(), 0.0) - s_.location[i];
      auto target = [&](double x) {
        const double m = (sum_other + x) * inv_n;
        for (std::size_t k = 0; k < n_items_; ++k) loc[k] = (k == i ? x : s_.location[k]) - m;
        return full_log_lik(lambda_, loc) + location_prior(x);
      };
      s_.location[i] = adaptive_rw_mh_step(target, s_.location[i], loc_mh_[i], rng_).value;
      refresh_effective();
      if (has_guessing(strategy_.kind)) update_guessing(i);
    }
  }

  // Random walk on logit(guessing); the target includes the logit Jacobian.
  void update_guessing(std::size_t i) {
    const double a = priors_.items.guessing_a, b = priors_.items.guessing_b;
    auto target = [&](double x) {
      const double g = math::expit(x);
      if (!(g > 0.0) || !(g < 1.0)) return -std::numeric_limits<double>::infinity();
      return item_log_lik(i, lambda_[i], loc_[i], g) + a * math::log_expit(x) + b * math::log1m_expit(x);
    };
    s_.guessing[i] = math::expit(adaptive_rw_mh_step(target, math::logit(s_.guessing[i]), guess_mh_[i], rng_).value);
  }

  void update_ability_model() {
    if (strategy_.constraint == ConstraintMode::ConstrainedAbilities) return;
    if (!semiparametric()) {
      const auto d = conjugate_normal_invgamma_update(s_.eta, s_.sigma2, priors_.abilities.parametric, rng_);
      s_.mu = d.mean;
      s_.sigma2 = d.variance;
      return;
    }
    crp_label_sweep(s_.crp, s_.eta, base_, rng_);
    crp_atom_update(s_.crp, s_.eta, priors_.abilities.base_measure, rng_);
    const auto& c = priors_.abilities.concentration;
    if (c.random) s_.crp.alpha = escobar_west_alpha_update(s_.crp.alpha, s_.crp.n_clusters(), n_, c.shape, c.rate, rng_);
  }

  const ResponseMatrix& data_;
  StrategyConfig strategy_;
  PriorConfig priors_;
  BaseMeasure base_;
  Rng rng_;
  std::size_t n_ = 0;
  std::size_t n_items_ = 0;
  std::vector<std::vector<Obs>> by_person_;
  std::vector<std::vector<Obs>> by_item_;
  ChainState s_;
  std::vector<double> lambda_;
  std::vector<double> loc_;
  std::vector<AdaptiveMHState> eta_mh_, loglam_mh_, loc_mh_, guess_mh_, pair_mh_;
  bool check_invariants_ = false;
};

/// Runs one chain: n_burnin adaptive sweeps, then n_iter - n_burnin sweeps
/// with adaptation frozen, archiving every `thin`-th post-burn-in state.
inline SampleArchive run_chain(const ResponseMatrix& data, const StrategyConfig& strategy, const PriorConfig& priors,
                               const RunOptions& opt) {
  strategy.validate();
  if (opt.n_burnin >= opt.n_iter) throw std::invalid_argument("run_chain: burn-in must be shorter than the run");
  if (opt.thin < 1) throw std::invalid_argument("run_chain: thin must be at least 1");
  using clock = std::chrono::steady_clock;

  ChainSampler chain(data, strategy, priors, opt.seed);
  chain.set_check_invariants(opt.check_invariants);
  SampleArchive a;
  a.columns = chain.column_names();
  const std::size_t n_keep = (opt.n_iter - opt.n_burnin) / opt.thin;
  a.values.reserve(n_keep * a.columns.size());

  const auto t0 = clock::now();
  for (std::size_t it = 0; it < opt.n_burnin; ++it) chain.sweep();
  chain.freeze_adaptation();
  const auto t1 = clock::now();
  for (std::size_t it = opt.n_burnin; it < opt.n_iter; ++it) {
    chain.sweep();
    if ((it - opt.n_burnin + 1) % opt.thin == 0) chain.record(a);
  }
  const auto t2 = clock::now();

  auto& m = a.meta;
  m.strategy = strategy;
  m.priors = priors;
  m.seed = opt.seed;
  m.n_iter = opt.n_iter;
  m.n_burnin = opt.n_burnin;
  m.thin = opt.thin;
  m.n_individuals = data.n_individuals();
  m.n_items = data.n_items();
  m.burnin_seconds = std::chrono::duration<double>(t1 - t0).count();
  m.sampling_seconds = std::chrono::duration<double>(t2 - t1).count();
  m.acceptance_rates = chain.acceptance_rates();
  m.parameterization = to_string(strategy.parameterization);
  return a;
}

}  // namespace semirt
