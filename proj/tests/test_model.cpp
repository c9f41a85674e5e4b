#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "semirt/model.hpp"
#include "semirt/strategy.hpp"

using namespace semirt;

namespace {

ItemIRT item(double lambda, double beta, double guess = 0.0) { return {lambda, beta, guess}; }

// Direct evaluation of the log-likelihood, cell by cell, without the library.
double brute_log_lik(const std::vector<std::vector<int>>& y, const std::vector<double>& lambda,
                     const std::vector<double>& beta, const std::vector<double>& eta) {
  double s = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    for (std::size_t i = 0; i < y[j].size(); ++i) {
      if (y[j][i] < 0) continue;
      const double p = 1.0 / (1.0 + std::exp(-lambda[i] * (eta[j] - beta[i])));
      s += y[j][i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
  }
  return s;
}

ResponseMatrix from_rows(const std::vector<std::vector<int>>& y) {
  std::vector<std::int8_t> cells;
  for (const auto& row : y)
    for (int v : row) cells.push_back(static_cast<std::int8_t>(v));
  return ResponseMatrix(y.size(), y.front().size(), cells);
}

}  // namespace

TEST(SuccessProbability, HalfAtDifficulty) {
  EXPECT_NEAR(success_probability(ModelKind::TwoPL, item(1.0, 0.7), 0.7), 0.5, 1e-15);
}

TEST(SuccessProbability, TwoPLAtLogitTwo) {
  EXPECT_NEAR(success_probability(ModelKind::TwoPL, item(2.0, 0.0), 1.0), 0.880797077977882444, 1e-15);
}

TEST(SuccessProbability, ThreePLWithZeroGuessingEqualsTwoPL) {
  for (double eta : {-3.0, -0.2, 0.0, 1.4, 5.0}) {
    EXPECT_EQ(success_probability(ModelKind::ThreePL, item(1.3, 0.4, 0.0), eta),
              success_probability(ModelKind::TwoPL, item(1.3, 0.4), eta));
  }
}

TEST(SuccessProbability, OnePLIsTwoPLWithUnitDiscrimination) {
  for (double eta : {-2.0, 0.3, 4.0}) {
    EXPECT_EQ(success_probability(ModelKind::OnePL, item(7.0, -0.5), eta),
              success_probability(ModelKind::TwoPL, item(1.0, -0.5), eta));
  }
}

TEST(SuccessProbability, ThreePLIncreasesWithGuessing) {
  double prev = 0.0;
  for (double g : {0.0, 0.1, 0.3, 0.6, 0.9}) {
    const double p = success_probability(ModelKind::ThreePL, item(1.0, 1.0, g), -0.5);
    EXPECT_GT(p, prev);
    EXPECT_GE(p, g);
    prev = p;
  }
}

TEST(SuccessProbability, RejectsInvalidItems) {
  EXPECT_THROW(success_probability(ModelKind::TwoPL, item(0.0, 0.0), 0.0), std::invalid_argument);
  EXPECT_THROW(success_probability(ModelKind::TwoPL, item(-1.0, 0.0), 0.0), std::invalid_argument);
  EXPECT_THROW(success_probability(ModelKind::ThreePL, item(1.0, 0.0, 1.0), 0.0), std::invalid_argument);
  EXPECT_THROW(success_probability(ModelKind::ThreePL, item(1.0, 0.0, -0.1), 0.0), std::invalid_argument);
}

TEST(LogLikelihood, SingleObservedCell) {
  const ResponseMatrix m(2, 2, {1, -1, -1, -1});
  ItemParametersIRT items{{1.0, 1.0}, {0.0, 0.0}, {}};
  // The second row has no observations, so only cell (0,0) with pi = 0.5 counts.
  const std::vector<double> eta{0.0, 0.0};
  EXPECT_NEAR(log_likelihood(m, ModelKind::TwoPL, items, eta), std::log(0.5), 1e-15);
}

TEST(LogLikelihood, MatchesFrozenTwoByTwo) {
  const std::vector<std::vector<int>> y{{1, 0}, {0, 1}};
  ItemParametersIRT items{{1.3, 0.7}, {-0.4, 0.9}, {}};
  const std::vector<double> eta{0.25, -1.1};
  EXPECT_NEAR(log_likelihood(from_rows(y), ModelKind::TwoPL, items, eta), -2.80736100991948930, 1e-13);
}

TEST(LogLikelihood, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.3, 2.5);
  std::bernoulli_distribution coin(0.5), miss(0.15);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t N = 7, I = 4;
    std::vector<std::vector<int>> y(N, std::vector<int>(I));
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t i = 0; i < I; ++i) y[j][i] = (i > 0 && miss(gen)) ? -1 : coin(gen);
    }
    std::vector<double> lam(I), beta(I), eta(N);
    for (auto& x : lam) x = u(gen);
    for (auto& x : beta) x = z(gen);
    for (auto& x : eta) x = z(gen);
    const ItemParametersIRT items{lam, beta, {}};
    EXPECT_NEAR(log_likelihood(from_rows(y), ModelKind::TwoPL, items, eta), brute_log_lik(y, lam, beta, eta), 1e-11);
  }
}

TEST(LogLikelihood, DuplicatedRowsDoubleIt) {
  const std::vector<std::vector<int>> y{{1, 0, 1}, {0, 0, 1}};
  const std::vector<std::vector<int>> yy{{1, 0, 1}, {0, 0, 1}, {1, 0, 1}, {0, 0, 1}};
  ItemParametersIRT items{{0.8, 1.2, 1.9}, {-0.3, 0.2, 1.0}, {}};
  const std::vector<double> eta{0.4, -0.6}, eta2{0.4, -0.6, 0.4, -0.6};
  EXPECT_NEAR(log_likelihood(from_rows(yy), ModelKind::TwoPL, items, eta2),
              2.0 * log_likelihood(from_rows(y), ModelKind::TwoPL, items, eta), 1e-12);
}

TEST(LogLikelihood, PointwiseSumsToTotal) {
  const ResponseMatrix m(3, 2, {1, 0, -1, 1, 0, 0});
  ItemParametersIRT items{{1.1, 0.6}, {0.2, -0.8}, {0.1, 0.25}};
  const std::vector<double> eta{0.3, -1.0, 1.7};
  const auto pw = pointwise_log_likelihood(m, ModelKind::ThreePL, items, eta);
  double s = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (pw.observed(j, i)) s += pw(j, i);
    }
  }
  EXPECT_FALSE(pw.observed(1, 0));
  EXPECT_NEAR(s, log_likelihood(m, ModelKind::ThreePL, items, eta), 1e-13);
}

TEST(LogLikelihood, ExtremeLogitsStayFinite) {
  const ResponseMatrix m(1, 2, {0, 1});
  ItemParametersIRT items{{50.0, 50.0}, {-30.0, 30.0}, {}};
  const std::vector<double> eta{0.0};
  const double ll = log_likelihood(m, ModelKind::TwoPL, items, eta);
  EXPECT_TRUE(std::isfinite(ll));
  EXPECT_GE(ll, std::log(1e-16) + std::log(1e-300) - 1e-9);
}

TEST(LogLikelihood, InvariantUnderLocationAndScaleShifts) {
  const ResponseMatrix m(3, 3, {1, 0, 1, 0, 0, 1, 1, 1, 0});
  ItemParametersIRT items{{0.9, 1.4, 0.7}, {-0.5, 0.1, 0.8}, {}};
  const std::vector<double> eta{0.2, -0.9, 1.3};
  const double base = log_likelihood(m, ModelKind::TwoPL, items, eta);

  auto shifted = items;
  auto eta_s = eta;
  for (auto& b : shifted.difficulty) b += 0.75;
  for (auto& e : eta_s) e += 0.75;
  EXPECT_NEAR(log_likelihood(m, ModelKind::TwoPL, shifted, eta_s), base, 1e-10);

  auto scaled = items;
  auto eta_k = eta;
  const double s = 1.6;
  for (auto& l : scaled.discrimination) l *= s;
  for (auto& b : scaled.difficulty) b /= s;
  for (auto& e : eta_k) e /= s;
  EXPECT_NEAR(log_likelihood(m, ModelKind::TwoPL, scaled, eta_k), base, 1e-10);
}

TEST(LogLikelihood, RejectsDimensionMismatch) {
  const ResponseMatrix m(2, 2, {1, 0, 0, 1});
  ItemParametersIRT three{{1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {}};
  const std::vector<double> eta{0.0, 0.0};
  EXPECT_THROW(log_likelihood(m, ModelKind::TwoPL, three, eta), std::invalid_argument);
  ItemParametersIRT two{{1.0, 1.0}, {0.0, 0.0}, {}};
  const std::vector<double> eta3{0.0, 0.0, 0.0};
  EXPECT_THROW(log_likelihood(m, ModelKind::TwoPL, two, eta3), std::invalid_argument);
  EXPECT_THROW(log_likelihood(m, ModelKind::ThreePL, two, eta), std::invalid_argument);
}

TEST(Reparameterization, SlopeInterceptToDifficulty) {
  const auto irt = si_to_irt({{2.0}, {-1.0}, {}});
  EXPECT_DOUBLE_EQ(irt.discrimination[0], 2.0);
  EXPECT_DOUBLE_EQ(irt.difficulty[0], 0.5);
  const auto irt2 = si_to_irt({{0.5}, {1.0}, {}});
  EXPECT_DOUBLE_EQ(irt2.difficulty[0], -2.0);
}

TEST(Reparameterization, RoundTripAndLogitAgreement) {
  const ItemParametersSI si{{0.4, 1.0, 2.3}, {-1.2, 0.0, 0.9}, {}};
  const auto irt = si_to_irt(si);
  const auto back = irt_to_si(irt);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(back.slope[i], si.slope[i], 1e-14);
    EXPECT_NEAR(back.intercept[i], si.intercept[i], 1e-14);
    for (double eta = -4.0; eta <= 4.0; eta += 0.5) {
      const double a = irt.discrimination[i] * (eta - irt.difficulty[i]);
      const double b = si.slope[i] * eta + si.intercept[i];
      EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(b)));
    }
  }
  EXPECT_THROW(si_to_irt({{0.0}, {1.0}, {}}), std::invalid_argument);
}

TEST(ResponseCsv, ParsesValidInput) {
  std::istringstream in("q1,q2,q3\n1,0,NA\n0,1,1\n");
  const auto m = read_response_csv(in);
  EXPECT_EQ(m.n_individuals(), 2u);
  EXPECT_EQ(m.n_items(), 3u);
  EXPECT_TRUE(m.missing(0, 2));
  EXPECT_EQ(m(1, 2), 1);
  EXPECT_EQ(m.n_observed(), 5u);
  EXPECT_EQ(m.item_names()[1], "q2");
}

TEST(ResponseCsv, RoundTrips) {
  std::istringstream in("a,b\n1,NA\n0,1\nNA,0\n");
  const auto m = read_response_csv(in);
  std::ostringstream out;
  write_response_csv(out, m);
  EXPECT_EQ(out.str(), "a,b\n1,NA\n0,1\nNA,0\n");
}

TEST(ResponseCsv, RejectsBadToken) {
  std::istringstream in("a,b\n1,2\n");
  EXPECT_THROW(read_response_csv(in), std::invalid_argument);
}

TEST(ResponseCsv, RejectsWrongFieldCount) {
  std::istringstream in("a,b\n1,0,1\n");
  EXPECT_THROW(read_response_csv(in), std::invalid_argument);
}

TEST(ResponseCsv, RejectsUnobservedRowOrColumn) {
  std::istringstream row("a,b\n1,0\nNA,NA\n");
  EXPECT_THROW(read_response_csv(row), std::invalid_argument);
  std::istringstream col("a,b\n1,NA\n0,NA\n");
  EXPECT_THROW(read_response_csv(col), std::invalid_argument);
}

TEST(Strategies, ThirteenForTwoPL) {
  const auto all = all_strategies(ModelKind::TwoPL);
  EXPECT_EQ(all.size(), 13u);
  for (const auto& s : all) EXPECT_NO_THROW(s.validate());
}

TEST(Strategies, InvalidCombinationsRejected) {
  StrategyConfig s;
  s.algorithm = Algorithm::Centered;
  s.parameterization = Parameterization::IRT;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.parameterization = Parameterization::SI;
  s.constraint = ConstraintMode::ConstrainedItems;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  StrategyConfig c;
  c.constraint = ConstraintMode::ConstrainedAbilities;
  c.ability_model = AbilityModel::Semiparametric;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
