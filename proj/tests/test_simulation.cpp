#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "semirt/archive.hpp"
#include "semirt/math.hpp"
#include "semirt/pipeline.hpp"
#include "semirt/simulation.hpp"

using namespace semirt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("semirt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(SimulateItems, DifficultiesAreEvenlySpaced) {
  const auto items = simulate_items(3, 1);
  EXPECT_NEAR(items.difficulty[0], -1.5, 1e-15);
  EXPECT_NEAR(items.difficulty[1], 0.0, 1e-15);
  EXPECT_NEAR(items.difficulty[2], 1.5, 1e-15);
}

TEST(SimulateItems, DiscriminationsAreLogCentred) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto items = simulate_items(12, seed);
    double s = 0.0;
    for (double l : items.discrimination) s += std::log(l);
    EXPECT_NEAR(s, 0.0, 1e-12);
    for (double r : raw_simulated_discriminations(12, seed)) {
      EXPECT_GE(r, 0.5);
      EXPECT_LE(r, 1.5);
    }
  }
}

TEST(SimulateItems, ThreePLAddsGuessing) {
  const auto items = simulate_items(8, 4, ModelKind::ThreePL);
  ASSERT_EQ(items.guessing.size(), 8u);
  for (double g : items.guessing) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  EXPECT_TRUE(simulate_items(8, 4, ModelKind::OnePL).discrimination.empty());
}

TEST(SimulateAbilities, UnimodalMoments) {
  const auto eta = simulate_abilities(Scenario::Unimodal, 100000, 5);
  double m = 0.0, v = 0.0;
  for (double x : eta) m += x;
  m /= eta.size();
  for (double x : eta) v += (x - m) * (x - m);
  v /= eta.size() - 1;
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(v), 1.25, 0.02);
}

TEST(SimulateAbilities, BimodalMean) {
  const auto eta = simulate_abilities(Scenario::Bimodal, 100000, 6);
  double m = 0.0;
  for (double x : eta) m += x;
  EXPECT_NEAR(m / eta.size(), 0.0, 0.03);
}

TEST(SimulateAbilities, MultimodalMeanMatchesClosedForm) {
  const std::size_t N = 200000;
  const auto eta = simulate_abilities(Scenario::Multimodal, N, 7);
  double m = 0.0, v = 0.0;
  for (double x : eta) m += x;
  m /= N;
  for (double x : eta) v += (x - m) * (x - m);
  v /= N - 1;
  // 0.2 (-2) + 0.4 (3 - 3 / sqrt(10) sqrt(2 / pi))
  EXPECT_NEAR(scenario_mean(Scenario::Multimodal), 0.4972240973575808, 1e-12);
  EXPECT_NEAR(m, scenario_mean(Scenario::Multimodal), 3.0 * std::sqrt(v / N));
}

TEST(ScenarioDensity, IntegratesToOneAndMatchesMean) {
  const auto grid = [] {
    std::vector<double> g;
    for (int k = 0; k <= 40000; ++k) g.push_back(-20.0 + 40.0 * k / 40000.0);
    return g;
  }();
  for (auto s : {Scenario::Unimodal, Scenario::Bimodal, Scenario::Multimodal}) {
    std::vector<double> p(grid.size()), xp(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      p[k] = scenario_density(s, grid[k]);
      xp[k] = grid[k] * p[k];
    }
    EXPECT_NEAR(math::trapezoid(grid, p), 1.0, 1e-8) << to_string(s);
    EXPECT_NEAR(math::trapezoid(grid, xp), scenario_mean(s), 1e-8) << to_string(s);
  }
}

TEST(SimulateResponses, CertainSuccessGivesAllOnes) {
  GroundTruth t;
  t.items = {{1.0, 1.0}, {-1000.0, -1000.0}, {}};
  t.abilities = {0.0, 1.0, -2.0};
  const auto y = simulate_responses(t, ModelKind::TwoPL, 3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(y(j, i), 1);
}

TEST(SimulateResponses, CellFrequenciesMatchProbabilities) {
  GroundTruth t;
  t.items = {{0.8, 1.6}, {-0.5, 0.7}, {}};
  t.abilities = {0.2, -1.0};
  const std::size_t R = 20000;
  double hits[2][2] = {};
  for (std::size_t r = 0; r < R; ++r) {
    const auto y = simulate_responses(t, ModelKind::TwoPL, r + 1);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < 2; ++i) hits[j][i] += y(j, i);
  }
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 2; ++i) {
      const double p = success_probability(ModelKind::TwoPL, t.items.item(i), t.abilities[j]);
      EXPECT_NEAR(hits[j][i] / R, p, 3.0 * std::sqrt(p * (1.0 - p) / R));
    }
  }
}

TEST(SimulateResponses, SeedDeterminesOutput) {
  const auto t = simulate_truth(Scenario::Bimodal, 50, 6, 8);
  EXPECT_EQ(simulate_responses(t, ModelKind::TwoPL, 8).cells(), simulate_responses(t, ModelKind::TwoPL, 8).cells());
  EXPECT_NE(simulate_responses(t, ModelKind::TwoPL, 8).cells(), simulate_responses(t, ModelKind::TwoPL, 9).cells());
}

TEST(TruthCsv, RoundTrips) {
  const auto dir = scratch("truth");
  const auto t = simulate_truth(Scenario::Multimodal, 20, 4, 9, ModelKind::ThreePL);
  write_truth_csv(t, dir / "truth.csv");
  const auto back = read_truth_csv(dir / "truth.csv");
  EXPECT_EQ(back.items.discrimination, t.items.discrimination);
  EXPECT_EQ(back.items.difficulty, t.items.difficulty);
  EXPECT_EQ(back.items.guessing, t.items.guessing);
  EXPECT_EQ(back.abilities, t.abilities);
}

TEST(Archive, RoundTripsWithClustersAndTransforms) {
  const auto dir = scratch("archive");
  const auto t = simulate_truth(Scenario::Bimodal, 30, 4, 10);
  const auto data = simulate_responses(t, ModelKind::TwoPL, 10);
  StrategyConfig s;
  s.ability_model = AbilityModel::Semiparametric;
  const auto raw = run_chain(data, s, {}, {200, 50, 1, 10, false});
  const auto base = postprocess_archive(raw);
  write_archive(base, dir, "base");
  const auto back = read_archive(dir, "base");
  EXPECT_EQ(back.columns, base.columns);
  EXPECT_EQ(back.values, base.values);
  EXPECT_EQ(back.labels, base.labels);
  EXPECT_EQ(back.counts, base.counts);
  ASSERT_EQ(back.atoms.size(), base.atoms.size());
  for (std::size_t d = 0; d < base.atoms.size(); ++d) {
    ASSERT_EQ(back.atoms[d].size(), base.atoms[d].size());
    for (std::size_t k = 0; k < base.atoms[d].size(); ++k) {
      EXPECT_EQ(back.atoms[d][k].mean, base.atoms[d][k].mean);
      EXPECT_EQ(back.atoms[d][k].variance, base.atoms[d][k].variance);
    }
  }
  ASSERT_EQ(back.transforms.size(), base.transforms.size());
  EXPECT_EQ(back.transforms[5].offset, base.transforms[5].offset);
  EXPECT_EQ(back.meta.strategy, base.meta.strategy);
  EXPECT_EQ(back.meta.parameterization, "base");
  EXPECT_EQ(back.meta.sampling_seconds, base.meta.sampling_seconds);
}

TEST(Archive, MissingTimingsRejected) {
  const auto dir = scratch("archive_timings");
  std::ofstream(dir / "samples.csv") << "beta[1]\n0.5\n";
  std::ofstream(dir / "samples_meta.json") << R"({"strategy": {}, "n_items": 1})";
  EXPECT_THROW(read_archive(dir), std::exception);
}

TEST(PipelineConfig, EmptyStrategyListIsRejected) {
  const auto j = nlohmann::json::parse(R"({"scenario": "unimodal", "strategies": []})");
  EXPECT_THROW(pipeline_config_from_json(j).validate(), std::invalid_argument);
}

TEST(PipelineConfig, DeskScaleDefaults) {
  const auto j = nlohmann::json::parse(R"({"scenario": "bimodal", "strategies": [{"ability_model": "semiparametric"}]})");
  const auto c = pipeline_config_from_json(j, true);
  EXPECT_EQ(c.n_iter, 10000u);
  EXPECT_EQ(c.n_burnin, 1000u);
  EXPECT_EQ(c.scenario, Scenario::Bimodal);
  ASSERT_EQ(c.strategies.size(), 1u);
  EXPECT_EQ(c.strategies[0].ability_model, AbilityModel::Semiparametric);
}

TEST(Pipeline, SmokeRunWritesEveryOutput) {
  const auto dir = scratch("pipeline");
  const auto j = nlohmann::json::parse(R"({
    "seed": 4, "scenario": "bimodal", "n_individuals": 100, "n_items": 5,
    "iterations": 2000, "burnin": 500,
    "strategies": [{"ability_model": "parametric"}, {"ability_model": "semiparametric"}]
  })");
  const auto c = pipeline_config_from_json(j);
  run_pipeline(c, dir);
  for (const char* f : {"config.json", "truth.csv", "data.csv", "summary.json", "efficiency.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  for (const auto& s : c.strategies) {
    const auto sd = dir / s.name();
    for (const char* f : {"samples.csv", "samples_meta.json", "density.csv", "percentiles.csv", "report.json"})
      EXPECT_TRUE(fs::exists(sd / f)) << s.name() << "/" << f;
  }
  EXPECT_TRUE(fs::exists(dir / "semi_irt_unconstrained" / "samples_labels.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_TRUE(summary[0].contains("waic"));
}

TEST(Pipeline, FitFailureCarriesStageTag) {
  const auto dir = scratch("pipeline_fail");
  PipelineConfig c;
  c.scenario = std::nullopt;
  c.data_path = (dir / "missing.csv").string();
  c.strategies = {StrategyConfig{}};
  c.n_iter = 200;
  c.n_burnin = 50;
  try {
    run_pipeline(c, dir / "out");
    FAIL() << "expected a pipeline error";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "simulate");
  }
}
