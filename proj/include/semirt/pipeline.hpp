#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semirt/archive.hpp"
#include "semirt/diagnostics.hpp"
#include "semirt/identifiability.hpp"
#include "semirt/inference.hpp"
#include "semirt/sampler.hpp"
#include "semirt/simulation.hpp"

namespace semirt {

/// Failure inside one pipeline stage; what() starts with "<stage>: ".
class PipelineError : public std::runtime_error {
 public:
  PipelineError(const std::string& stage, const std::string& msg) : std::runtime_error(stage + ": " + msg), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  ModelKind kind = ModelKind::TwoPL;
  std::optional<Scenario> scenario = Scenario::Unimodal;
  std::string data_path;
  std::string truth_path;
  std::size_t n_individuals = 2000;
  std::size_t n_items = 15;
  std::size_t n_iter = 50000;
  std::size_t n_burnin = 5000;
  std::size_t thin = 1;
  bool factorial = false;
  std::vector<StrategyConfig> strategies;
  PriorConfig priors{};
  double eps_trunc = 1e-3;
  std::size_t grid_points = 512;
  nlohmann::json source;

  void validate() const {
    if (strategies.empty()) throw std::invalid_argument("config: strategy list is empty");
    for (const auto& s : strategies) s.validate();
    if (n_burnin >= n_iter) throw std::invalid_argument("config: burnin must be smaller than iterations");
    if (thin < 1) throw std::invalid_argument("config: thin must be at least 1");
    if (!scenario && data_path.empty()) throw std::invalid_argument("config: need a scenario or a data file");
    if (scenario && (n_individuals < 2 || n_items < 2)) throw std::invalid_argument("config: scenario needs N >= 2 and I >= 2");
    if (!(eps_trunc > 0.0 && eps_trunc < 1.0)) throw std::invalid_argument("config: eps_trunc must lie in (0, 1)");
    if (grid_points < 2) throw std::invalid_argument("config: grid_points must be at least 2");
    priors.validate();
  }
};

/// Reads a JSON config. Iteration defaults are 50000 / 5000, or 10000 / 1000
/// with "desk_scale"; explicit "iterations" / "burnin" override either.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, bool desk_scale_flag = false) {
  PipelineConfig c;
  c.source = j;
  c.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("model")) c.kind = parse_model_kind(j.at("model").get<std::string>());
  if (j.contains("data")) {
    c.data_path = j.at("data").get<std::string>();
    c.scenario.reset();
    c.truth_path = j.value("truth", std::string{});
  }
  if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  c.n_individuals = j.value("n_individuals", c.n_individuals);
  c.n_items = j.value("n_items", c.n_items);
  const bool desk = desk_scale_flag || j.value("desk_scale", false);
  if (desk) {
    c.n_iter = 10000;
    c.n_burnin = 1000;
  }
  c.n_iter = j.value("iterations", c.n_iter);
  c.n_burnin = j.value("burnin", c.n_burnin);
  c.thin = j.value("thin", c.thin);
  c.factorial = j.value("factorial", false);
  if (j.contains("strategies")) {
    for (const auto& s : j.at("strategies")) {
      auto sj = s;
      if (!sj.contains("model")) sj["model"] = to_string(c.kind);
      c.strategies.push_back(strategy_from_json(sj, c.kind));
    }
  }
  if (j.contains("priors")) c.priors = priors_from_json(j.at("priors"));
  c.eps_trunc = j.value("eps_trunc", c.eps_trunc);
  c.grid_points = j.value("grid_points", c.grid_points);
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path, bool desk_scale_flag = false) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  return pipeline_config_from_json(j, desk_scale_flag);
}

/// Everything derived from one fitted chain.
struct StrategyResult {
  SampleArchive raw;
  SampleArchive base;
  DensityEstimate density;
  PercentileEstimate percentiles;
  WaicResult waic;
  EfficiencyReport efficiency;
  std::optional<ErrorMetrics> difficulty_error, discrimination_error, ability_error;
};

/// post-process -> density -> percentiles -> WAIC -> errors -> diagnostics.
inline StrategyResult analyze_archive(SampleArchive raw, const ResponseMatrix& data, const GroundTruth* truth,
                                      std::uint64_t seed, double eps_trunc = 1e-3, std::size_t grid_points = 512) {
  StrategyResult r;
  r.raw = std::move(raw);
  Rng rng = Rng::substream(seed, "inference");
  try {
    r.base = postprocess_archive(r.raw);
  } catch (const std::exception& e) {
    throw PipelineError("postprocess", e.what());
  }
  try {
    auto grid = default_density_grid(r.base, grid_points);
    r.density = r.base.has_clusters() ? crp_predictive_density_estimate(r.base, std::move(grid), rng)
                                      : parametric_density_estimate(r.base, std::move(grid));
    r.percentiles = percentile_estimates(r.base, eps_trunc, rng);
  } catch (const std::exception& e) {
    throw PipelineError("density", e.what());
  }
  try {
    r.waic = waic(r.base, data);
  } catch (const std::exception& e) {
    throw PipelineError("waic", e.what());
  }
  if (truth) {
    try {
      r.difficulty_error = error_metrics(posterior_means(r.base, "beta"), truth->items.difficulty);
      if (has_discrimination(r.base.meta.strategy.kind))
        r.discrimination_error = error_metrics(posterior_means(r.base, "lambda"), truth->items.discrimination);
      r.ability_error = error_metrics(posterior_means(r.base, "eta"), truth->abilities);
    } catch (const std::exception& e) {
      throw PipelineError("report", e.what());
    }
  }
  try {
    r.efficiency = efficiency_report(r.base);
  } catch (const std::exception& e) {
    throw PipelineError("diagnose", e.what());
  }
  return r;
}

inline nlohmann::json metrics_json(const ErrorMetrics& m) { return {{"mae", m.mae}, {"mse", m.mse}}; }

inline nlohmann::json to_json(const WaicResult& w) { return {{"waic", w.waic}, {"lppd", w.lppd}, {"p_waic", w.p_waic}}; }

inline nlohmann::json report_json(const StrategyResult& r) {
  nlohmann::json j;
  j["strategy"] = to_json(r.raw.meta.strategy);
  j["waic"] = to_json(r.waic);
  nlohmann::json err = nlohmann::json::object();
  if (r.difficulty_error) err["difficulty"] = metrics_json(*r.difficulty_error);
  if (r.discrimination_error) err["discrimination"] = metrics_json(*r.discrimination_error);
  if (r.ability_error) err["ability"] = metrics_json(*r.ability_error);
  j["error_metrics"] = err;
  j["efficiency"] = to_json(r.efficiency);
  j["acceptance_rates"] = r.raw.meta.acceptance_rates;
  return j;
}

inline void write_density_csv(const DensityEstimate& d, const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::vector<double>>>& extra = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "grid,mean,lower,upper";
  for (const auto& [name, v] : extra) out << ',' << name;
  out << '\n';
  for (std::size_t g = 0; g < d.grid.size(); ++g) {
    out << detail::format_double(d.grid[g]) << ',' << detail::format_double(d.mean[g]) << ',' << detail::format_double(d.lower[g])
        << ',' << detail::format_double(d.upper[g]);
    for (const auto& [name, v] : extra) out << ',' << detail::format_double(v[g]);
    out << '\n';
  }
}

inline void write_percentiles_csv(const PercentileEstimate& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "individual,mean,lower,upper\n";
  for (std::size_t j = 0; j < p.mean.size(); ++j) {
    out << (j + 1) << ',' << detail::format_double(p.mean[j]) << ',' << detail::format_double(p.lower[j]) << ','
        << detail::format_double(p.upper[j]) << '\n';
  }
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Writes <dir>/{samples*, samples_base*, density.csv, percentiles.csv, report.json}.
inline void write_strategy_outputs(const StrategyResult& r, const std::filesystem::path& dir, const GroundTruth* truth) {
  std::filesystem::create_directories(dir);
  write_archive(r.raw, dir, "samples");
  write_archive(r.base, dir, "samples_base");
  std::vector<std::pair<std::string, std::vector<double>>> extra;
  extra.emplace_back("kde_posterior_means", kde_curve(posterior_means(r.base, "eta"), r.density.grid));
  if (truth) {
    std::vector<double> td;
    for (double x : r.density.grid) td.push_back(scenario_density(truth->scenario, x));
    extra.emplace_back("true_density", std::move(td));
  }
  write_density_csv(r.density, dir / "density.csv", extra);
  write_percentiles_csv(r.percentiles, dir / "percentiles.csv");
  write_json(report_json(r), dir / "report.json");
}

namespace detail {

inline void run_bundle(const PipelineConfig& c, std::size_t N, std::size_t I, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ResponseMatrix data;
  std::optional<GroundTruth> truth;
  try {
    if (c.scenario) {
      truth = simulate_truth(*c.scenario, N, I, c.seed, c.kind);
      data = simulate_responses(*truth, c.kind, c.seed);
    } else {
      data = read_response_csv(c.data_path);
      if (!c.truth_path.empty()) truth = read_truth_csv(c.truth_path);
    }
  } catch (const std::exception& e) {
    throw PipelineError("simulate", e.what());
  }
  nlohmann::json cfg = c.source;
  cfg["resolved"] = {{"n_individuals", data.n_individuals()}, {"n_items", data.n_items()}, {"iterations", c.n_iter}, {"burnin", c.n_burnin}};
  write_json(cfg, dir / "config.json");
  if (truth) write_truth_csv(*truth, dir / "truth.csv");
  {
    std::ofstream out(dir / "data.csv", std::ios::binary);
    write_response_csv(out, data);
  }
  nlohmann::json summary = nlohmann::json::array();
  std::ofstream eff(dir / "efficiency.csv", std::ios::binary);
  eff << "strategy,mess,sampling_seconds,total_seconds,mess_per_sampling_second,mess_per_total_second\n";
  for (const auto& s : c.strategies) {
    SampleArchive raw;
    try {
      raw = run_chain(data, s, c.priors, {c.n_iter, c.n_burnin, c.thin, c.seed, false});
    } catch (const std::exception& e) {
      throw PipelineError("fit[" + s.name() + "]", e.what());
    }
    const auto r = analyze_archive(std::move(raw), data, truth ? &*truth : nullptr, c.seed, c.eps_trunc, c.grid_points);
    write_strategy_outputs(r, dir / s.name(), truth ? &*truth : nullptr);
    summary.push_back(report_json(r));
    const auto& e = r.efficiency;
    eff << e.strategy << ',' << format_double(e.mess) << ',' << format_double(e.sampling_seconds) << ','
        << format_double(e.total_seconds) << ',' << format_double(e.mess_per_sampling_second) << ','
        << format_double(e.mess_per_total_second) << '\n';
  }
  write_json(summary, dir / "summary.json");
}

}  // namespace detail

/// Runs every strategy of the config and writes the bundle under `out`.
/// With `factorial`, one sub-bundle N<N>_I<I> per cell of I in {10, 30} x
/// N in {1000, 5000}.
inline void run_pipeline(const PipelineConfig& c, const std::filesystem::path& out) {
  c.validate();
  if (c.factorial && c.scenario) {
    for (std::size_t I : {10, 30}) {
      for (std::size_t N : {1000, 5000}) {
        detail::run_bundle(c, N, I, out / ("N" + std::to_string(N) + "_I" + std::to_string(I)));
      }
    }
  } else {
    detail::run_bundle(c, c.n_individuals, c.n_items, out);
  }
}

}  // namespace semirt
