// semirt command line: simulate, fit, post-process and summarize IRT chains.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semirt/semirt.hpp"

using namespace semirt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kRuntime = 3;

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;
  json config = json::object();

  void load() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config " + config_path);
    try {
      config = json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!config.is_object()) throw std::invalid_argument("config must be a JSON object");
    if (!seed_opt->count()) seed = config.value("seed", seed);
  }

  /// Command-line value if given, else the config key, else the default.
  template <class T>
  T pick(const CLI::Option* opt, const std::string& key, T value) const {
    if (opt && opt->count()) return value;
    if (config.contains(key)) return config.at(key).get<T>();
    return value;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config; command-line flags take precedence")->check(CLI::ExistingFile);
  c.seed_opt = sub->add_option("--seed", c.seed, "Master seed");
}

StrategyConfig strategy_from(const Common& c, ModelKind kind, const std::string& ability_model, const std::string& param,
                             const std::string& constraint, const std::string& algorithm, const std::vector<const CLI::Option*>& opts) {
  json s = c.config.value("strategy", json::object());
  if (opts[0]->count()) s["ability_model"] = ability_model;
  if (opts[1]->count()) s["parameterization"] = param;
  if (opts[2]->count()) s["constraint"] = constraint;
  if (opts[3]->count()) s["algorithm"] = algorithm;
  if (!s.contains("model")) s["model"] = to_string(kind);
  auto out = strategy_from_json(s, kind);
  out.validate();
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian parametric and semiparametric IRT"};
  app.require_subcommand(1);

  // simulate
  Common sim_c;
  std::string sim_scenario = "unimodal", sim_model = "2PL", sim_out = "bundle";
  std::size_t sim_n = 2000, sim_i = 15;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario; writes truth.csv and data.csv");
  add_common(sim, sim_c);
  auto* o_scen = sim->add_option("--scenario", sim_scenario, "unimodal, bimodal or multimodal");
  auto* o_sn = sim->add_option("-N,--n-individuals", sim_n);
  auto* o_si = sim->add_option("-I,--n-items", sim_i);
  auto* o_smodel = sim->add_option("--model", sim_model, "1PL, 2PL or 3PL");
  sim->add_option("-o,--out", sim_out, "Output directory");

  // fit
  Common fit_c;
  std::string fit_data, fit_out = "fit", fit_model = "2PL", fit_am = "parametric", fit_param = "IRT", fit_con = "unconstrained",
                        fit_alg = "mh_conjugate";
  std::size_t fit_iter = 50000, fit_burn = 5000, fit_thin = 1;
  bool fit_desk = false;
  auto* fit = app.add_subcommand("fit", "Run one MCMC strategy; writes samples.csv and samples_meta.json");
  add_common(fit, fit_c);
  auto* o_fdata = fit->add_option("--data", fit_data, "Response CSV");
  auto* o_fmodel = fit->add_option("--model", fit_model, "1PL, 2PL or 3PL");
  const std::vector<const CLI::Option*> fit_strategy_opts{
      fit->add_option("--ability-model", fit_am, "parametric or semiparametric"),
      fit->add_option("--parameterization", fit_param, "IRT or SI"),
      fit->add_option("--constraint", fit_con, "constrained_abilities, constrained_items or unconstrained"),
      fit->add_option("--algorithm", fit_alg, "mh_conjugate or centered")};
  auto* o_fiter = fit->add_option("--iterations", fit_iter);
  auto* o_fburn = fit->add_option("--burnin", fit_burn);
  auto* o_fthin = fit->add_option("--thin", fit_thin);
  fit->add_flag("--desk-scale", fit_desk, "10000 iterations, 1000 burn-in unless given");
  fit->add_option("-o,--out", fit_out, "Output directory");

  // postprocess
  Common pp_c;
  std::string pp_in, pp_out;
  auto* pp = app.add_subcommand("postprocess", "Map an archive onto the base parameterization");
  add_common(pp, pp_c);
  pp->add_option("--in", pp_in, "Directory holding samples.csv")->required();
  pp->add_option("-o,--out", pp_out, "Output directory (default: the input directory)");

  // density
  Common den_c;
  std::string den_in, den_stem = "samples_base", den_out = "density.csv";
  std::size_t den_points = 512;
  auto* den = app.add_subcommand("density", "Posterior ability density with pointwise bands");
  add_common(den, den_c);
  den->add_option("--in", den_in, "Archive directory")->required();
  den->add_option("--stem", den_stem, "Archive stem");
  auto* o_dpts = den->add_option("--grid-points", den_points);
  den->add_option("-o,--out", den_out, "Output CSV");

  // percentiles
  Common pct_c;
  std::string pct_in, pct_stem = "samples_base", pct_out = "percentiles.csv";
  double pct_eps = 1e-3;
  auto* pct = app.add_subcommand("percentiles", "Posterior percentile of every individual");
  add_common(pct, pct_c);
  pct->add_option("--in", pct_in, "Archive directory")->required();
  pct->add_option("--stem", pct_stem, "Archive stem");
  auto* o_peps = pct->add_option("--eps-trunc", pct_eps, "Stick-breaking truncation");
  pct->add_option("-o,--out", pct_out, "Output CSV");

  // waic
  Common w_c;
  std::string w_in, w_stem = "samples", w_data, w_out;
  auto* wc = app.add_subcommand("waic", "WAIC of an archive");
  add_common(wc, w_c);
  wc->add_option("--in", w_in, "Archive directory")->required();
  wc->add_option("--stem", w_stem, "Archive stem");
  wc->add_option("--data", w_data, "Response CSV")->required();
  wc->add_option("-o,--out", w_out, "Output JSON (default: stdout)");

  // diagnose
  Common dg_c;
  std::vector<std::string> dg_in;
  std::string dg_stem = "samples_base", dg_out, dg_csv;
  auto* dg = app.add_subcommand("diagnose", "ESS and mESS per second for one or more archives");
  add_common(dg, dg_c);
  dg->add_option("--in", dg_in, "Archive directories")->required();
  dg->add_option("--stem", dg_stem, "Archive stem");
  dg->add_option("-o,--out", dg_out, "Output JSON (default: stdout)");
  dg->add_option("--csv", dg_csv, "Also write a CSV table");

  // prior-check
  Common pc_c;
  std::string pc_model = "2PL", pc_am = "parametric", pc_param = "IRT", pc_out = "prior_check";
  std::size_t pc_draws = 10000;
  auto* pc = app.add_subcommand("prior-check", "Prior-predictive success probabilities");
  add_common(pc, pc_c);
  auto* o_pcmodel = pc->add_option("--model", pc_model, "1PL, 2PL or 3PL");
  auto* o_pcam = pc->add_option("--ability-model", pc_am, "parametric or semiparametric");
  auto* o_pcparam = pc->add_option("--parameterization", pc_param, "IRT or SI");
  auto* o_pcdraws = pc->add_option("--draws", pc_draws);
  pc->add_option("-o,--out", pc_out, "Output prefix: <prefix>.csv and <prefix>.json");

  // report
  Common rp_c;
  std::string rp_in, rp_data, rp_truth, rp_out;
  std::size_t rp_points = 512;
  double rp_eps = 1e-3;
  auto* rp = app.add_subcommand("report", "Post-process, density, percentiles, WAIC and diagnostics for a raw archive");
  add_common(rp, rp_c);
  rp->add_option("--in", rp_in, "Directory holding samples.csv")->required();
  rp->add_option("--data", rp_data, "Response CSV")->required();
  rp->add_option("--truth", rp_truth, "Ground-truth CSV for error metrics");
  auto* o_rpts = rp->add_option("--grid-points", rp_points);
  auto* o_reps = rp->add_option("--eps-trunc", rp_eps);
  rp->add_option("-o,--out", rp_out, "Output directory (default: the input directory)");

  // pipeline
  Common pl_c;
  std::string pl_out = "bundle";
  bool pl_desk = false;
  auto* pl = app.add_subcommand("pipeline", "Run every strategy of a config end to end");
  add_common(pl, pl_c);
  pl->add_option("-o,--out", pl_out, "Bundle directory");
  pl->add_flag("--desk-scale", pl_desk, "10000 iterations, 1000 burn-in unless the config sets them");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (sim->parsed()) {
      sim_c.load();
      const auto scenario = parse_scenario(sim_c.pick(o_scen, "scenario", sim_scenario));
      const auto kind = parse_model_kind(sim_c.pick(o_smodel, "model", sim_model));
      const auto N = sim_c.pick(o_sn, "n_individuals", sim_n), I = sim_c.pick(o_si, "n_items", sim_i);
      if (N < 2 || I < 2) throw std::invalid_argument("simulate: need N >= 2 and I >= 2");
      const auto truth = simulate_truth(scenario, N, I, sim_c.seed, kind);
      const auto data = simulate_responses(truth, kind, sim_c.seed);
      fs::create_directories(sim_out);
      write_truth_csv(truth, fs::path(sim_out) / "truth.csv");
      std::ofstream out(fs::path(sim_out) / "data.csv", std::ios::binary);
      write_response_csv(out, data);
    } else if (fit->parsed()) {
      fit_c.load();
      const auto path = fit_c.pick(o_fdata, "data", fit_data);
      if (path.empty()) throw std::invalid_argument("fit: --data is required");
      const auto kind = parse_model_kind(fit_c.pick(o_fmodel, "model", fit_model));
      const auto strategy = strategy_from(fit_c, kind, fit_am, fit_param, fit_con, fit_alg, fit_strategy_opts);
      const bool desk = fit_desk || fit_c.config.value("desk_scale", false);
      RunOptions run;
      run.n_iter = fit_c.pick(o_fiter, "iterations", desk ? std::size_t{10000} : fit_iter);
      run.n_burnin = fit_c.pick(o_fburn, "burnin", desk ? std::size_t{1000} : fit_burn);
      run.thin = fit_c.pick(o_fthin, "thin", fit_thin);
      run.seed = fit_c.seed;
      const auto priors = fit_c.config.contains("priors") ? priors_from_json(fit_c.config.at("priors")) : PriorConfig{};
      priors.validate();
      const auto data = read_response_csv(path);
      const auto a = run_chain(data, strategy, priors, run);
      write_archive(a, fit_out, "samples");
      std::printf("%s: %zu draws, %.2f s sampling\n", strategy.name().c_str(), a.n_draws(), a.meta.sampling_seconds);
    } else if (pp->parsed()) {
      pp_c.load();
      const auto base = postprocess_archive(read_archive(pp_in, "samples"));
      write_archive(base, pp_out.empty() ? pp_in : pp_out, "samples_base");
    } else if (den->parsed()) {
      den_c.load();
      const auto a = read_archive(den_in, den_stem);
      Rng rng = Rng::substream(den_c.seed, "inference");
      auto grid = default_density_grid(a, den_c.pick(o_dpts, "grid_points", den_points));
      const auto d = a.has_clusters() ? crp_predictive_density_estimate(a, std::move(grid), rng) : parametric_density_estimate(a, std::move(grid));
      write_density_csv(d, den_out);
    } else if (pct->parsed()) {
      pct_c.load();
      const auto a = read_archive(pct_in, pct_stem);
      Rng rng = Rng::substream(pct_c.seed, "inference");
      write_percentiles_csv(percentile_estimates(a, pct_c.pick(o_peps, "eps_trunc", pct_eps), rng), pct_out);
    } else if (wc->parsed()) {
      w_c.load();
      const auto j = to_json(waic(read_archive(w_in, w_stem), read_response_csv(w_data)));
      if (w_out.empty()) std::cout << j.dump(2) << '\n';
      else write_text(w_out, j.dump(2) + "\n");
    } else if (dg->parsed()) {
      dg_c.load();
      json arr = json::array();
      std::string csv = "strategy,mess,sampling_seconds,total_seconds,mess_per_sampling_second,mess_per_total_second\n";
      for (const auto& dir : dg_in) {
        const auto r = efficiency_report(read_archive(dir, dg_stem));
        arr.push_back(to_json(r));
        csv += r.strategy + ',' + detail::format_double(r.mess) + ',' + detail::format_double(r.sampling_seconds) + ',' + detail::format_double(r.total_seconds) +
               ',' + detail::format_double(r.mess_per_sampling_second) + ',' + detail::format_double(r.mess_per_total_second) + '\n';
      }
      if (dg_out.empty()) std::cout << arr.dump(2) << '\n';
      else write_text(dg_out, arr.dump(2) + "\n");
      if (!dg_csv.empty()) write_text(dg_csv, csv);
    } else if (pc->parsed()) {
      pc_c.load();
      const auto kind = parse_model_kind(pc_c.pick(o_pcmodel, "model", pc_model));
      PriorPredictiveOptions opt;
      opt.ability_model = parse_ability_model(pc_c.pick(o_pcam, "ability_model", pc_am));
      opt.parameterization = parse_parameterization(pc_c.pick(o_pcparam, "parameterization", pc_param));
      const auto priors = pc_c.config.contains("priors") ? priors_from_json(pc_c.config.at("priors")) : PriorConfig{};
      priors.validate();
      auto pi = simulate_prior_predictive(kind, priors.items, priors.abilities, pc_c.pick(o_pcdraws, "draws", pc_draws), pc_c.seed, opt);
      std::string csv = "pi\n";
      double mean = 0.0, var = 0.0;
      for (double p : pi) {
        csv += detail::format_double(p) + '\n';
        mean += p;
      }
      mean /= static_cast<double>(pi.size());
      for (double p : pi) var += (p - mean) * (p - mean);
      var /= static_cast<double>(pi.size() - 1);
      std::sort(pi.begin(), pi.end());
      json deciles = json::array();
      for (int d = 1; d <= 9; ++d) deciles.push_back(pi[static_cast<std::size_t>(d * (pi.size() - 1) / 10)]);
      write_text(pc_out + ".csv", csv);
      const json summary{{"mean", mean}, {"variance", var}, {"deciles", deciles}, {"reference", {{"mean", 0.5}, {"variance", 0.125}}}};
      write_text(pc_out + ".json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
    } else if (rp->parsed()) {
      rp_c.load();
      const auto data = read_response_csv(rp_data);
      std::optional<GroundTruth> truth;
      if (!rp_truth.empty()) truth = read_truth_csv(rp_truth);
      const auto r = analyze_archive(read_archive(rp_in, "samples"), data, truth ? &*truth : nullptr, rp_c.seed,
                                     rp_c.pick(o_reps, "eps_trunc", rp_eps), rp_c.pick(o_rpts, "grid_points", rp_points));
      write_strategy_outputs(r, rp_out.empty() ? rp_in : rp_out, truth ? &*truth : nullptr);
      std::cout << report_json(r).dump(2) << '\n';
    } else if (pl->parsed()) {
      pl_c.load();
      if (pl_c.config_path.empty()) throw std::invalid_argument("pipeline: --config is required");
      auto j = pl_c.config;
      j["seed"] = pl_c.seed;
      run_pipeline(pipeline_config_from_json(j, pl_desk), pl_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: bad config value: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
