#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "semirt/archive.hpp"
#include "semirt/math.hpp"
#include "semirt/model.hpp"
#include "semirt/rng.hpp"

namespace semirt {

enum class Scenario { Unimodal, Bimodal, Multimodal };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Unimodal: return "unimodal";
    case Scenario::Bimodal: return "bimodal";
    case Scenario::Multimodal: return "multimodal";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "unimodal") return Scenario::Unimodal;
  if (s == "bimodal") return Scenario::Bimodal;
  if (s == "multimodal") return Scenario::Multimodal;
  throw std::invalid_argument("unknown scenario: " + s);
}

struct GroundTruth {
  Scenario scenario = Scenario::Unimodal;
  ItemParametersIRT items;
  Abilities abilities;
};

/// lambda_i ~ Uniform(0.5, 1.5) then log-centred; beta_i = -3 + 6 i / (I + 1).
/// 3PL guessing values are drawn from Beta(2, 8).
inline ItemParametersIRT simulate_items(std::size_t I, std::uint64_t seed, ModelKind kind = ModelKind::TwoPL) {
  if (I < 2) throw std::invalid_argument("simulate_items: need at least two items");
  Rng rng = Rng::substream(seed, "items");
  ItemParametersIRT items;
  std::vector<double> raw(I);
  double mlog = 0.0;
  for (auto& x : raw) {
    x = rng.uniform(0.5, 1.5);
    mlog += std::log(x);
  }
  mlog /= static_cast<double>(I);
  for (std::size_t i = 0; i < I; ++i) {
    if (has_discrimination(kind)) items.discrimination.push_back(std::exp(std::log(raw[i]) - mlog));
    items.difficulty.push_back(-3.0 + 6.0 * static_cast<double>(i + 1) / static_cast<double>(I + 1));
  }
  if (has_guessing(kind)) {
    for (std::size_t i = 0; i < I; ++i) items.guessing.push_back(rng.beta(2.0, 8.0));
  }
  return items;
}

/// Pre-centring discriminations from the same stream as simulate_items.
inline std::vector<double> raw_simulated_discriminations(std::size_t I, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "items");
  std::vector<double> raw(I);
  for (auto& x : raw) x = rng.uniform(0.5, 1.5);
  return raw;
}

namespace detail {

inline constexpr double kSkewXi = 3.0, kSkewOmega = 1.0, kSkewZeta = -3.0;

inline double skew_normal_draw(double xi, double omega, double zeta, Rng& rng) {
  const double delta = zeta / std::sqrt(1.0 + zeta * zeta);
  const double u0 = rng.normal(), u1 = rng.normal();
  return xi + omega * (delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1);
}

}  // namespace detail

inline double draw_scenario_ability(Scenario s, Rng& rng) {
  switch (s) {
    case Scenario::Unimodal: return rng.normal(0.0, 1.25);
    case Scenario::Bimodal: return rng.normal(rng.bernoulli(0.5) ? -2.0 : 2.0, 1.25);
    case Scenario::Multimodal: {
      const double u = rng.uniform();
      if (u < 0.2) return rng.normal(-2.0, 1.0);
      if (u < 0.6) return rng.normal(0.0, 0.5);
      return detail::skew_normal_draw(detail::kSkewXi, detail::kSkewOmega, detail::kSkewZeta, rng);
    }
  }
  throw std::invalid_argument("unknown scenario");
}

inline Abilities simulate_abilities(Scenario s, std::size_t N, std::uint64_t seed) {
  if (N < 2) throw std::invalid_argument("simulate_abilities: need at least two individuals");
  Rng rng = Rng::substream(seed, "abilities");
  Abilities eta(N);
  for (auto& x : eta) x = draw_scenario_ability(s, rng);
  return eta;
}

/// Closed-form pdf of the scenario's ability distribution.
inline double scenario_density(Scenario s, double x) {
  switch (s) {
    case Scenario::Unimodal: return math::normal_pdf(x, 0.0, 1.5625);
    case Scenario::Bimodal: return 0.5 * math::normal_pdf(x, -2.0, 1.5625) + 0.5 * math::normal_pdf(x, 2.0, 1.5625);
    case Scenario::Multimodal: {
      const double z = (x - detail::kSkewXi) / detail::kSkewOmega;
      const double sn = 2.0 / detail::kSkewOmega * math::normal_pdf(z, 0.0, 1.0) * math::normal_cdf(detail::kSkewZeta * z);
      return 0.2 * math::normal_pdf(x, -2.0, 1.0) + 0.4 * math::normal_pdf(x, 0.0, 0.25) + 0.4 * sn;
    }
  }
  throw std::invalid_argument("unknown scenario");
}

inline double scenario_mean(Scenario s) {
  if (s != Scenario::Multimodal) return 0.0;
  const double delta = detail::kSkewZeta / std::sqrt(1.0 + detail::kSkewZeta * detail::kSkewZeta);
  return 0.2 * -2.0 + 0.4 * (detail::kSkewXi + detail::kSkewOmega * delta * std::sqrt(2.0 / std::numbers::pi));
}

inline GroundTruth simulate_truth(Scenario s, std::size_t N, std::size_t I, std::uint64_t seed, ModelKind kind = ModelKind::TwoPL) {
  return {s, simulate_items(I, seed, kind), simulate_abilities(s, N, seed)};
}

/// Independent Bernoulli responses, no missing cells.
inline ResponseMatrix simulate_responses(const GroundTruth& truth, ModelKind kind, std::uint64_t seed) {
  const std::size_t N = truth.abilities.size(), I = truth.items.size();
  if (N == 0 || I == 0) throw std::invalid_argument("simulate_responses: empty truth");
  if (has_guessing(kind) && truth.items.guessing.size() != I) throw std::invalid_argument("simulate_responses: 3PL truth needs guessing values");
  Rng rng = Rng::substream(seed, "responses");
  std::vector<std::int8_t> cells(N * I);
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t i = 0; i < I; ++i) {
      const double p = success_probability(kind, truth.items.item(i), truth.abilities[j]);
      cells[j * I + i] = static_cast<std::int8_t>(rng.uniform() < p);
    }
  }
  return ResponseMatrix(N, I, std::move(cells));
}

/// truth.csv: parameter,index,value with parameters lambda, beta, guess, eta.
inline void write_truth_csv(const GroundTruth& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "parameter,index,value\n";
  auto emit = [&](const char* name, const std::vector<double>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) out << name << ',' << (k + 1) << ',' << detail::format_double(v[k]) << '\n';
  };
  emit("lambda", t.items.discrimination);
  emit("beta", t.items.difficulty);
  emit("guess", t.items.guessing);
  emit("eta", t.abilities);
}

inline GroundTruth read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GroundTruth t;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw std::invalid_argument("truth CSV row has wrong field count");
    const double v = detail::parse_double(f[2]);
    if (f[0] == "lambda") t.items.discrimination.push_back(v);
    else if (f[0] == "beta") t.items.difficulty.push_back(v);
    else if (f[0] == "guess") t.items.guessing.push_back(v);
    else if (f[0] == "eta") t.abilities.push_back(v);
    else throw std::invalid_argument("truth CSV: unknown parameter " + f[0]);
  }
  return t;
}

}  // namespace semirt
