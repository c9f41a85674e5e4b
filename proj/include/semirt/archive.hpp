#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semirt/base_measure.hpp"
#include "semirt/priors.hpp"
#include "semirt/strategy.hpp"

namespace semirt {

/// Per-draw map onto the base parameterization. Abilities map as
/// eta* = (eta - offset) / scale; `shift` is b (IRT) or c (SI) and
/// `recenter` the final difficulty recentering of the SI path.
struct TransformRecord {
  double scale = 1.0;
  double shift = 0.0;
  double recenter = 0.0;
  double offset = 0.0;
};

struct ArchiveMeta {
  StrategyConfig strategy{};
  PriorConfig priors{};
  std::uint64_t seed = 0;
  std::size_t n_iter = 0;
  std::size_t n_burnin = 0;
  std::size_t thin = 1;
  std::size_t n_individuals = 0;
  std::size_t n_items = 0;
  double burnin_seconds = 0.0;
  double sampling_seconds = 0.0;
  std::map<std::string, double> acceptance_rates;
  /// "IRT", "SI" or "base".
  std::string parameterization = "IRT";

  double total_seconds() const { return burnin_seconds + sampling_seconds; }
};

/// Post-burn-in draws in columnar form. `values` is draw-major.
/// Semiparametric archives also carry the clustering of every draw.
struct SampleArchive {
  std::vector<std::string> columns;
  std::vector<double> values;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<Atom>> atoms;
  std::vector<std::vector<int>> counts;
  std::vector<TransformRecord> transforms;
  ArchiveMeta meta;

  std::size_t n_columns() const { return columns.size(); }
  std::size_t n_draws() const { return columns.empty() ? 0 : values.size() / columns.size(); }
  bool has_clusters() const { return !labels.empty(); }

  double operator()(std::size_t t, std::size_t c) const { return values[t * columns.size() + c]; }
  double& operator()(std::size_t t, std::size_t c) { return values[t * columns.size() + c]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == name) return c;
    }
    return std::nullopt;
  }

  std::size_t index_of(const std::string& name) const {
    auto c = find(name);
    if (!c) throw std::out_of_range("archive has no column " + name);
    return *c;
  }

  std::vector<double> column(const std::string& name) const { return column(index_of(name)); }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(n_draws());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = (*this)(t, c);
    return out;
  }

  /// Columns named prefix[1..n], in index order.
  std::vector<std::size_t> indexed_columns(const std::string& prefix) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 1;; ++k) {
      auto c = find(prefix + "[" + std::to_string(k) + "]");
      if (!c) break;
      out.push_back(*c);
    }
    return out;
  }
};

inline std::string indexed_name(const std::string& prefix, std::size_t zero_based) {
  return prefix + "[" + std::to_string(zero_based + 1) + "]";
}

// ---------------------------------------------------------------------------
// JSON conversions

inline nlohmann::json to_json(const StrategyConfig& s) {
  return {{"name", s.name()},
          {"model", to_string(s.kind)},
          {"parameterization", to_string(s.parameterization)},
          {"constraint", to_string(s.constraint)},
          {"algorithm", to_string(s.algorithm)},
          {"ability_model", to_string(s.ability_model)}};
}

inline StrategyConfig strategy_from_json(const nlohmann::json& j, ModelKind default_kind = ModelKind::TwoPL) {
  StrategyConfig s;
  s.kind = j.contains("model") ? parse_model_kind(j.at("model").get<std::string>()) : default_kind;
  if (j.contains("parameterization")) s.parameterization = parse_parameterization(j.at("parameterization").get<std::string>());
  if (j.contains("constraint")) s.constraint = parse_constraint(j.at("constraint").get<std::string>());
  if (j.contains("algorithm")) s.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  if (j.contains("ability_model")) s.ability_model = parse_ability_model(j.at("ability_model").get<std::string>());
  s.validate();
  return s;
}

inline nlohmann::json to_json(const NormalInvGammaPrior& p) {
  return {{"mean", p.mean}, {"mean_variance", p.mean_variance}, {"shape", p.shape}, {"scale", p.scale}};
}

inline NormalInvGammaPrior nig_from_json(const nlohmann::json& j, NormalInvGammaPrior p = {}) {
  p.mean = j.value("mean", p.mean);
  p.mean_variance = j.value("mean_variance", p.mean_variance);
  p.shape = j.value("shape", p.shape);
  p.scale = j.value("scale", p.scale);
  return p;
}

inline nlohmann::json to_json(const PriorConfig& p) {
  const auto& it = p.items;
  const auto& c = p.abilities.concentration;
  nlohmann::json conc = c.random ? nlohmann::json{{"shape", c.shape}, {"rate", c.rate}} : nlohmann::json{{"fixed", c.fixed_value}};
  return {{"items",
           {{"log_discrimination_mean", it.log_discrimination_mean},
            {"log_discrimination_variance", it.log_discrimination_variance},
            {"difficulty_variance", it.difficulty_variance},
            {"intercept_variance", it.intercept_variance},
            {"guessing_a", it.guessing_a},
            {"guessing_b", it.guessing_b}}},
          {"abilities", {{"parametric", to_json(p.abilities.parametric)}, {"base_measure", to_json(p.abilities.base_measure)}}},
          {"concentration", conc}};
}

/// Missing keys keep their defaults, so a partial object acts as overrides.
inline PriorConfig priors_from_json(const nlohmann::json& j) {
  PriorConfig p;
  if (j.contains("items")) {
    const auto& it = j.at("items");
    auto& o = p.items;
    o.log_discrimination_mean = it.value("log_discrimination_mean", o.log_discrimination_mean);
    o.log_discrimination_variance = it.value("log_discrimination_variance", o.log_discrimination_variance);
    o.difficulty_variance = it.value("difficulty_variance", o.difficulty_variance);
    o.intercept_variance = it.value("intercept_variance", o.intercept_variance);
    o.guessing_a = it.value("guessing_a", o.guessing_a);
    o.guessing_b = it.value("guessing_b", o.guessing_b);
  }
  if (j.contains("abilities")) {
    const auto& a = j.at("abilities");
    if (a.contains("parametric")) p.abilities.parametric = nig_from_json(a.at("parametric"));
    if (a.contains("base_measure")) p.abilities.base_measure = nig_from_json(a.at("base_measure"));
  }
  if (j.contains("concentration")) {
    const auto& c = j.at("concentration");
    if (c.contains("fixed")) p.abilities.concentration = ConcentrationPrior::fixed(c.at("fixed").get<double>());
    else p.abilities.concentration = ConcentrationPrior::gamma(c.value("shape", 2.0), c.value("rate", 4.0));
  }
  p.validate();
  return p;
}

inline nlohmann::json to_json(const ArchiveMeta& m) {
  return {{"strategy", to_json(m.strategy)},
          {"priors", to_json(m.priors)},
          {"seed", m.seed},
          {"n_iter", m.n_iter},
          {"n_burnin", m.n_burnin},
          {"thin", m.thin},
          {"n_individuals", m.n_individuals},
          {"n_items", m.n_items},
          {"timings", {{"burnin_seconds", m.burnin_seconds}, {"sampling_seconds", m.sampling_seconds}, {"total_seconds", m.total_seconds()}}},
          {"acceptance_rates", m.acceptance_rates},
          {"parameterization", m.parameterization}};
}

inline ArchiveMeta meta_from_json(const nlohmann::json& j) {
  ArchiveMeta m;
  m.strategy = strategy_from_json(j.at("strategy"));
  if (j.contains("priors")) m.priors = priors_from_json(j.at("priors"));
  m.seed = j.value("seed", std::uint64_t{0});
  m.n_iter = j.value("n_iter", std::size_t{0});
  m.n_burnin = j.value("n_burnin", std::size_t{0});
  m.thin = j.value("thin", std::size_t{1});
  m.n_individuals = j.value("n_individuals", std::size_t{0});
  m.n_items = j.value("n_items", std::size_t{0});
  if (!j.contains("timings")) throw std::invalid_argument("archive metadata has no timings");
  m.burnin_seconds = j.at("timings").at("burnin_seconds").get<double>();
  m.sampling_seconds = j.at("timings").at("sampling_seconds").get<double>();
  if (j.contains("acceptance_rates")) m.acceptance_rates = j.at("acceptance_rates").get<std::map<std::string, double>>();
  m.parameterization = j.value("parameterization", std::string("IRT"));
  return m;
}

// ---------------------------------------------------------------------------
// Files: <stem>.csv, <stem>_labels.csv, <stem>_atoms.csv, <stem>_meta.json

namespace detail {

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc{} || ptr != last) {
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return x;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

inline const char* kTransformColumns[] = {"transform_scale", "transform_shift", "transform_recenter", "transform_offset"};

}  // namespace detail

inline void write_archive(const SampleArchive& a, const std::filesystem::path& dir, const std::string& stem = "samples") {
  std::filesystem::create_directories(dir);
  const bool with_tr = !a.transforms.empty();
  if (with_tr && a.transforms.size() != a.n_draws()) throw std::logic_error("archive: transform count does not match draws");
  {
    auto out = detail::open_out(dir / (stem + ".csv"));
    std::string line;
    for (std::size_t c = 0; c < a.columns.size(); ++c) line += (c ? "," : "") + a.columns[c];
    if (with_tr) {
      for (auto* n : detail::kTransformColumns) line += std::string(",") + n;
    }
    out << line << '\n';
    for (std::size_t t = 0; t < a.n_draws(); ++t) {
      line.clear();
      for (std::size_t c = 0; c < a.columns.size(); ++c) {
        if (c) line += ',';
        line += detail::format_double(a(t, c));
      }
      if (with_tr) {
        const auto& r = a.transforms[t];
        for (double v : {r.scale, r.shift, r.recenter, r.offset}) line += "," + detail::format_double(v);
      }
      out << line << '\n';
    }
  }
  if (a.has_clusters()) {
    auto lab = detail::open_out(dir / (stem + "_labels.csv"));
    const std::size_t n = a.labels.front().size();
    std::string line;
    for (std::size_t j = 0; j < n; ++j) line += (j ? "," : "") + indexed_name("z", j);
    lab << line << '\n';
    for (const auto& row : a.labels) {
      line.clear();
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) line += ',';
        line += std::to_string(row[j] + 1);
      }
      lab << line << '\n';
    }
    auto at = detail::open_out(dir / (stem + "_atoms.csv"));
    at << "draw,cluster,count,mu,sigma2\n";
    for (std::size_t t = 0; t < a.atoms.size(); ++t) {
      for (std::size_t k = 0; k < a.atoms[t].size(); ++k) {
        at << (t + 1) << ',' << (k + 1) << ',' << a.counts[t][k] << ',' << detail::format_double(a.atoms[t][k].mean) << ','
           << detail::format_double(a.atoms[t][k].variance) << '\n';
      }
    }
  }
  auto meta = detail::open_out(dir / (stem + "_meta.json"));
  meta << to_json(a.meta).dump(2) << '\n';
}

inline SampleArchive read_archive(const std::filesystem::path& dir, const std::string& stem = "samples") {
  SampleArchive a;
  {
    auto in = detail::open_in(dir / (stem + "_meta.json"));
    a.meta = meta_from_json(nlohmann::json::parse(in));
  }
  auto in = detail::open_in(dir / (stem + ".csv"));
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("archive CSV is empty");
  auto header = detail::split_csv_line(line);
  std::vector<int> tr_slot(header.size(), -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (int k = 0; k < 4; ++k) {
      if (header[c] == detail::kTransformColumns[k]) tr_slot[c] = k;
    }
    if (tr_slot[c] < 0) a.columns.push_back(header[c]);
  }
  const bool with_tr = a.columns.size() != header.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw std::invalid_argument("archive CSV row has wrong field count");
    TransformRecord r;
    double* slots[4] = {&r.scale, &r.shift, &r.recenter, &r.offset};
    for (std::size_t c = 0; c < f.size(); ++c) {
      const double v = detail::parse_double(f[c]);
      if (tr_slot[c] >= 0) *slots[tr_slot[c]] = v;
      else a.values.push_back(v);
    }
    if (with_tr) a.transforms.push_back(r);
  }
  const auto lab_path = dir / (stem + "_labels.csv");
  if (std::filesystem::exists(lab_path)) {
    auto lin = detail::open_in(lab_path);
    std::getline(lin, line);
    while (std::getline(lin, line)) {
      if (line.empty()) continue;
      std::vector<int> row;
      for (const auto& f : detail::split_csv_line(line)) row.push_back(std::stoi(f) - 1);
      a.labels.push_back(std::move(row));
    }
    a.atoms.assign(a.labels.size(), {});
    a.counts.assign(a.labels.size(), {});
    auto ain = detail::open_in(dir / (stem + "_atoms.csv"));
    std::getline(ain, line);
    while (std::getline(ain, line)) {
      if (line.empty()) continue;
      auto f = detail::split_csv_line(line);
      if (f.size() != 5) throw std::invalid_argument("atoms CSV row has wrong field count");
      const auto t = static_cast<std::size_t>(std::stoul(f[0]) - 1);
      if (t >= a.atoms.size()) throw std::invalid_argument("atoms CSV references a missing draw");
      a.counts[t].push_back(std::stoi(f[2]));
      a.atoms[t].push_back({detail::parse_double(f[3]), detail::parse_double(f[4])});
    }
  }
  return a;
}

}  // namespace semirt
