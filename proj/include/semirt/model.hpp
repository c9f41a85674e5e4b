#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semirt/math.hpp"

namespace semirt {

enum class ModelKind { OnePL, TwoPL, ThreePL };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::OnePL: return "1PL";
    case ModelKind::TwoPL: return "2PL";
    case ModelKind::ThreePL: return "3PL";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "1PL" || s == "1pl" || s == "rasch") return ModelKind::OnePL;
  if (s == "2PL" || s == "2pl") return ModelKind::TwoPL;
  if (s == "3PL" || s == "3pl") return ModelKind::ThreePL;
  throw std::invalid_argument("unknown model kind: " + s);
}

inline bool has_discrimination(ModelKind k) { return k != ModelKind::OnePL; }
inline bool has_guessing(ModelKind k) { return k == ModelKind::ThreePL; }

/// N x I binary responses, individual-major. Cells hold 0, 1 or kMissing.
///
/// Construction only checks dimensions and cell values. The "every row and
/// column observed at least once" invariant is checked by validate(), which
/// ingestion and the samplers call.
class ResponseMatrix {
 public:
  static constexpr std::int8_t kMissing = -1;

  ResponseMatrix() = default;

  ResponseMatrix(std::size_t n_individuals, std::size_t n_items, std::vector<std::int8_t> cells,
                 std::vector<std::string> item_names = {})
      : n_individuals_(n_individuals), n_items_(n_items), cells_(std::move(cells)), names_(std::move(item_names)) {
    if (n_individuals_ == 0 || n_items_ == 0) throw std::invalid_argument("response matrix must be non-empty");
    if (cells_.size() != n_individuals_ * n_items_) throw std::invalid_argument("response matrix: cell count does not match N x I");
    for (auto c : cells_) {
      if (c != 0 && c != 1 && c != kMissing) throw std::invalid_argument("response matrix: cells must be 0, 1 or missing");
    }
    if (names_.empty()) {
      for (std::size_t i = 0; i < n_items_; ++i) names_.push_back("item" + std::to_string(i + 1));
    }
    if (names_.size() != n_items_) throw std::invalid_argument("response matrix: wrong number of item names");
  }

  std::size_t n_individuals() const { return n_individuals_; }
  std::size_t n_items() const { return n_items_; }
  const std::vector<std::string>& item_names() const { return names_; }
  const std::vector<std::int8_t>& cells() const { return cells_; }

  std::int8_t operator()(std::size_t j, std::size_t i) const { return cells_[j * n_items_ + i]; }
  bool missing(std::size_t j, std::size_t i) const { return (*this)(j, i) == kMissing; }

  std::size_t n_observed() const {
    std::size_t n = 0;
    for (auto c : cells_) n += (c != kMissing);
    return n;
  }

  void validate() const {
    std::vector<char> item_seen(n_items_, 0);
    for (std::size_t j = 0; j < n_individuals_; ++j) {
      bool any = false;
      for (std::size_t i = 0; i < n_items_; ++i) {
        if (!missing(j, i)) {
          any = true;
          item_seen[i] = 1;
        }
      }
      if (!any) throw std::invalid_argument("individual " + std::to_string(j + 1) + " has no observed responses");
    }
    for (std::size_t i = 0; i < n_items_; ++i) {
      if (!item_seen[i]) throw std::invalid_argument("item " + names_[i] + " has no observed responses");
    }
  }

 private:
  std::size_t n_individuals_ = 0;
  std::size_t n_items_ = 0;
  std::vector<std::int8_t> cells_;
  std::vector<std::string> names_;
};

/// One item in IRT form. `guessing` is only read for 3PL.
struct ItemIRT {
  double discrimination = 1.0;
  double difficulty = 0.0;
  double guessing = 0.0;
};

struct ItemParametersIRT {
  std::vector<double> discrimination;
  std::vector<double> difficulty;
  std::vector<double> guessing;  // empty unless 3PL

  std::size_t size() const { return difficulty.size(); }
  ItemIRT item(std::size_t i) const {
    return {discrimination.empty() ? 1.0 : discrimination[i], difficulty[i], guessing.empty() ? 0.0 : guessing[i]};
  }
};

struct ItemParametersSI {
  std::vector<double> slope;
  std::vector<double> intercept;
  std::vector<double> guessing;  // empty unless 3PL

  std::size_t size() const { return intercept.size(); }
};

using Abilities = std::vector<double>;

namespace detail {

// Floors applied to log terms: pi is clamped to [1e-300, 1 - 1e-16].
inline const double kLogProbFloor = std::log(1e-300);
inline const double kLog1mProbFloor = std::log(1e-16);

inline void check_item(ModelKind kind, double discrimination, double guessing) {
  if (kind != ModelKind::OnePL && !(discrimination > 0.0)) throw std::invalid_argument("discrimination must be positive");
  if (kind == ModelKind::ThreePL && !(guessing >= 0.0 && guessing < 1.0))
    throw std::invalid_argument("guessing parameter must lie in [0, 1)");
}

}  // namespace detail

/// Log-probability of response y given the logit of the 2PL curve and the
/// lower asymptote (0 outside 3PL).
inline double response_log_prob(int y, double logit_value, double guessing = 0.0) {
  double lp;
  if (guessing > 0.0) {
    if (y == 1) {
      lp = math::log_sum_exp(std::log(guessing), std::log1p(-guessing) + math::log_expit(logit_value));
    } else {
      lp = std::log1p(-guessing) + math::log1m_expit(logit_value);
    }
  } else {
    lp = y == 1 ? math::log_expit(logit_value) : math::log1m_expit(logit_value);
  }
  // The lower clamp on pi bounds log(pi); the upper clamp bounds log(1 - pi).
  return std::max(lp, y == 1 ? detail::kLogProbFloor : detail::kLog1mProbFloor);
}

inline double success_probability(ModelKind kind, const ItemIRT& item, double ability) {
  detail::check_item(kind, item.discrimination, item.guessing);
  const double lambda = kind == ModelKind::OnePL ? 1.0 : item.discrimination;
  const double p = math::expit(lambda * (ability - item.difficulty));
  if (kind == ModelKind::ThreePL) return item.guessing + (1.0 - item.guessing) * p;
  return p;
}

inline ItemParametersIRT si_to_irt(const ItemParametersSI& si) {
  ItemParametersIRT out;
  out.discrimination.resize(si.size());
  out.difficulty.resize(si.size());
  if (si.slope.size() != si.intercept.size()) throw std::invalid_argument("si_to_irt: size mismatch");
  for (std::size_t i = 0; i < si.size(); ++i) {
    if (!(si.slope[i] > 0.0)) throw std::invalid_argument("si_to_irt: slope must be positive");
    out.discrimination[i] = si.slope[i];
    out.difficulty[i] = -si.intercept[i] / si.slope[i];
  }
  out.guessing = si.guessing;
  return out;
}

inline ItemParametersSI irt_to_si(const ItemParametersIRT& irt) {
  ItemParametersSI out;
  out.slope.resize(irt.size());
  out.intercept.resize(irt.size());
  for (std::size_t i = 0; i < irt.size(); ++i) {
    if (!(irt.discrimination[i] > 0.0)) throw std::invalid_argument("irt_to_si: discrimination must be positive");
    out.slope[i] = irt.discrimination[i];
    out.intercept[i] = -irt.discrimination[i] * irt.difficulty[i];
  }
  out.guessing = irt.guessing;
  return out;
}

namespace detail {

inline void check_dims(const ResponseMatrix& data, ModelKind kind, std::size_t n_items, std::size_t n_guess,
                       std::size_t n_abilities) {
  if (n_items != data.n_items()) throw std::invalid_argument("item parameter count does not match data");
  if (n_abilities != data.n_individuals()) throw std::invalid_argument("ability count does not match data");
  if (kind == ModelKind::ThreePL && n_guess != n_items) throw std::invalid_argument("3PL requires one guessing parameter per item");
}

template <class LogitFn>
double sum_log_lik(const ResponseMatrix& data, ModelKind kind, const std::vector<double>& guessing, LogitFn logit_of) {
  double total = 0.0;
  for (std::size_t j = 0; j < data.n_individuals(); ++j) {
    for (std::size_t i = 0; i < data.n_items(); ++i) {
      const auto y = data(j, i);
      if (y == ResponseMatrix::kMissing) continue;
      total += response_log_prob(y, logit_of(i, j), kind == ModelKind::ThreePL ? guessing[i] : 0.0);
    }
  }
  return total;
}

}  // namespace detail

inline double log_likelihood(const ResponseMatrix& data, ModelKind kind, const ItemParametersIRT& items,
                             std::span<const double> abilities) {
  detail::check_dims(data, kind, items.size(), items.guessing.size(), abilities.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto it = items.item(i);
    detail::check_item(kind, it.discrimination, it.guessing);
  }
  return detail::sum_log_lik(data, kind, items.guessing, [&](std::size_t i, std::size_t j) {
    const double lambda = kind == ModelKind::OnePL ? 1.0 : items.discrimination[i];
    return lambda * (abilities[j] - items.difficulty[i]);
  });
}

inline double log_likelihood(const ResponseMatrix& data, ModelKind kind, const ItemParametersSI& items,
                             std::span<const double> abilities) {
  detail::check_dims(data, kind, items.size(), items.guessing.size(), abilities.size());
  return detail::sum_log_lik(data, kind, items.guessing, [&](std::size_t i, std::size_t j) {
    const double lambda = kind == ModelKind::OnePL ? 1.0 : items.slope[i];
    return lambda * abilities[j] + items.intercept[i];
  });
}

/// Per-cell log-densities, individual-major; missing cells hold NaN.
struct PointwiseLogLik {
  std::size_t n_individuals = 0;
  std::size_t n_items = 0;
  std::vector<double> values;

  double operator()(std::size_t j, std::size_t i) const { return values[j * n_items + i]; }
  bool observed(std::size_t j, std::size_t i) const { return !std::isnan((*this)(j, i)); }
};

inline PointwiseLogLik pointwise_log_likelihood(const ResponseMatrix& data, ModelKind kind,
                                                const ItemParametersIRT& items, std::span<const double> abilities) {
  detail::check_dims(data, kind, items.size(), items.guessing.size(), abilities.size());
  PointwiseLogLik out{data.n_individuals(), data.n_items(),
                      std::vector<double>(data.n_individuals() * data.n_items(), std::numeric_limits<double>::quiet_NaN())};
  for (std::size_t j = 0; j < data.n_individuals(); ++j) {
    for (std::size_t i = 0; i < data.n_items(); ++i) {
      const auto y = data(j, i);
      if (y == ResponseMatrix::kMissing) continue;
      const double lambda = kind == ModelKind::OnePL ? 1.0 : items.discrimination[i];
      out.values[j * data.n_items() + i] =
          response_log_prob(y, lambda * (abilities[j] - items.difficulty[i]), kind == ModelKind::ThreePL ? items.guessing[i] : 0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV: header of item names, one row per individual, cells 0 / 1 / NA.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline ResponseMatrix read_response_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("response CSV is empty");
  auto names = detail::split_csv_line(line);
  if (names.empty()) throw std::invalid_argument("response CSV header has no items");
  std::vector<std::int8_t> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != names.size())
      throw std::invalid_argument("response CSV row " + std::to_string(rows + 2) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(names.size()));
    for (const auto& f : fields) {
      if (f == "0") cells.push_back(0);
      else if (f == "1") cells.push_back(1);
      else if (f == "NA") cells.push_back(ResponseMatrix::kMissing);
      else throw std::invalid_argument("response CSV: invalid token '" + f + "' on row " + std::to_string(rows + 2));
    }
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("response CSV has no data rows");
  const std::size_t cols = names.size();
  ResponseMatrix m(rows, cols, std::move(cells), std::move(names));
  m.validate();
  return m;
}

inline ResponseMatrix read_response_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_response_csv(in);
}

inline void write_response_csv(std::ostream& out, const ResponseMatrix& m) {
  const auto& names = m.item_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (std::size_t j = 0; j < m.n_individuals(); ++j) {
    for (std::size_t i = 0; i < m.n_items(); ++i) {
      if (i) out << ',';
      const auto c = m(j, i);
      if (c == ResponseMatrix::kMissing) out << "NA";
      else out << static_cast<int>(c);
    }
    out << '\n';
  }
}

}  // namespace semirt
