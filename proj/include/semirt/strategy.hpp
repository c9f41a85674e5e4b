#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "semirt/model.hpp"

namespace semirt {

enum class Parameterization { IRT, SI };
enum class ConstraintMode { ConstrainedAbilities, ConstrainedItems, Unconstrained };
enum class Algorithm { MHConjugate, Centered };
enum class AbilityModel { Parametric, Semiparametric };

inline std::string to_string(Parameterization p) { return p == Parameterization::IRT ? "IRT" : "SI"; }

inline std::string to_string(ConstraintMode c) {
  switch (c) {
    case ConstraintMode::ConstrainedAbilities: return "constrained_abilities";
    case ConstraintMode::ConstrainedItems: return "constrained_items";
    case ConstraintMode::Unconstrained: return "unconstrained";
  }
  return "?";
}

inline std::string to_string(Algorithm a) { return a == Algorithm::MHConjugate ? "mh_conjugate" : "centered"; }
inline std::string to_string(AbilityModel m) { return m == AbilityModel::Parametric ? "parametric" : "semiparametric"; }

inline Parameterization parse_parameterization(const std::string& s) {
  if (s == "IRT" || s == "irt") return Parameterization::IRT;
  if (s == "SI" || s == "si" || s == "slope_intercept") return Parameterization::SI;
  throw std::invalid_argument("unknown parameterization: " + s);
}

inline ConstraintMode parse_constraint(const std::string& s) {
  if (s == "constrained_abilities") return ConstraintMode::ConstrainedAbilities;
  if (s == "constrained_items") return ConstraintMode::ConstrainedItems;
  if (s == "unconstrained") return ConstraintMode::Unconstrained;
  throw std::invalid_argument("unknown constraint mode: " + s);
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "mh_conjugate" || s == "MH/conjugate") return Algorithm::MHConjugate;
  if (s == "centered") return Algorithm::Centered;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline AbilityModel parse_ability_model(const std::string& s) {
  if (s == "parametric") return AbilityModel::Parametric;
  if (s == "semiparametric") return AbilityModel::Semiparametric;
  throw std::invalid_argument("unknown ability model: " + s);
}

/// One sampling strategy: parameterization x identifiability constraint x
/// sampler set, for a given parametric or DP-mixture ability model.
struct StrategyConfig {
  Parameterization parameterization = Parameterization::IRT;
  ConstraintMode constraint = ConstraintMode::Unconstrained;
  Algorithm algorithm = Algorithm::MHConjugate;
  AbilityModel ability_model = AbilityModel::Parametric;
  ModelKind kind = ModelKind::TwoPL;

  /// Throws unless the combination is one of the non-HMC strategy cells.
  void validate() const {
    if (algorithm == Algorithm::Centered) {
      if (parameterization != Parameterization::SI) throw std::invalid_argument("centered sampler requires SI parameterization");
      if (constraint == ConstraintMode::ConstrainedItems) throw std::invalid_argument("centered sampler is not defined with item constraints");
      if (kind == ModelKind::OnePL) throw std::invalid_argument("centered sampler needs a discrimination parameter (not 1PL)");
    }
    if (constraint == ConstraintMode::ConstrainedAbilities && ability_model != AbilityModel::Parametric)
      throw std::invalid_argument("constrained abilities is only defined for the parametric model");
  }

  std::string name() const {
    std::string n = ability_model == AbilityModel::Parametric ? "param" : "semi";
    n += parameterization == Parameterization::IRT ? "_irt_" : "_si_";
    n += to_string(constraint);
    if (algorithm == Algorithm::Centered) n += "_centered";
    if (kind != ModelKind::TwoPL) n += "_" + to_string(kind);
    return n;
  }

  /// Draws come out already satisfying the sum-to-zero IRT constraints.
  bool yields_base_parameterization() const {
    return parameterization == Parameterization::IRT && constraint == ConstraintMode::ConstrainedItems;
  }

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

/// All 13 non-HMC strategies for the given model kind (Centered cells are
/// skipped for 1PL).
inline std::vector<StrategyConfig> all_strategies(ModelKind kind = ModelKind::TwoPL) {
  std::vector<StrategyConfig> out;
  for (auto am : {AbilityModel::Parametric, AbilityModel::Semiparametric}) {
    for (auto c : {ConstraintMode::ConstrainedAbilities, ConstraintMode::ConstrainedItems, ConstraintMode::Unconstrained}) {
      for (auto p : {Parameterization::SI, Parameterization::IRT}) {
        for (auto a : {Algorithm::MHConjugate, Algorithm::Centered}) {
          StrategyConfig s{p, c, a, am, kind};
          try {
            s.validate();
            out.push_back(s);
          } catch (const std::invalid_argument&) {
          }
        }
      }
    }
  }
  return out;
}

}  // namespace semirt
