#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "semirt/rng.hpp"

namespace semirt {

/// Per-target state of an adaptive random-walk Metropolis-Hastings sampler.
///
/// Proposal sd starts at 1. Every `kInterval` calls the log scale moves by
/// gamma2 * (observed rate - target rate), gamma2 = 10 / (t + 3)^0.8 with t
/// the number of adaptations so far. Adaptation only happens at interval
/// boundaries and stops once `freeze()` is called.
struct AdaptiveMHState {
  static constexpr int kInterval = 200;

  double log_scale = 0.0;
  double target_rate = 0.44;
  int calls_in_interval = 0;
  int accepted_in_interval = 0;
  int times_adapted = 0;
  bool adapting = true;
  std::uint64_t calls = 0;
  std::uint64_t accepted = 0;

  double scale() const { return std::exp(log_scale); }

  void freeze() {
    adapting = false;
    calls = 0;
    accepted = 0;
  }

  double acceptance_rate() const { return calls ? static_cast<double>(accepted) / static_cast<double>(calls) : 0.0; }

  void record(bool jump) {
    ++calls;
    accepted += jump;
    if (!adapting) return;
    ++calls_in_interval;
    accepted_in_interval += jump;
    if (calls_in_interval == kInterval) {
      const double rate = static_cast<double>(accepted_in_interval) / kInterval;
      ++times_adapted;
      const double gamma2 = 10.0 / std::pow(times_adapted + 3.0, 0.8);
      log_scale += gamma2 * (rate - target_rate);
      calls_in_interval = 0;
      accepted_in_interval = 0;
    }
  }
};

struct MHResult {
  double value;
  bool accepted;
};

/// One normal random-walk MH step on a scalar. `target` returns the log
/// density up to a constant and may return -inf outside the support.
template <class LogDensity>
MHResult adaptive_rw_mh_step(LogDensity&& target, double current, AdaptiveMHState& state, Rng& rng) {
  const double current_lp = target(current);
  if (!std::isfinite(current_lp)) throw std::domain_error("adaptive MH: log density is not finite at the current value");
  const double proposal = current + state.scale() * rng.normal();
  const double proposal_lp = target(proposal);
  const bool jump = std::log(rng.uniform()) < proposal_lp - current_lp;
  state.record(jump);
  return {jump ? proposal : current, jump};
}

}  // namespace semirt
