#pragma once

#include <optional>

#include "tandem/tandem.hpp"

namespace tandem {

/// Magnitudes of the lower (-a0) and upper (+a1) decision thresholds.
struct Thresholds {
  double a0 = 0.0;
  double a1 = 0.0;

  static Thresholds symmetric(double a) { return Thresholds{a, a}; }
  void validate() const;
};

struct DecisionOutcome {
  int label = 0;
  int tau = 0;
  double terminal_llr = 0.0;
  /// lambda_tau - a1 for upper hits, -(lambda_tau + a0) for lower hits,
  /// 0 for forced decisions.
  double overshoot = 0.0;
  bool forced = false;
};

/// Wald thresholds a1 = log((1-beta)/alpha), a0 = log((1-alpha)/beta).
/// Requires alpha, beta in (0,1) and alpha + beta < 1.
Thresholds thresholds_from_error_rates(double alpha, double beta);

/// First exit of lambda_t from (-a0, a1). Crossing counts on equality and
/// the upper threshold is checked first. Returns std::nullopt while the
/// trajectory is still inside the continuation region at T.
std::optional<DecisionOutcome> run_sprt(const LLRTrajectory& llr, const Thresholds& thr);

/// run_sprt with a forced decision at `horizon` (label 1 iff lambda >= 0).
/// horizon must lie in [1, T]; only lambda_1..lambda_horizon are consulted.
DecisionOutcome run_sprt_truncated(const LLRTrajectory& llr, const Thresholds& thr, int horizon);
inline DecisionOutcome run_sprt_truncated(const LLRTrajectory& llr, const Thresholds& thr) {
  return run_sprt_truncated(llr, thr, llr.length());
}

/// Fixed-sample test on lambda_n: label 1 iff lambda_n >= h.
int neyman_pearson(const LLRTrajectory& llr, int n, double h = 0.0);

}  // namespace tandem
