#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tandem/parallel.hpp"
#include "tandem/sprt.hpp"
#include "tandem/synthdata.hpp"
#include "tandem/tandem.hpp"

namespace tandem {

struct AccuracyEstimate {
  double value = 0.0;
  double sem = 0.0;
};

/// (TPR + TNR) / 2. Both classes must be present in `truth`.
double balanced_accuracy(std::span<const int> predicted, std::span<const int> truth);
/// Balanced accuracy with its binomial standard error
/// sqrt(TPR(1-TPR)/n1 + TNR(1-TNR)/n0) / 2.
AccuracyEstimate balanced_accuracy_with_sem(std::span<const int> predicted, std::span<const int> truth);

struct SatPoint {
  double a0 = 0.0;
  double a1 = 0.0;
  double mean_hitting_time = 0.0;
  double balanced_accuracy = 0.0;
  long n_trials = 0;
  /// Standard error of balanced_accuracy.
  double sem = 0.0;
  /// Standard error of mean_hitting_time.
  double sem_hitting_time = 0.0;
};

/// Truncated SPRT at every threshold pair, horizon T.
std::vector<SatPoint> sat_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels,
                                std::span<const Thresholds> thresholds, int horizon);
/// Symmetric thresholds a0 = a1 = a for each listed a.
std::vector<SatPoint> sat_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels,
                                std::span<const double> symmetric_thresholds, int horizon);

/// {0} followed by `count` log-spaced values from 10^lo to 10^hi.
std::vector<double> default_threshold_grid(double lo = -2.0, double hi = 2.0, int count = 17);

/// Balanced accuracy as a function of mean hitting time, linearly
/// interpolated onto `targets` (points sorted by hitting time; targets
/// outside the covered range are clamped to the end points).
std::vector<double> interpolate_sat(std::span<const SatPoint> points, std::span<const double> targets);

struct NpPoint {
  int n = 0;
  double balanced_accuracy = 0.0;
  double sem = 0.0;
};

/// Fixed-sample test sign(lambda_n - h) for n = 1..T.
std::vector<NpPoint> np_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels, double h = 0.0);

/// alpha0 = P(d=1 | y=0) (FPR), alpha1 = P(d=0 | y=1) (FNR).
struct ErrorRates {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double sem0 = 0.0;
  double sem1 = 0.0;
  long n0 = 0;
  long n1 = 0;
};

ErrorRates error_rates(std::span<const DecisionOutcome> outcomes, std::span<const int> labels);

struct WaldBoundReport {
  /// alpha1 <= e^{-a0} (1 - alpha0)
  double lhs1 = 0.0;
  double rhs1 = 0.0;
  bool holds1 = false;
  /// alpha0 <= e^{-a1} (1 - alpha1)
  double lhs0 = 0.0;
  double rhs0 = 0.0;
  bool holds0 = false;
  double slack_multiplier = 3.0;
  /// alpha0 * e^{a1} and its standard error.
  double asymptotic_ratio = 0.0;
  double asymptotic_ratio_sem = 0.0;
};

/// Evaluates both inequalities with `slack_multiplier` SEMs of slack.
WaldBoundReport wald_bound_check(const ErrorRates& rates, const Thresholds& thr, double slack_multiplier = 3.0);

/// gamma(x, y) = (1-x) log((1-x)/y) - x log((1-y)/x).
double hitting_time_gamma(double x, double y);

struct HittingTimes {
  double e0 = 0.0;
  double e1 = 0.0;
};

/// No-overshoot mean hitting times E1 = gamma(a1, a0)/I1, E0 = gamma(a0, a1)/I0.
HittingTimes mean_hitting_time_theory(double alpha0, double alpha1, double kl0, double kl1);

struct OvershootStats {
  long upper_hits = 0;
  long lower_hits = 0;
  /// E[kappa1 | upper hit], E[kappa0 | lower hit]; 0 when no such hits.
  double mean_upper = 0.0;
  double mean_lower = 0.0;
  double max_upper = 0.0;
  double max_lower = 0.0;
  /// Histogram counts over [0, hist_max) in equal bins; the last bin
  /// also collects values >= hist_max.
  double hist_max = 0.0;
  std::vector<long> upper_histogram;
  std::vector<long> lower_histogram;
};

/// Statistics over unforced outcomes. Throws if none are unforced.
OvershootStats overshoot_stats(std::span<const DecisionOutcome> outcomes, int bins = 20);

/// Mean hitting time under class `label` including measured overshoots:
/// E1 = [(1-a1*)(a1 + E1 k1) - a1*(a0 + E1 k0)] / I1 and symmetrically
/// E0 = [(1-a0*)(a0 + E0 k0) - a0*(a1 + E0 k1)] / I0.
double mean_hitting_time_with_overshoot(int label, const ErrorRates& rates, const Thresholds& thr,
                                        const OvershootStats& class_stats, double kl);

/// NMSE between sum-normalized estimated and true ratios.
double nmse(std::span<const double> estimated, std::span<const double> truth);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

/// Standard normal upper quantile z with P(Z > z) = p.
double normal_upper_quantile(double p);

// Monte Carlo drivers on the i.i.d. Gaussian model with analytic LLR.

/// Runs `n_trials` SPRTs with true class `label`, each trial on its own
/// substream of `seed`. Trials still running at `max_steps` come back as
/// forced decisions.
std::vector<DecisionOutcome> simulate_gauss_sprt(const GaussPairSpec& spec, int label, const Thresholds& thr,
                                                 long n_trials, int max_steps, std::uint64_t seed, int threads = 1);

/// Smallest integer n with P(lambda_n >= h | 0) <= alpha and
/// P(lambda_n < h | 1) <= beta: n = ceil(((z_alpha + z_beta) / ||mu1 - mu0||)^2).
long np_sample_size(const GaussPairSpec& spec, double alpha, double beta);

struct NpEfficiencyReport {
  double alpha = 0.0;
  double beta = 0.0;
  long np_n = 0;
  double sprt_mean_tau_0 = 0.0;
  double sprt_mean_tau_1 = 0.0;
  double ratio_0 = 0.0;
  double ratio_1 = 0.0;
  double sem_0 = 0.0;
  double sem_1 = 0.0;
  ErrorRates measured;
  long forced = 0;
};

/// SPRT with Wald thresholds for (alpha, beta) against the fixed-sample
/// test of the same error rates; n_trials per class.
NpEfficiencyReport np_efficiency(const GaussPairSpec& spec, double alpha, double beta, long n_trials,
                                 std::uint64_t seed, int threads = 1);

}  // namespace tandem
