#include "tandem/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tandem/rng.hpp"

namespace tandem {

namespace {

struct ClassCounts {
  long n1 = 0;
  long n0 = 0;
  long true_pos = 0;
  long true_neg = 0;
};

ClassCounts count_classes(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label counts differ");
  ClassCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++c.n1;
      c.true_pos += predicted[i] == 1 ? 1 : 0;
    } else {
      ++c.n0;
      c.true_neg += predicted[i] == 0 ? 1 : 0;
    }
  }
  if (c.n1 == 0 || c.n0 == 0) throw std::invalid_argument("balanced accuracy needs both classes in the evaluation set");
  return c;
}

double binomial_sem(double p, long n) { return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; }

double mean_and_sem(std::span<const double> xs, double* sem) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  *sem = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return mean;
}

}  // namespace

double balanced_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  return balanced_accuracy_with_sem(predicted, truth).value;
}

AccuracyEstimate balanced_accuracy_with_sem(std::span<const int> predicted, std::span<const int> truth) {
  const ClassCounts c = count_classes(predicted, truth);
  const double tpr = static_cast<double>(c.true_pos) / c.n1;
  const double tnr = static_cast<double>(c.true_neg) / c.n0;
  const double var = tpr * (1.0 - tpr) / c.n1 + tnr * (1.0 - tnr) / c.n0;
  return AccuracyEstimate{0.5 * (tpr + tnr), 0.5 * std::sqrt(var)};
}

std::vector<SatPoint> sat_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels,
                                std::span<const Thresholds> thresholds, int horizon) {
  if (llrs.empty() || thresholds.empty()) throw std::invalid_argument("sat_curve: empty inputs");
  if (llrs.size() != labels.size()) throw std::invalid_argument("sat_curve: trajectory and label counts differ");
  std::vector<SatPoint> out;
  out.reserve(thresholds.size());
  std::vector<int> predicted(llrs.size());
  std::vector<double> taus(llrs.size());
  for (const auto& thr : thresholds) {
    for (std::size_t i = 0; i < llrs.size(); ++i) {
      const DecisionOutcome d = run_sprt_truncated(llrs[i], thr, horizon);
      predicted[i] = d.label;
      taus[i] = d.tau;
    }
    SatPoint p;
    p.a0 = thr.a0;
    p.a1 = thr.a1;
    p.mean_hitting_time = mean_and_sem(taus, &p.sem_hitting_time);
    const AccuracyEstimate acc = balanced_accuracy_with_sem(predicted, labels);
    p.balanced_accuracy = acc.value;
    p.sem = acc.sem;
    p.n_trials = static_cast<long>(llrs.size());
    out.push_back(p);
  }
  return out;
}

std::vector<SatPoint> sat_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels,
                                std::span<const double> symmetric_thresholds, int horizon) {
  std::vector<Thresholds> pairs;
  pairs.reserve(symmetric_thresholds.size());
  for (double a : symmetric_thresholds) pairs.push_back(Thresholds::symmetric(a));
  return sat_curve(llrs, labels, pairs, horizon);
}

std::vector<double> default_threshold_grid(double lo, double hi, int count) {
  std::vector<double> grid{0.0};
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    grid.push_back(std::pow(10.0, e));
  }
  return grid;
}

std::vector<double> interpolate_sat(std::span<const SatPoint> points, std::span<const double> targets) {
  if (points.empty()) throw std::invalid_argument("interpolate_sat: no points");
  std::vector<SatPoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SatPoint& a, const SatPoint& b) { return a.mean_hitting_time < b.mean_hitting_time; });
  std::vector<double> out;
  out.reserve(targets.size());
  for (double x : targets) {
    if (x <= sorted.front().mean_hitting_time) {
      out.push_back(sorted.front().balanced_accuracy);
      continue;
    }
    if (x >= sorted.back().mean_hitting_time) {
      out.push_back(sorted.back().balanced_accuracy);
      continue;
    }
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), x,
                               [](double v, const SatPoint& p) { return v < p.mean_hitting_time; });
    auto lo = hi - 1;
    const double span = hi->mean_hitting_time - lo->mean_hitting_time;
    const double w = span > 0.0 ? (x - lo->mean_hitting_time) / span : 0.0;
    out.push_back((1.0 - w) * lo->balanced_accuracy + w * hi->balanced_accuracy);
  }
  return out;
}

std::vector<NpPoint> np_curve(std::span<const LLRTrajectory> llrs, std::span<const int> labels, double h) {
  if (llrs.empty()) throw std::invalid_argument("np_curve: empty inputs");
  const int length = llrs.front().length();
  std::vector<NpPoint> out;
  std::vector<int> predicted(llrs.size());
  for (int n = 1; n <= length; ++n) {
    for (std::size_t i = 0; i < llrs.size(); ++i) predicted[i] = neyman_pearson(llrs[i], n, h);
    const AccuracyEstimate acc = balanced_accuracy_with_sem(predicted, labels);
    out.push_back(NpPoint{n, acc.value, acc.sem});
  }
  return out;
}

ErrorRates error_rates(std::span<const DecisionOutcome> outcomes, std::span<const int> labels) {
  if (outcomes.size() != labels.size()) throw std::invalid_argument("error_rates: outcome and label counts differ");
  ErrorRates r;
  long false_pos = 0;
  long false_neg = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (labels[i] == 1) {
      ++r.n1;
      false_neg += outcomes[i].label == 0 ? 1 : 0;
    } else {
      ++r.n0;
      false_pos += outcomes[i].label == 1 ? 1 : 0;
    }
  }
  if (r.n0 == 0 || r.n1 == 0) throw std::invalid_argument("error_rates needs both classes");
  r.alpha0 = static_cast<double>(false_pos) / r.n0;
  r.alpha1 = static_cast<double>(false_neg) / r.n1;
  r.sem0 = binomial_sem(r.alpha0, r.n0);
  r.sem1 = binomial_sem(r.alpha1, r.n1);
  return r;
}

WaldBoundReport wald_bound_check(const ErrorRates& rates, const Thresholds& thr, double slack_multiplier) {
  thr.validate();
  WaldBoundReport rep;
  rep.slack_multiplier = slack_multiplier;
  rep.lhs1 = rates.alpha1;
  rep.rhs1 = std::exp(-thr.a0) * (1.0 - rates.alpha0);
  rep.lhs0 = rates.alpha0;
  rep.rhs0 = std::exp(-thr.a1) * (1.0 - rates.alpha1);
  // Slack covers the sampling error of both sides.
  const double slack1 = slack_multiplier * std::hypot(rates.sem1, std::exp(-thr.a0) * rates.sem0);
  const double slack0 = slack_multiplier * std::hypot(rates.sem0, std::exp(-thr.a1) * rates.sem1);
  rep.holds1 = rep.lhs1 <= rep.rhs1 + slack1;
  rep.holds0 = rep.lhs0 <= rep.rhs0 + slack0;
  rep.asymptotic_ratio = rates.alpha0 * std::exp(thr.a1);
  rep.asymptotic_ratio_sem = rates.sem0 * std::exp(thr.a1);
  return rep;
}

double hitting_time_gamma(double x, double y) {
  return (1.0 - x) * std::log((1.0 - x) / y) - x * std::log((1.0 - y) / x);
}

HittingTimes mean_hitting_time_theory(double alpha0, double alpha1, double kl0, double kl1) {
  auto in_unit = [](double a) { return a > 0.0 && a < 1.0; };
  if (!in_unit(alpha0) || !in_unit(alpha1)) throw std::invalid_argument("error rates must lie in (0, 1)");
  if (!(kl0 > 0.0) || !(kl1 > 0.0)) throw std::invalid_argument("KL divergences must be positive");
  return HittingTimes{hitting_time_gamma(alpha0, alpha1) / kl0, hitting_time_gamma(alpha1, alpha0) / kl1};
}

OvershootStats overshoot_stats(std::span<const DecisionOutcome> outcomes, int bins) {
  if (bins < 1) throw std::invalid_argument("overshoot_stats: bins must be >= 1");
  OvershootStats s;
  double sum_upper = 0.0;
  double sum_lower = 0.0;
  for (const auto& d : outcomes) {
    if (d.forced) continue;
    if (d.label == 1) {
      ++s.upper_hits;
      sum_upper += d.overshoot;
      s.max_upper = std::max(s.max_upper, d.overshoot);
    } else {
      ++s.lower_hits;
      sum_lower += d.overshoot;
      s.max_lower = std::max(s.max_lower, d.overshoot);
    }
  }
  if (s.upper_hits + s.lower_hits == 0) throw std::invalid_argument("overshoot_stats: no unforced outcomes");
  s.mean_upper = s.upper_hits > 0 ? sum_upper / s.upper_hits : 0.0;
  s.mean_lower = s.lower_hits > 0 ? sum_lower / s.lower_hits : 0.0;
  s.hist_max = std::max(s.max_upper, s.max_lower);
  s.upper_histogram.assign(bins, 0);
  s.lower_histogram.assign(bins, 0);
  for (const auto& d : outcomes) {
    if (d.forced) continue;
    int bin = s.hist_max > 0.0 ? static_cast<int>(d.overshoot / s.hist_max * bins) : 0;
    bin = std::clamp(bin, 0, bins - 1);
    ++(d.label == 1 ? s.upper_histogram : s.lower_histogram)[bin];
  }
  return s;
}

double mean_hitting_time_with_overshoot(int label, const ErrorRates& rates, const Thresholds& thr,
                                        const OvershootStats& class_stats, double kl) {
  if (!(kl > 0.0)) throw std::invalid_argument("KL divergence must be positive");
  if (label == 1) {
    return ((1.0 - rates.alpha1) * (thr.a1 + class_stats.mean_upper) -
            rates.alpha1 * (thr.a0 + class_stats.mean_lower)) /
           kl;
  }
  return ((1.0 - rates.alpha0) * (thr.a0 + class_stats.mean_lower) - rates.alpha0 * (thr.a1 + class_stats.mean_upper)) /
         kl;
}

double nmse(std::span<const double> estimated, std::span<const double> truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw std::invalid_argument("nmse: inputs must be nonempty and of equal length");
  }
  const double sum_est = std::accumulate(estimated.begin(), estimated.end(), 0.0);
  const double sum_true = std::accumulate(truth.begin(), truth.end(), 0.0);
  if (!(sum_est > 0.0) || !(sum_true > 0.0)) throw std::invalid_argument("nmse: zero total mass");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimated[i] / sum_est - truth[i] / sum_true;
    acc += d * d;
  }
  return acc / static_cast<double>(truth.size());
}

namespace {

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double normal_upper_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_upper_quantile: p must lie in (0, 1)");
  // P(Z > z) = erfc(z / sqrt 2) / 2 is decreasing in z; bisect to full precision.
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<DecisionOutcome> simulate_gauss_sprt(const GaussPairSpec& spec, int label, const Thresholds& thr,
                                                 long n_trials, int max_steps, std::uint64_t seed, int threads) {
  spec.validate();
  thr.validate();
  if (n_trials < 0 || max_steps < 1) throw std::invalid_argument("simulate_gauss_sprt: bad trial or step count");
  const Eigen::VectorXd diff = spec.mu1 - spec.mu0;
  const double offset = 0.5 * (spec.mu1.squaredNorm() - spec.mu0.squaredNorm());
  const Eigen::VectorXd& mu = label == 1 ? spec.mu1 : spec.mu0;
  const int dim = spec.dim();
  std::vector<DecisionOutcome> out(n_trials);
  parallel_for(n_trials, threads, [&](long i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    double llr = 0.0;
    for (int t = 1; t <= max_steps; ++t) {
      double inc = -offset;
      for (int j = 0; j < dim; ++j) inc += diff(j) * (mu(j) + rng.normal());
      llr += inc;
      if (llr >= thr.a1) {
        out[i] = DecisionOutcome{1, t, llr, llr - thr.a1, false};
        return;
      }
      if (llr <= -thr.a0) {
        out[i] = DecisionOutcome{0, t, llr, -(llr + thr.a0), false};
        return;
      }
    }
    out[i] = DecisionOutcome{llr >= 0.0 ? 1 : 0, max_steps, llr, 0.0, true};
  });
  return out;
}

long np_sample_size(const GaussPairSpec& spec, double alpha, double beta) {
  spec.validate();
  if (!(alpha > 0.0 && alpha < 0.5) || !(beta > 0.0 && beta < 0.5)) {
    throw std::invalid_argument("np_sample_size: error rates must lie in (0, 0.5)");
  }
  const double separation = (spec.mu1 - spec.mu0).norm();
  const double root_n = (normal_upper_quantile(alpha) + normal_upper_quantile(beta)) / separation;
  return static_cast<long>(std::ceil(root_n * root_n - 1e-9));
}

NpEfficiencyReport np_efficiency(const GaussPairSpec& spec, double alpha, double beta, long n_trials,
                                 std::uint64_t seed, int threads) {
  if (n_trials < 2) throw std::invalid_argument("np_efficiency: need at least two trials per class");
  NpEfficiencyReport rep;
  rep.alpha = alpha;
  rep.beta = beta;
  rep.np_n = np_sample_size(spec, alpha, beta);
  const Thresholds thr = thresholds_from_error_rates(alpha, beta);
  // The horizon is far beyond the NP sample size; forced trials are counted.
  const int max_steps = static_cast<int>(std::max<long>(100, 50 * rep.np_n));

  std::vector<DecisionOutcome> outcomes;
  std::vector<int> labels;
  for (int y = 0; y < 2; ++y) {
    auto trials = simulate_gauss_sprt(spec, y, thr, n_trials, max_steps, substream_seed(seed, y), threads);
    std::vector<double> taus;
    taus.reserve(trials.size());
    for (const auto& d : trials) {
      taus.push_back(d.tau);
      rep.forced += d.forced ? 1 : 0;
    }
    double sem = 0.0;
    const double mean = mean_and_sem(taus, &sem);
    (y == 0 ? rep.sprt_mean_tau_0 : rep.sprt_mean_tau_1) = mean;
    (y == 0 ? rep.sem_0 : rep.sem_1) = sem / rep.np_n;
    outcomes.insert(outcomes.end(), trials.begin(), trials.end());
    labels.insert(labels.end(), trials.size(), y);
  }
  rep.ratio_0 = rep.sprt_mean_tau_0 / rep.np_n;
  rep.ratio_1 = rep.sprt_mean_tau_1 / rep.np_n;
  rep.measured = error_rates(outcomes, labels);
  return rep;
}

}  // namespace tandem
