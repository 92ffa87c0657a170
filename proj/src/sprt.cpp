#include "tandem/sprt.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tandem {

void Thresholds::validate() const {
  if (!(a0 >= 0.0) || !(a1 >= 0.0)) throw std::invalid_argument("thresholds must satisfy a0 >= 0 and a1 >= 0");
}

Thresholds thresholds_from_error_rates(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("error rates must lie in (0, 1)");
  }
  if (!(alpha + beta < 1.0)) throw std::invalid_argument("error rates must satisfy alpha + beta < 1");
  return Thresholds{std::log((1.0 - alpha) / beta), std::log((1.0 - beta) / alpha)};
}

namespace {

std::optional<DecisionOutcome> scan(const LLRTrajectory& llr, const Thresholds& thr, int horizon) {
  thr.validate();
  for (int t = 1; t <= horizon; ++t) {
    const double v = llr.at(t);
    if (std::isnan(v)) throw std::invalid_argument("LLR trajectory contains NaN at t=" + std::to_string(t));
    if (v >= thr.a1) return DecisionOutcome{1, t, v, v - thr.a1, false};
    if (v <= -thr.a0) return DecisionOutcome{0, t, v, -(v + thr.a0), false};
  }
  return std::nullopt;
}

}  // namespace

std::optional<DecisionOutcome> run_sprt(const LLRTrajectory& llr, const Thresholds& thr) {
  if (llr.length() == 0) throw std::invalid_argument("run_sprt: empty trajectory");
  return scan(llr, thr, llr.length());
}

DecisionOutcome run_sprt_truncated(const LLRTrajectory& llr, const Thresholds& thr, int horizon) {
  if (llr.length() == 0) throw std::invalid_argument("run_sprt_truncated: empty trajectory");
  if (horizon < 1 || horizon > llr.length()) throw std::invalid_argument("run_sprt_truncated: horizon outside [1, T]");
  if (auto decided = scan(llr, thr, horizon)) return *decided;
  const double last = llr.at(horizon);
  return DecisionOutcome{last >= 0.0 ? 1 : 0, horizon, last, 0.0, true};
}

int neyman_pearson(const LLRTrajectory& llr, int n, double h) {
  if (n < 1 || n > llr.length()) throw std::invalid_argument("neyman_pearson: sample count outside [1, T]");
  return llr.at(n) >= h ? 1 : 0;
}

}  // namespace tandem
