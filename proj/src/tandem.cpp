#include "tandem/tandem.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tandem/errors.hpp"

namespace tandem {

PosteriorTable::PosteriorTable(int order, int length, double prior_logodds)
    : order_(order), length_(length), prior_logodds_(prior_logodds) {
  if (order < 0) throw std::invalid_argument("PosteriorTable: order must be >= 0");
  if (length < 1) throw std::invalid_argument("PosteriorTable: length must be >= 1");
  entries_ = Eigen::MatrixXd::Constant(order + 2, length + 1, std::numeric_limits<double>::quiet_NaN());
  set_prior_logodds(prior_logodds);
}

void PosteriorTable::set_prior_logodds(double value) {
  prior_logodds_ = value;
  entries_.row(0).tail(length_).setConstant(value);
}

namespace {

double required(const PosteriorTable& table, int k, int s) {
  const double v = table(k, s);
  if (std::isnan(v)) {
    throw StructuralError("posterior table entry L[" + std::to_string(k) + "][" + std::to_string(s) + "] is missing");
  }
  return v;
}

double checked_difference(double plus, double minus, int t) {
  const double out = plus - minus;
  if (std::isnan(out)) {
    throw StructuralError("lambda_" + std::to_string(t) + " is undefined (inf - inf between multiplet sums)");
  }
  return out;
}

}  // namespace

LLRTrajectory tandem_llr(const PosteriorTable& table) {
  const int order = table.order();
  const int length = table.length();
  const double prior = table.prior_logodds();
  if (!std::isfinite(prior)) throw StructuralError("prior log-odds must be finite");

  LLRTrajectory out;
  out.source = LlrSource::tandem;
  out.values.resize(length);

  // Boundary: the whole prefix fits inside one (N+1)-window.
  const int boundary = std::min(length, order + 1);
  for (int t = 1; t <= boundary; ++t) {
    out.values(t - 1) = required(table, t, t) - prior;
  }

  // Running sums of the (N+1)-let and N-let terms; kept apart so that an
  // infinite entry on both sides is reported instead of silently cancelling.
  double plus = 0.0;
  double minus = 0.0;
  for (int t = order + 1; t <= length; ++t) {
    plus += required(table, order + 1, t);
    if (t >= order + 2) {
      minus += required(table, order, t - 1);
      out.values(t - 1) = checked_difference(plus, minus, t) - prior;
    }
  }

  out.has_sentinel = !out.values.allFinite();
  return out;
}

TableGradient tandem_llr_grad(const PosteriorTable& table, const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  const int order = table.order();
  const int length = table.length();
  if (upstream.size() != length) {
    throw StructuralError("tandem_llr_grad: upstream has length " + std::to_string(upstream.size()) +
                          ", table length is " + std::to_string(length));
  }

  TableGradient grad;
  grad.entries = Eigen::MatrixXd::Zero(order + 2, length + 1);
  grad.prior = -upstream.sum();

  const int boundary = std::min(length, order + 1);
  for (int t = 1; t <= boundary; ++t) grad.entries(t, t) += upstream(t - 1);

  // lambda_t for t >= N+2 depends on L[N+1][s] for s in [N+1, t] and on
  // L[N][s-1] for s in [N+2, t]; accumulate suffix sums of upstream.
  double suffix = 0.0;
  for (int t = length; t >= order + 1; --t) {
    if (t >= order + 2) suffix += upstream(t - 1);
    // Entry L[N+1][t] feeds every lambda_u with u >= max(t, N+2).
    grad.entries(order + 1, t) += suffix;
    if (t >= order + 2) grad.entries(order, t - 1) -= suffix;
  }
  return grad;
}

LLRTrajectory iid_llr_from_singlets(const PosteriorTable& table) {
  LLRTrajectory out;
  out.source = LlrSource::tandem;
  out.values.resize(table.length());
  double acc = 0.0;
  for (int t = 1; t <= table.length(); ++t) {
    acc += required(table, 1, t);
    out.values(t - 1) = acc - t * table.prior_logodds();
  }
  out.has_sentinel = !out.values.allFinite();
  return out;
}

}  // namespace tandem
