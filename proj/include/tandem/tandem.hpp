#pragma once

#include <Eigen/Dense>

namespace tandem {

enum class LlrSource { analytic, brute_force, tandem };

/// Log-likelihood ratio trajectory lambda_1..lambda_T.
///
/// values(t - 1) holds lambda_t. Entries may be +/-inf when an exact oracle
/// hits a window one class cannot produce; has_sentinel flags that case.
struct LLRTrajectory {
  Eigen::VectorXd values;
  LlrSource source = LlrSource::tandem;
  bool has_sentinel = false;

  int length() const { return static_cast<int>(values.size()); }
  double at(int t) const { return values(t - 1); }
};

/// Posterior log-odds for every k-let window.
///
/// Entry (k, s) is log p(y=1 | x_{s-k+1..s}) - log p(y=0 | x_{s-k+1..s})
/// for k = 0..N+1 and s = max(k,1)..T, with s one-based. Row 0 carries the
/// prior log-odds so the order-0 formula needs no special case. Entries
/// outside the defined range are NaN.
class PosteriorTable {
 public:
  PosteriorTable() = default;
  PosteriorTable(int order, int length, double prior_logodds = 0.0);

  int order() const { return order_; }
  int length() const { return length_; }
  double prior_logodds() const { return prior_logodds_; }

  /// Resets the prior and rewrites row 0 to match.
  void set_prior_logodds(double value);

  bool defined(int k, int s) const {
    return k >= 0 && k <= order_ + 1 && s >= (k > 1 ? k : 1) && s <= length_;
  }

  double& operator()(int k, int s) { return entries_(k, s); }
  double operator()(int k, int s) const { return entries_(k, s); }

  /// Raw (N+2) x (T+1) storage; column 0 is unused.
  const Eigen::MatrixXd& entries() const { return entries_; }
  Eigen::MatrixXd& entries() { return entries_; }

 private:
  int order_ = 0;
  int length_ = 0;
  double prior_logodds_ = 0.0;
  Eigen::MatrixXd entries_;
};

/// Gradient of a scalar with respect to a PosteriorTable.
///
/// entries has the table's shape. Row 0 entries are treated as independent
/// inputs (they enter the order-0 formula); prior is the derivative with
/// respect to the explicit prior term only. The total derivative with
/// respect to the prior log-odds is prior + entries.row(0).sum().
struct TableGradient {
  Eigen::MatrixXd entries;
  double prior = 0.0;
};

/// N-th order TANDEM estimate of lambda_t from posterior log-odds.
///
/// For t <= N+1: lambda_t = L[t][t] - prior.
/// For t >= N+2: lambda_t = sum_{s=N+1}^{t} L[N+1][s]
///                        - sum_{s=N+2}^{t} L[N][s-1] - prior.
/// Throws StructuralError when a required entry is NaN or when infinite
/// entries would cancel (inf - inf).
LLRTrajectory tandem_llr(const PosteriorTable& table);

/// Backpropagates upstream sensitivities dJ/dlambda_t (length T) to the
/// table. Requires finite table entries on the used range.
TableGradient tandem_llr_grad(const PosteriorTable& table, const Eigen::Ref<const Eigen::VectorXd>& upstream);

/// Order-0 reference: sum_{s<=t} L[1][s] - t * prior.
LLRTrajectory iid_llr_from_singlets(const PosteriorTable& table);

}  // namespace tandem
