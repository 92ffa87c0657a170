#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tandem/tandem.hpp"

namespace tandem {

/// log(1e5 / 1e-5): clamp on |lambda| for the bounded KLIEP loss.
inline constexpr double kDefaultKliepClamp = 23.025850929940457;

/// A scalar loss over LLR trajectories and dLoss/dlambda per sample.
struct LlrLoss {
  double value = 0.0;
  std::vector<Eigen::VectorXd> grad;
};

/// Multiplet cross-entropy with its per-k terms and dLoss/dL[k][s] per
/// sample (table-shaped, zero outside the summed range).
struct MultipletLoss {
  double value = 0.0;
  /// per_k(k) for k = 1..N+1; slot 0 is unused.
  Eigen::VectorXd per_k;
  std::vector<Eigen::MatrixXd> grad;
};

/// LLLR: mean over samples and t = 1..T of |y - sigmoid(lambda_t)|.
LlrLoss lllr(std::span<const LLRTrajectory> llrs, std::span<const int> labels);

/// Sum over k = 1..N+1 of mean -log p(y | k-let), with the k-let ending
/// times t = k..T-(N+1-k) so each k contributes exactly T-N terms per
/// sample. Computed from the log-odds with a stable softplus.
MultipletLoss multiplet_ce(std::span<const PosteriorTable> tables, std::span<const int> labels);

/// Symmetrized KLIEP divergence terms with lambda clamped to [-clamp, clamp],
/// averaged over t. The normalization constraints are not enforced.
/// Requires at least one sample of each class.
LlrLoss kliep_sym_bounded(std::span<const LLRTrajectory> llrs, std::span<const int> labels,
                          double clamp = kDefaultKliepClamp);

struct LossWeights {
  double lllr = 1.0;
  double multiplet = 1.0;
  double kliep = 0.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Components evaluated for one batch; disabled ones may be left empty.
struct LossComponents {
  std::optional<LlrLoss> lllr;
  std::optional<MultipletLoss> multiplet;
  std::optional<LlrLoss> kliep;
};

struct LossBreakdown {
  double total = 0.0;
  double lllr = 0.0;
  double multiplet = 0.0;
  Eigen::VectorXd multiplet_per_k;
  double kliep = 0.0;
  /// Weighted dTotal/dlambda per sample (LLLR and KLIEP routes).
  std::vector<Eigen::VectorXd> llr_grad;
  /// Weighted dTotal/dL per sample (multiplet route).
  std::vector<Eigen::MatrixXd> table_grad;
};

/// Weighted sum of the enabled components. A component with nonzero weight
/// must be present; all-zero weights are rejected.
LossBreakdown total_loss(const LossComponents& components, const LossWeights& weights);

/// Numerically stable logistic function.
double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace tandem
