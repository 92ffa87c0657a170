#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tandem/tandem.hpp"

namespace tandem {

/// One labeled time series. frames is T x d_x; row t-1 holds x^{(t)}.
struct LabeledSequence {
  Eigen::MatrixXd frames;
  int label = 0;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

/// Two unit-covariance Gaussians N(mu0, I) and N(mu1, I).
struct GaussPairSpec {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;

  int dim() const { return static_cast<int>(mu0.size()); }
  /// KL(N(mu1, I) || N(mu0, I)) = ||mu1 - mu0||^2 / 2; symmetric here.
  double kl_per_step() const { return 0.5 * (mu1 - mu0).squaredNorm(); }
  void validate() const;

  /// d = 2, mu0 = (2, 0), mu1 = (0, 2).
  static GaussPairSpec density_ratio_default();
  /// Same as `base` with both means multiplied by `factor`.
  static GaussPairSpec scaled(const GaussPairSpec& base, double factor);
};

/// Per-dimension AR(1) around a class mean with stationary start.
struct Ar1Spec {
  double rho = 0.0;
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
  double sigma = 1.0;

  int dim() const { return static_cast<int>(mu0.size()); }
  double stationary_variance() const { return sigma * sigma / (1.0 - rho * rho); }
  void validate() const;
};

/// Order-N discrete Markov chain per class over alphabet {0..A-1}.
///
/// History states are base-A integers of the last N symbols, oldest symbol
/// most significant. cond_y is A^N x A with rows p(x_t | history, y);
/// init_y has length A^N and is the joint pmf of the first N symbols.
struct DiscreteMarkovSpec {
  int order = 0;
  int alphabet = 2;
  Eigen::MatrixXd cond0;
  Eigen::MatrixXd cond1;
  Eigen::VectorXd init0;
  Eigen::VectorXd init1;
  double prior = 0.5;

  int num_states() const;
  const Eigen::MatrixXd& cond(int label) const { return label == 1 ? cond1 : cond0; }
  const Eigen::VectorXd& init(int label) const { return label == 1 ? init1 : init0; }
  /// Throws SpecError on shape problems, negative entries or rows that do
  /// not sum to one within 1e-12.
  void validate() const;

  /// Random valid spec with strictly positive entries.
  static DiscreteMarkovSpec random(int order, int alphabet, double prior, std::uint64_t seed);
};

// Generators. Sequence i is drawn from substream i of `seed`; the first draw
// of each substream is the label.

std::vector<LabeledSequence> gen_iid_gauss(const GaussPairSpec& spec, int n, int length, double prior,
                                           std::uint64_t seed);
/// Frame t ~ N((t/T) mu_y, I), independent across t.
std::vector<LabeledSequence> gen_ramp_gauss(const GaussPairSpec& spec, int n, int length, double prior,
                                            std::uint64_t seed);
std::vector<LabeledSequence> gen_ar1_gauss(const Ar1Spec& spec, int n, int length, double prior, std::uint64_t seed);
/// Symbols are stored as indices in a T x 1 frame matrix.
std::vector<LabeledSequence> gen_discrete_markov(const DiscreteMarkovSpec& spec, int n, int length,
                                                 std::uint64_t seed);

// Closed-form oracles.

LLRTrajectory analytic_llr_iid(const LabeledSequence& seq, const GaussPairSpec& spec);
LLRTrajectory analytic_llr_ramp(const LabeledSequence& seq, const GaussPairSpec& spec);
LLRTrajectory analytic_llr_ar1(const LabeledSequence& seq, const Ar1Spec& spec);

/// Default cap on A^(N+1) work per step for exact discrete computations.
inline constexpr long kDefaultEnumerationCap = 1L << 22;

/// Exact window probability p(x_{first..last} | y) under the chain, by a
/// masked forward pass (observed positions clamped, others marginalized).
/// first and last are one-based and inclusive.
double window_probability(const DiscreteMarkovSpec& spec, std::span<const int> symbols, int first, int last,
                          int label, long cap = kDefaultEnumerationCap);

/// Exact posterior log-odds table of order `order_out` for one sequence.
/// Entries for windows with zero probability under exactly one class are
/// +/-inf; windows impossible under both classes raise SpecError.
PosteriorTable exact_posteriors_discrete(const LabeledSequence& seq, const DiscreteMarkovSpec& spec, int order_out,
                                         long cap = kDefaultEnumerationCap);

/// Joint LLR via the chain rule on the spec's tables.
LLRTrajectory brute_force_llr_discrete(const LabeledSequence& seq, const DiscreteMarkovSpec& spec);

/// Symbol indices of a discrete sequence (column 0 of frames).
std::vector<int> symbols_of(const LabeledSequence& seq);

/// One-hot encodes a discrete sequence into a T x A frame matrix.
LabeledSequence one_hot(const LabeledSequence& seq, int alphabet);

}  // namespace tandem
