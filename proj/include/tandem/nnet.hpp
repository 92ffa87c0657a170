#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tandem/losses.hpp"
#include "tandem/synthdata.hpp"
#include "tandem/tandem.hpp"

namespace tandem {

/// Parameter blocks of the recurrent cell and its two-logit readout.
struct EstimatorParams {
  Eigen::MatrixXd w_in;   // d_in x H
  Eigen::MatrixXd w_rec;  // H x H
  Eigen::VectorXd b_h;    // H
  Eigen::MatrixXd w_out;  // H x 2
  Eigen::VectorXd b_out;  // 2

  static EstimatorParams zeros(int input_dim, int hidden);

  Eigen::Index size() const;
  /// Concatenation of all blocks in declaration order, column-major.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& flat);
  bool all_finite() const;

  EstimatorParams& operator+=(const EstimatorParams& other);
  bool operator==(const EstimatorParams& other) const;
};

/// Sliding-window tanh recurrent posterior estimator.
///
/// Every k-let posterior is computed by running the cell from a zero hidden
/// state over exactly that window, so L[k][s] depends on x_{s-k+1..s} only.
class RecurrentEstimator {
 public:
  RecurrentEstimator(int input_dim, int hidden, int order);

  /// Xavier-uniform weights, zero biases.
  static RecurrentEstimator initialized(int input_dim, int hidden, int order, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  int order() const { return order_; }

  double prior_logodds() const { return prior_logodds_; }
  void set_prior_logodds(double value) { prior_logodds_ = value; }

  const EstimatorParams& params() const { return params_; }
  /// Mutable access invalidates outstanding forward caches.
  EstimatorParams& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  /// FNV-1a hash of the parameter bytes.
  std::uint64_t snapshot_id() const;

 private:
  int input_dim_;
  int hidden_;
  int order_;
  double prior_logodds_ = 0.0;
  EstimatorParams params_;
  std::uint64_t version_ = 0;
};

/// Activations kept by posterior_table for the backward pass.
struct ForwardCache {
  const RecurrentEstimator* model = nullptr;
  std::uint64_t version = 0;
  Eigen::MatrixXd inputs;                // d_in x T
  std::vector<Eigen::MatrixXd> hidden;   // hidden[j]: H x (T-j+1) states after step j; hidden[0] = 0

  /// Mean Euclidean norm of the hidden features over all windows and steps.
  double mean_feature_norm() const;
};

/// Posterior log-odds table of order model.order() for one sequence.
PosteriorTable posterior_table(const RecurrentEstimator& model, const LabeledSequence& seq,
                               ForwardCache* cache = nullptr);

/// Gradient of a scalar with respect to the parameters, given its gradient
/// with respect to the table entries (rows k >= 1 are used). Throws
/// std::logic_error when the cache was produced by another model or before
/// the parameters changed.
EstimatorParams backward(const RecurrentEstimator& model, const ForwardCache& cache,
                         const Eigen::Ref<const Eigen::MatrixXd>& table_grad);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// One bias-corrected Adam update in place. Throws TrainingError on a
/// non-finite gradient.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  LossWeights weights;
  double kliep_clamp = kDefaultKliepClamp;
  int epochs = 50;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double total = 0.0;
  double lllr = 0.0;
  double multiplet = 0.0;
  double kliep = 0.0;
  double val_balanced_acc = 0.0;
  double feature_norm = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> records;
  std::uint64_t snapshot_id = 0;
};

/// Loss and parameter gradient of one batch.
struct BatchEvaluation {
  LossBreakdown loss;
  EstimatorParams grad;
  double feature_norm = 0.0;
};

BatchEvaluation evaluate_batch(const RecurrentEstimator& model, std::span<const LabeledSequence> batch,
                               const LossWeights& weights, double kliep_clamp = kDefaultKliepClamp);

using EpochHook = std::function<void(const RecurrentEstimator&, const EpochRecord&)>;

/// Minibatch Adam training. Shuffles come from substream `epoch` of
/// config.seed. Validation accuracy is the balanced accuracy of sign(lambda_T);
/// it is NaN when the validation set lacks a class.
TrainReport train(RecurrentEstimator& model, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& config, const EpochHook& hook = {});

/// TANDEM LLR trajectory of a sequence under the model.
LLRTrajectory estimate_llr(const RecurrentEstimator& model, const LabeledSequence& seq);

/// Text snapshot with header `tandem-model v1, d_in=<int>, H=<int>, N=<int>`
/// and hexadecimal floats, so save/load round-trips bit-exactly.
void save_model(const RecurrentEstimator& model, std::ostream& out);
RecurrentEstimator load_model(std::istream& in);
void save_model(const RecurrentEstimator& model, const std::string& path);
RecurrentEstimator load_model(const std::string& path);

}  // namespace tandem
