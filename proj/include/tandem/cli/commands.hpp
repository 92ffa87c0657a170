#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tandem/cli/config.hpp"
#include "tandem/nnet.hpp"

namespace tandem::cli {

struct RunOptions {
  /// Overrides config.output_dir when nonempty.
  std::filesystem::path out;
  /// Overrides config.dataset.seed.
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool plots = true;
};

/// Config with command-line overrides applied.
ExperimentConfig effective_config(const ExperimentConfig& config, const RunOptions& options);

// Each command takes the effective config, holds the output-directory lock
// for its duration, writes its files atomically and returns the exit code.

/// train.csv, val.csv, test.csv
int cmd_generate(const ExperimentConfig& config, const RunOptions& options);
/// model snapshot, train_report.csv
int cmd_train(const ExperimentConfig& config, const RunOptions& options);
/// sat_curve.csv, error_rates.csv, decisions.csv, sat_curve.svg
int cmd_evaluate(const ExperimentConfig& config, const RunOptions& options);
/// np_efficiency.csv
int cmd_np_compare(const ExperimentConfig& config, const RunOptions& options);
/// oracle_report.csv; nonzero exit when any check fails.
int cmd_oracle_check(const ExperimentConfig& config, const RunOptions& options);
/// sat_curve_<variant>.csv and train_report_<variant>.csv per loss
/// configuration, ablation.svg
int cmd_ablation(const ExperimentConfig& config, const RunOptions& options);

// Pieces shared by the commands and their tests.

enum class Split { train = 0, val = 1, test = 2 };

/// Split of the configured dataset; a pure function of the config.
std::vector<LabeledSequence> make_split(const DatasetConfig& dataset, Split split);

/// Model inputs for a split (one-hot for discrete chains).
std::vector<LabeledSequence> model_inputs(const DatasetConfig& dataset, std::vector<LabeledSequence> sequences);

/// Frame dimension seen by the estimator.
int input_dim(const DatasetConfig& dataset);

/// Oracle LLR of a raw (not one-hot) sequence under the configured generator.
LLRTrajectory analytic_llr(const DatasetConfig& dataset, const LabeledSequence& seq);

struct AblationVariant {
  std::string name;
  LossWeights weights;
};

/// LLLR+multiplet, multiplet only, LLLR only, bounded KLIEP+multiplet.
std::vector<AblationVariant> ablation_variants();

struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string criterion;
  double measured = 0.0;
};

std::vector<OracleCheck> run_oracle_checks(const ExperimentConfig& config, int threads);

/// Seeds derived from the master seed, one substream per purpose.
enum class SeedPurpose : std::uint64_t {
  train_data = 0,
  val_data = 1,
  test_data = 2,
  model_init = 3,
  training = 4,
  monte_carlo = 5,
  oracle = 6,
};
std::uint64_t derived_seed(std::uint64_t master, SeedPurpose purpose);

}  // namespace tandem::cli
