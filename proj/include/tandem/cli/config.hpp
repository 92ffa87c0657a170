#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tandem/losses.hpp"
#include "tandem/synthdata.hpp"

namespace tandem::cli {

inline constexpr const char* kConfigSchema = "tandem-config v1";

/// Bad configuration: the message names the offending line or field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  /// iid_gauss | ramp_gauss | ar1_gauss | discrete_markov
  std::string generator = "iid_gauss";
  std::vector<double> mu0{2.0, 0.0};
  std::vector<double> mu1{0.0, 2.0};
  double rho = 0.0;
  double sigma = 1.0;
  /// Discrete chains are drawn with DiscreteMarkovSpec::random(order, alphabet, prior, spec_seed).
  int order = 1;
  int alphabet = 2;
  std::uint64_t spec_seed = 1;
  int n_train = 1000;
  int n_val = 200;
  int n_test = 1000;
  int length = 20;
  double prior = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
  int hidden = 32;
  int order = 1;
  /// Relative paths resolve against the output directory.
  std::string snapshot = "model.txt";

  bool operator==(const ModelConfig&) const = default;
};

struct LossConfig {
  LossWeights weights;
  double kliep_clamp = kDefaultKliepClamp;

  bool operator==(const LossConfig&) const = default;
};

struct TrainSection {
  double lr = 1e-3;
  int epochs = 50;
  int batch = 64;

  bool operator==(const TrainSection&) const = default;
};

struct EvalConfig {
  std::vector<double> thresholds;
  /// model | analytic
  std::string llr_source = "model";
  /// Monte Carlo trials per class for np-compare and oracle checks.
  long trials = 20000;
  std::vector<double> np_alphas{1e-3, 0.1};

  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  LossConfig loss;
  TrainSection train;
  EvalConfig eval;
  std::string output_dir = "out";

  /// Defaults with the standard threshold grid filled in.
  static ExperimentConfig defaults();

  /// Checks ranges and cross-field constraints; throws ConfigError.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses JSON text. Missing fields keep their defaults; unknown fields and
/// type errors are rejected. `source` prefixes diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every field present.
std::string serialize_config(const ExperimentConfig& config);

/// Gaussian spec built from the dataset section (iid or ramp generators).
GaussPairSpec gauss_spec(const DatasetConfig& dataset);
Ar1Spec ar1_spec(const DatasetConfig& dataset);
DiscreteMarkovSpec discrete_spec(const DatasetConfig& dataset);

}  // namespace tandem::cli
