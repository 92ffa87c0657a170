#include "tandem/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tandem/cli/io.hpp"
#include "tandem/eval.hpp"
#include "tandem/parallel.hpp"
#include "tandem/rng.hpp"

namespace tandem::cli {

namespace fs = std::filesystem;

std::uint64_t derived_seed(std::uint64_t master, SeedPurpose purpose) {
  return substream_seed(master, static_cast<std::uint64_t>(purpose));
}

ExperimentConfig effective_config(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig c = config;
  if (!options.out.empty()) c.output_dir = options.out.string();
  if (options.seed) c.dataset.seed = *options.seed;
  c.validate();
  return c;
}

std::vector<LabeledSequence> make_split(const DatasetConfig& d, Split split) {
  const int n = split == Split::train ? d.n_train : split == Split::val ? d.n_val : d.n_test;
  const auto seed = derived_seed(d.seed, static_cast<SeedPurpose>(static_cast<std::uint64_t>(split)));
  if (d.generator == "iid_gauss") return gen_iid_gauss(gauss_spec(d), n, d.length, d.prior, seed);
  if (d.generator == "ramp_gauss") return gen_ramp_gauss(gauss_spec(d), n, d.length, d.prior, seed);
  if (d.generator == "ar1_gauss") return gen_ar1_gauss(ar1_spec(d), n, d.length, d.prior, seed);
  if (d.generator == "discrete_markov") return gen_discrete_markov(discrete_spec(d), n, d.length, seed);
  throw ConfigError("config: field 'dataset.generator': unknown generator '" + d.generator + "'");
}

std::vector<LabeledSequence> model_inputs(const DatasetConfig& d, std::vector<LabeledSequence> sequences) {
  if (d.generator != "discrete_markov") return sequences;
  for (auto& s : sequences) s = one_hot(s, d.alphabet);
  return sequences;
}

int input_dim(const DatasetConfig& d) {
  return d.generator == "discrete_markov" ? d.alphabet : static_cast<int>(d.mu0.size());
}

LLRTrajectory analytic_llr(const DatasetConfig& d, const LabeledSequence& seq) {
  if (d.generator == "iid_gauss") return analytic_llr_iid(seq, gauss_spec(d));
  if (d.generator == "ramp_gauss") return analytic_llr_ramp(seq, gauss_spec(d));
  if (d.generator == "ar1_gauss") return analytic_llr_ar1(seq, ar1_spec(d));
  return brute_force_llr_discrete(seq, discrete_spec(d));
}

std::vector<AblationVariant> ablation_variants() {
  return {{"lllr_multiplet", {1.0, 1.0, 0.0}},
          {"multiplet", {0.0, 1.0, 0.0}},
          {"lllr", {1.0, 0.0, 0.0}},
          {"kliep_multiplet", {0.0, 1.0, 1.0}}};
}

namespace {

fs::path resolve(const ExperimentConfig& c, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(c.output_dir) / p;
}

TrainConfig train_config(const ExperimentConfig& c, const LossWeights& weights) {
  TrainConfig t;
  t.weights = weights;
  t.kliep_clamp = c.loss.kliep_clamp;
  t.epochs = c.train.epochs;
  t.batch_size = c.train.batch;
  t.adam.lr = c.train.lr;
  t.seed = derived_seed(c.dataset.seed, SeedPurpose::training);
  return t;
}

RecurrentEstimator fresh_model(const ExperimentConfig& c) {
  auto model = RecurrentEstimator::initialized(input_dim(c.dataset), c.model.hidden, c.model.order,
                                               derived_seed(c.dataset.seed, SeedPurpose::model_init));
  model.set_prior_logodds(std::log(c.dataset.prior / (1.0 - c.dataset.prior)));
  return model;
}

struct TrainedModel {
  RecurrentEstimator model;
  TrainReport report;
};

TrainedModel train_variant(const ExperimentConfig& c, const LossWeights& weights) {
  const auto train_set = model_inputs(c.dataset, make_split(c.dataset, Split::train));
  const auto val_set = model_inputs(c.dataset, make_split(c.dataset, Split::val));
  TrainedModel out{fresh_model(c), {}};
  const auto hook = [](const RecurrentEstimator&, const EpochRecord& r) {
    std::ostringstream msg;
    msg << "epoch " << r.epoch << " total=" << r.total << " lllr=" << r.lllr << " multiplet=" << r.multiplet
        << " kliep=" << r.kliep << " val_ba=" << r.val_balanced_acc << " feature_norm=" << r.feature_norm;
    log(LogLevel::debug, msg.str());
  };
  out.report = train(out.model, train_set, val_set, train_config(c, weights), hook);
  if (!out.report.records.empty() && out.report.records.back().feature_norm <= 1e-3) {
    log(LogLevel::error, "bottleneck features collapsed (mean norm <= 1e-3): trivial solution reached");
  }
  return out;
}

std::vector<LLRTrajectory> model_llrs(const RecurrentEstimator& model, std::span<const LabeledSequence> inputs,
                                      int threads) {
  std::vector<LLRTrajectory> out(inputs.size());
  parallel_for(static_cast<long>(inputs.size()), threads, [&](long i) { out[i] = estimate_llr(model, inputs[i]); });
  return out;
}

std::vector<int> labels_of(std::span<const LabeledSequence> sequences) {
  std::vector<int> labels;
  labels.reserve(sequences.size());
  for (const auto& s : sequences) labels.push_back(s.label);
  return labels;
}

std::vector<SatPoint> sweep(const ExperimentConfig& c, std::span<const LLRTrajectory> llrs, std::span<const int> labels) {
  return sat_curve(llrs, labels, c.eval.thresholds, c.dataset.length);
}

SvgSeries series_of(const std::string& name, std::span<const SatPoint> points) {
  SvgSeries s{name, {}, {}};
  for (const auto& p : points) {
    s.x.push_back(p.mean_hitting_time);
    s.y.push_back(p.balanced_accuracy);
  }
  return s;
}

void require_test_set(const ExperimentConfig& c) {
  if (c.dataset.n_test < 1) throw ConfigError("config: field 'dataset.n_test': evaluation needs a test set");
}

}  // namespace

int cmd_generate(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  OutputLock lock(c.output_dir);
  for (auto [split, name] : {std::pair{Split::train, "train.csv"}, {Split::val, "val.csv"}, {Split::test, "test.csv"}}) {
    const auto data = make_split(c.dataset, split);
    write_file_atomic(resolve(c, name), format_dataset(data));
    log(LogLevel::info, std::string("wrote ") + name + " (" + std::to_string(data.size()) + " sequences)");
  }
  return 0;
}

int cmd_train(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  OutputLock lock(c.output_dir);
  auto trained = train_variant(c, c.loss.weights);
  std::ostringstream snapshot;
  save_model(trained.model, snapshot);
  write_file_atomic(resolve(c, c.model.snapshot), snapshot.str());
  write_file_atomic(resolve(c, "train_report.csv"), format_train_report(trained.report.records));
  log(LogLevel::info, "trained " + std::to_string(trained.report.records.size()) + " epochs; snapshot " +
                          resolve(c, c.model.snapshot).string());
  return 0;
}

int cmd_evaluate(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  require_test_set(c);
  OutputLock lock(c.output_dir);
  const auto raw = make_split(c.dataset, Split::test);
  const auto labels = labels_of(raw);

  std::vector<LLRTrajectory> llrs;
  if (c.eval.llr_source == "analytic") {
    llrs.resize(raw.size());
    parallel_for(static_cast<long>(raw.size()), options.threads,
                 [&](long i) { llrs[i] = analytic_llr(c.dataset, raw[i]); });
  } else {
    const fs::path snapshot = resolve(c, c.model.snapshot);
    if (!fs::exists(snapshot)) {
      throw ConfigError("config: field 'model.snapshot': file " + snapshot.string() + " does not exist");
    }
    const RecurrentEstimator model = load_model(snapshot.string());
    if (model.input_dim() != input_dim(c.dataset) || model.order() != c.model.order) {
      throw ConfigError("config: field 'model.snapshot': snapshot shape does not match the config");
    }
    const auto inputs = model_inputs(c.dataset, raw);
    llrs = model_llrs(model, inputs, options.threads);
  }

  const auto points = sweep(c, llrs, labels);
  std::string rates(kErrorRatesHeader);
  rates += '\n';
  std::string decisions(kDecisionsHeader);
  decisions += '\n';
  for (double a : c.eval.thresholds) {
    const Thresholds thr = Thresholds::symmetric(a);
    std::vector<DecisionOutcome> outcomes;
    outcomes.reserve(llrs.size());
    for (std::size_t i = 0; i < llrs.size(); ++i) {
      const auto d = run_sprt_truncated(llrs[i], thr, c.dataset.length);
      outcomes.push_back(d);
      decisions += format_double(thr.a0) + "," + format_double(thr.a1) + "," + std::to_string(i) + "," +
                   std::to_string(labels[i]) + "," + std::to_string(d.label) + "," + std::to_string(d.tau) + "," +
                   format_double(d.terminal_llr) + "," + format_double(d.overshoot) + "," + (d.forced ? "1" : "0") +
                   "\n";
    }
    const ErrorRates r = error_rates(outcomes, labels);
    rates += format_double(thr.a0) + "," + format_double(thr.a1) + "," + format_double(r.alpha0) + "," +
             format_double(r.alpha1) + "," + format_double(r.sem0) + "," + format_double(r.sem1) + "," +
             std::to_string(r.n0) + "," + std::to_string(r.n1) + "\n";
  }
  write_file_atomic(resolve(c, "sat_curve.csv"), format_sat_curve(points));
  write_file_atomic(resolve(c, "error_rates.csv"), rates);
  write_file_atomic(resolve(c, "decisions.csv"), decisions);
  if (options.plots) {
    const std::vector<SvgSeries> series{series_of(c.eval.llr_source, points)};
    write_file_atomic(resolve(c, "sat_curve.svg"), sat_svg("SAT curve", series));
  }
  log(LogLevel::info, "evaluated " + std::to_string(raw.size()) + " sequences at " +
                          std::to_string(c.eval.thresholds.size()) + " thresholds");
  return 0;
}

int cmd_np_compare(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  if (c.dataset.generator != "iid_gauss") {
    throw ConfigError("config: field 'dataset.generator': np-compare requires iid_gauss");
  }
  OutputLock lock(c.output_dir);
  std::vector<NpEfficiencyReport> reports;
  const auto spec = gauss_spec(c.dataset);
  for (std::size_t i = 0; i < c.eval.np_alphas.size(); ++i) {
    const double alpha = c.eval.np_alphas[i];
    const auto seed = substream_seed(derived_seed(c.dataset.seed, SeedPurpose::monte_carlo), i);
    reports.push_back(np_efficiency(spec, alpha, alpha, c.eval.trials, seed, options.threads));
    const auto& r = reports.back();
    log(LogLevel::info, "alpha=beta=" + format_double(alpha) + ": n=" + std::to_string(r.np_n) +
                            " ratio0=" + format_double(r.ratio_0) + " ratio1=" + format_double(r.ratio_1));
  }
  write_file_atomic(resolve(c, "np_efficiency.csv"), format_np_efficiency(reports));
  return 0;
}

namespace {

DiscreteMarkovSpec oracle_fixture(const ExperimentConfig& c) {
  if (c.dataset.generator == "discrete_markov") return discrete_spec(c.dataset);
  return DiscreteMarkovSpec::random(2, 3, 0.5, 7);
}

OracleCheck check_tandem_exactness(const ExperimentConfig& c) {
  const auto spec = oracle_fixture(c);
  const int length = std::clamp(c.dataset.length, std::max(spec.order, 1), 8);
  const auto seqs = gen_discrete_markov(spec, 50, length, derived_seed(c.dataset.seed, SeedPurpose::oracle));
  double worst = 0.0;
  for (const auto& s : seqs) {
    const auto truth = brute_force_llr_discrete(s, spec);
    for (int order = spec.order; order <= std::max(spec.order, 3); ++order) {
      const auto est = tandem_llr(exact_posteriors_discrete(s, spec, order));
      for (int t = 0; t < length; ++t) {
        const double a = est.values(t);
        const double b = truth.values(t);
        if (std::isinf(a) || std::isinf(b)) {
          worst = std::max(worst, a == b ? 0.0 : std::numeric_limits<double>::infinity());
        } else {
          worst = std::max(worst, std::abs(a - b));
        }
      }
    }
  }
  return {"tandem_exactness", worst < 1e-9, "max_abs_err<1e-9", worst};
}

OracleCheck check_order0(const ExperimentConfig& c) {
  Rng rng(derived_seed(c.dataset.seed, SeedPurpose::oracle) ^ 0x5bd1e995ULL);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int length = 1 + static_cast<int>(rng.below(20));
    PosteriorTable table(0, length, 4.0 * rng.uniform() - 2.0);
    for (int s = 1; s <= length; ++s) table(1, s) = 10.0 * rng.normal();
    const auto llr = tandem_llr(table);
    double sum = 0.0;
    for (int t = 1; t <= length; ++t) {
      sum += table(1, t);
      worst = std::max(worst, std::abs(llr.at(t) - (sum - t * table.prior_logodds())));
    }
  }
  return {"order0_reduction", worst < 1e-12, "max_abs_err<1e-12", worst};
}

OracleCheck check_gradients(const ExperimentConfig& c) {
  Rng rng(derived_seed(c.dataset.seed, SeedPurpose::oracle) ^ 0x27d4eb2fULL);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const int order = static_cast<int>(rng.below(3));
    auto model = RecurrentEstimator::initialized(2, 3, order, rng.next_u64());
    Ar1Spec spec;
    spec.rho = 0.5;
    spec.mu0 = Eigen::Vector2d(0.5, 0.0);
    spec.mu1 = Eigen::Vector2d(0.0, 0.5);
    auto batch = gen_ar1_gauss(spec, 4, order + 3, 0.5, rng.next_u64());
    batch[0].label = 0;
    batch[1].label = 1;
    const LossWeights weights{1.0, 1.0, 1.0};
    const Eigen::VectorXd analytic = evaluate_batch(model, batch, weights).grad.flatten();
    const Eigen::VectorXd theta = model.params().flatten();
    Eigen::VectorXd numeric(theta.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd probe = theta;
      probe(i) += h;
      model.mutable_params().assign(probe);
      const double up = evaluate_batch(model, batch, weights).loss.total;
      probe(i) -= 2.0 * h;
      model.mutable_params().assign(probe);
      const double down = evaluate_batch(model, batch, weights).loss.total;
      numeric(i) = (up - down) / (2.0 * h);
    }
    model.mutable_params().assign(theta);
    const double scale = std::max(analytic.norm(), numeric.norm());
    worst = std::max(worst, scale > 0.0 ? (analytic - numeric).norm() / scale : 0.0);
  }
  return {"gradient_check", worst < 1e-5, "rel_err<1e-5", worst};
}

GaussPairSpec mc_spec(const ExperimentConfig& c, double fallback_scale) {
  if (c.dataset.generator == "iid_gauss") return gauss_spec(c.dataset);
  return GaussPairSpec::scaled(GaussPairSpec::density_ratio_default(), fallback_scale);
}

OracleCheck check_wald(const ExperimentConfig& c, int threads) {
  const auto spec = mc_spec(c, 0.25);
  const Thresholds thr = Thresholds::symmetric(std::log(19.0));
  const auto seed = derived_seed(c.dataset.seed, SeedPurpose::oracle);
  std::vector<DecisionOutcome> outcomes;
  std::vector<int> labels;
  for (int y = 0; y < 2; ++y) {
    auto part = simulate_gauss_sprt(spec, y, thr, c.eval.trials, 100000, substream_seed(seed, 100 + y), threads);
    outcomes.insert(outcomes.end(), part.begin(), part.end());
    labels.insert(labels.end(), part.size(), y);
  }
  const auto rates = error_rates(outcomes, labels);
  const auto report = wald_bound_check(rates, thr, 3.0);
  return {"wald_bounds", report.holds0 && report.holds1, "alpha_bounds_within_3sem", rates.alpha0};
}

OracleCheck check_hitting_time(const ExperimentConfig& c, int threads) {
  const auto spec = GaussPairSpec::scaled(GaussPairSpec::density_ratio_default(), 0.05);
  const Thresholds thr = Thresholds::symmetric(std::log(19.0));
  const auto seed = derived_seed(c.dataset.seed, SeedPurpose::oracle);
  const long trials = std::min<long>(c.eval.trials, 20000);
  std::vector<DecisionOutcome> outcomes;
  std::vector<int> labels;
  double mean_tau1 = 0.0;
  for (int y = 0; y < 2; ++y) {
    auto part = simulate_gauss_sprt(spec, y, thr, trials, 1000000, substream_seed(seed, 200 + y), threads);
    if (y == 1) {
      for (const auto& d : part) mean_tau1 += d.tau;
      mean_tau1 /= static_cast<double>(part.size());
    }
    outcomes.insert(outcomes.end(), part.begin(), part.end());
    labels.insert(labels.end(), part.size(), y);
  }
  const auto rates = error_rates(outcomes, labels);
  const auto theory = mean_hitting_time_theory(rates.alpha0, rates.alpha1, spec.kl_per_step(), spec.kl_per_step());
  const double rel = std::abs(mean_tau1 - theory.e1) / theory.e1;
  return {"hitting_time_theory", rel < 0.2, "rel_diff<0.2", rel};
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(const ExperimentConfig& c, int threads) {
  return {check_tandem_exactness(c), check_order0(c), check_gradients(c), check_wald(c, threads),
          check_hitting_time(c, threads)};
}

int cmd_oracle_check(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  OutputLock lock(c.output_dir);
  const auto checks = run_oracle_checks(c, options.threads);
  std::string report(kOracleReportHeader);
  report += '\n';
  bool all = true;
  for (const auto& check : checks) {
    report += check.name + "," + (check.pass ? "pass" : "fail") + "," + check.criterion + "\n";
    log(check.pass ? LogLevel::info : LogLevel::error,
        check.name + ": " + (check.pass ? "pass" : "FAIL") + " (measured " + format_double(check.measured) + ")");
    all = all && check.pass;
  }
  write_file_atomic(resolve(c, "oracle_report.csv"), report);
  return all ? 0 : 1;
}

int cmd_ablation(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = effective_config(config, options);
  require_test_set(c);
  OutputLock lock(c.output_dir);
  const auto raw = make_split(c.dataset, Split::test);
  const auto inputs = model_inputs(c.dataset, raw);
  const auto labels = labels_of(raw);
  std::vector<SvgSeries> series;
  for (const auto& variant : ablation_variants()) {
    log(LogLevel::info, "training variant " + variant.name);
    const auto trained = train_variant(c, variant.weights);
    const auto llrs = model_llrs(trained.model, inputs, options.threads);
    const auto points = sweep(c, llrs, labels);
    write_file_atomic(resolve(c, "sat_curve_" + variant.name + ".csv"), format_sat_curve(points));
    write_file_atomic(resolve(c, "train_report_" + variant.name + ".csv"),
                      format_train_report(trained.report.records));
    series.push_back(series_of(variant.name, points));
  }
  if (options.plots) write_file_atomic(resolve(c, "ablation.svg"), sat_svg("Loss ablation", series));
  return 0;
}

}  // namespace tandem::cli
