#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "tandem/cli/commands.hpp"
#include "tandem/cli/io.hpp"

namespace {

using Command = std::function<int(const tandem::cli::ExperimentConfig&, const tandem::cli::RunOptions&)>;

}  // namespace

int main(int argc, char** argv) {
  using namespace tandem::cli;
  CLI::App app{"Sequential probability ratio testing with TANDEM log-likelihood ratio estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool no_plots = false;

  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"generate", {"Generate train/val/test datasets", cmd_generate}},
      {"train", {"Train the posterior estimator", cmd_train}},
      {"evaluate", {"Run the SPRT threshold sweep on the test set", cmd_evaluate}},
      {"np-compare", {"Compare SPRT and Neyman-Pearson sample sizes", cmd_np_compare}},
      {"oracle-check", {"Check the implementation against exact oracles", cmd_oracle_check}},
      {"ablation", {"Train and sweep every loss configuration", cmd_ablation}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Master seed (overrides dataset.seed)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-plots", no_plots, "Skip SVG output");
    subs[name] = sub;
  }

  CLI11_PARSE(app, argc, argv);
  set_log_level(log_level_from_env());

  try {
    const ExperimentConfig config = load_config(config_path);
    RunOptions options;
    options.out = out_dir;
    options.threads = threads;
    options.plots = !no_plots;
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed") > 0) options.seed = seed;
      return commands.at(name).second(config, options);
    }
  } catch (const ConfigError& e) {
    log(LogLevel::error, e.what());
    return 2;
  } catch (const std::exception& e) {
    log(LogLevel::error, e.what());
    return 1;
  }
  return 1;
}
