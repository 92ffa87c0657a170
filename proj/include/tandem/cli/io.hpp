#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tandem/eval.hpp"
#include "tandem/nnet.hpp"
#include "tandem/synthdata.hpp"

namespace tandem::cli {

// Fixed CSV headers; column order is part of the output contract.
inline constexpr std::string_view kSatCurveHeader = "a0,a1,mean_hitting_time,balanced_accuracy,n_trials,sem";
inline constexpr std::string_view kTrainReportHeader =
    "epoch,total,lllr,multiplet,kliep,val_balanced_acc,feature_norm";
inline constexpr std::string_view kNpEfficiencyHeader =
    "alpha,beta,np_n,sprt_mean_tau_0,sprt_mean_tau_1,ratio_0,ratio_1,sem_0,sem_1";
inline constexpr std::string_view kErrorRatesHeader = "a0,a1,alpha0,alpha1,sem0,sem1,n0,n1";
inline constexpr std::string_view kDecisionsHeader = "a0,a1,sequence,label,decision,tau,terminal_llr,overshoot,forced";
inline constexpr std::string_view kOracleReportHeader = "check,status,detail";

/// Shortest text that parses back to the same double.
std::string format_double(double x);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// `tandem-dataset v1, T=<int>, d=<int>, n=<int>` followed by one
/// `label,seed,v_1_1,...,v_T_d` record per sequence (frame-major).
std::string format_dataset(std::span<const LabeledSequence> sequences);
std::vector<LabeledSequence> parse_dataset(const std::string& text, const std::string& source = "<dataset>");
std::vector<LabeledSequence> read_dataset(const std::filesystem::path& path);

std::string format_sat_curve(std::span<const SatPoint> points);
std::string format_train_report(std::span<const EpochRecord> records);
std::string format_np_efficiency(std::span<const NpEfficiencyReport> reports);

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal polyline plot (balanced accuracy against mean hitting time).
std::string sat_svg(const std::string& title, std::span<const SvgSeries> series);

/// Exclusive per-directory lock held for the object's lifetime.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level from TANDEM_LOG (error, info, debug); info when unset.
LogLevel log_level_from_env();
void set_log_level(LogLevel level);
void log(LogLevel level, const std::string& message);

}  // namespace tandem::cli
