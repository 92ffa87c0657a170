#include "tandem/cli/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace tandem::cli {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ec == std::errc() ? end : buf);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_dataset(std::span<const LabeledSequence> sequences) {
  const int length = sequences.empty() ? 0 : sequences.front().length();
  const int dim = sequences.empty() ? 0 : sequences.front().dim();
  std::string out = "tandem-dataset v1, T=" + std::to_string(length) + ", d=" + std::to_string(dim) +
                    ", n=" + std::to_string(sequences.size()) + "\n";
  for (const auto& s : sequences) {
    if (s.length() != length || s.dim() != dim) throw std::invalid_argument("dataset sequences differ in shape");
    out += std::to_string(s.label) + "," + std::to_string(s.seed);
    for (int t = 0; t < length; ++t) {
      for (int j = 0; j < dim; ++j) {
        out += ',';
        out += format_double(s.frames(t, j));
      }
    }
    out += '\n';
  }
  return out;
}

namespace {

template <class T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::runtime_error(where + ": bad number '" + std::string(field) + "'");
  return value;
}

}  // namespace

std::vector<LabeledSequence> parse_dataset(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source + ":1: missing header");
  int length = 0;
  int dim = 0;
  long count = 0;
  if (std::sscanf(line.c_str(), "tandem-dataset v1, T=%d, d=%d, n=%ld", &length, &dim, &count) != 3 || length < 0 ||
      dim < 0 || count < 0) {
    throw std::runtime_error(source + ":1: expected 'tandem-dataset v1, T=<int>, d=<int>, n=<int>'");
  }
  std::vector<LabeledSequence> out;
  out.reserve(count);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != static_cast<std::size_t>(2 + length * dim)) {
      throw std::runtime_error(where + ": expected " + std::to_string(2 + length * dim) + " fields");
    }
    LabeledSequence s;
    s.label = parse_number<int>(fields[0], where);
    if (s.label != 0 && s.label != 1) throw std::runtime_error(where + ": label must be 0 or 1");
    s.seed = parse_number<std::uint64_t>(fields[1], where);
    s.frames.resize(length, dim);
    for (int t = 0; t < length; ++t) {
      for (int j = 0; j < dim; ++j) s.frames(t, j) = parse_number<double>(fields[2 + t * dim + j], where);
    }
    out.push_back(std::move(s));
  }
  if (static_cast<long>(out.size()) != count) {
    throw std::runtime_error(source + ": header declares n=" + std::to_string(count) + " but found " +
                             std::to_string(out.size()) + " records");
  }
  return out;
}

std::vector<LabeledSequence> read_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.string());
}

std::string format_sat_curve(std::span<const SatPoint> points) {
  std::string out(kSatCurveHeader);
  out += '\n';
  for (const auto& p : points) {
    out += format_double(p.a0) + "," + format_double(p.a1) + "," + format_double(p.mean_hitting_time) + "," +
           format_double(p.balanced_accuracy) + "," + std::to_string(p.n_trials) + "," + format_double(p.sem) + "\n";
  }
  return out;
}

std::string format_train_report(std::span<const EpochRecord> records) {
  std::string out(kTrainReportHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + format_double(r.total) + "," + format_double(r.lllr) + "," +
           format_double(r.multiplet) + "," + format_double(r.kliep) + "," + format_double(r.val_balanced_acc) + "," +
           format_double(r.feature_norm) + "\n";
  }
  return out;
}

std::string format_np_efficiency(std::span<const NpEfficiencyReport> reports) {
  std::string out(kNpEfficiencyHeader);
  out += '\n';
  for (const auto& r : reports) {
    out += format_double(r.alpha) + "," + format_double(r.beta) + "," + std::to_string(r.np_n) + "," +
           format_double(r.sprt_mean_tau_0) + "," + format_double(r.sprt_mean_tau_1) + "," +
           format_double(r.ratio_0) + "," + format_double(r.ratio_1) + "," + format_double(r.sem_0) + "," +
           format_double(r.sem_1) + "\n";
  }
  return out;
}

std::string sat_svg(const std::string& title, std::span<const SvgSeries> series) {
  constexpr double width = 640.0;
  constexpr double height = 420.0;
  constexpr double margin = 50.0;
  double x_lo = 1.0;
  double x_hi = 1.0;
  double y_lo = 1.0;
  double y_hi = 0.5;
  for (const auto& s : series) {
    for (double x : s.x) x_hi = std::max(x_hi, x);
    for (double y : s.y) {
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  y_lo = std::min(y_lo, 0.5);
  y_hi = std::max(y_hi, y_lo + 1e-6);
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  auto px = [&](double x) { return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };

  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << "mean hitting time (" << format_double(x_lo) << " to " << format_double(x_hi) << ")</text>\n";
  svg << "<text x=\"14\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << height / 2
      << ")\" text-anchor=\"middle\">balanced accuracy</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::vector<std::size_t> order(s.x.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    svg << "<polyline fill=\"none\" stroke=\"" << colors[i % 6] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j : order) svg << px(s.x[j]) << "," << py(s.y[j]) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << width - margin - 150 << "\" y=\"" << margin + 16 * (i + 1) << "\" font-size=\"12\" fill=\""
        << colors[i % 6] << "\">" << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".tandem.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw std::runtime_error("output directory " + dir.string() + " is locked by another run (" + path_.string() +
                             ")");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::info)};

}  // namespace

LogLevel log_level_from_env() {
  const char* value = std::getenv("TANDEM_LOG");
  if (value == nullptr) return LogLevel::info;
  const std::string v(value);
  if (v == "error") return LogLevel::error;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > g_level.load()) return;
  static constexpr const char* names[] = {"error", "info", "debug"};
  std::cerr << "[tandem " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace tandem::cli
