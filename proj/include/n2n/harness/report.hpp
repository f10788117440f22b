#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace n2n::harness {

inline constexpr const char* kReportHeader = "step,loss,lr,gamma,psnr";

/// One training step. NaN marks an empty field (loss at step 0, psnr between checkpoints).
struct ReportRow {
  long step = 0;
  double loss = NAN;
  double lr = NAN;
  double gamma = NAN;
  double psnr = NAN;
};

inline std::string format_field(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_row(const ReportRow& r) {
  return std::to_string(r.step) + "," + format_field(r.loss) + "," + format_field(r.lr) + "," + format_field(r.gamma) +
         "," + format_field(r.psnr);
}

struct PsnrStats {
  double mean = NAN;
  double stddev = NAN;
  double baseline_mean = NAN;  // PSNR of the corrupted inputs themselves
  double baseline_stddev = NAN;
  std::size_t count = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  PsnrStats final_stats;

  /// Rows carrying a validation PSNR, in step order.
  std::vector<ReportRow> checkpoints() const {
    std::vector<ReportRow> out;
    for (const auto& r : rows)
      if (!std::isnan(r.psnr)) out.push_back(r);
    return out;
  }

  /// Mean training loss over rows with step in (from, to].
  double mean_loss(long from, long to) const {
    double s = 0.0;
    long n = 0;
    for (const auto& r : rows)
      if (r.step > from && r.step <= to && !std::isnan(r.loss)) {
        s += r.loss;
        ++n;
      }
    return n ? s / n : NAN;
  }

  void write_csv(std::ostream& os) const {
    os << kReportHeader << '\n';
    for (const auto& r : rows) os << format_row(r) << '\n';
  }

  std::string csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }
};

/// Appends rows to a CSV file as training progresses.
class CsvSink {
 public:
  CsvSink() = default;
  explicit CsvSink(const std::string& path) : os_(path) {
    if (!os_) throw std::runtime_error("cannot write report '" + path + "'");
    os_ << kReportHeader << '\n';
  }
  void write(const ReportRow& r) {
    if (os_.is_open()) os_ << format_row(r) << '\n' << std::flush;
  }

 private:
  std::ofstream os_;
};

}  // namespace n2n::harness
