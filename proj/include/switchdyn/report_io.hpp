#pragma once

// CSV and JSON output for trajectories, experiment reports and histograms.
//
// Numbers are written in shortest round-trip form (std::to_chars), so a value read back from the CSV is
// bit-identical to the one computed. Files use UTF-8, LF line endings and a header row.

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "switchdyn/experiments.hpp"
#include "switchdyn/integrator.hpp"

namespace switchdyn {

// Shortest decimal string that parses back to exactly `v`; "nan" / "inf" / "-inf" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Writes one row per observed point: t,x0,...,x{d-1},energy,mode.
class TrajectoryCsvWriter {
public:
  TrajectoryCsvWriter(std::ostream &out, int dimension) : out_(out) {
    out_ << "t";
    for (int i = 0; i < dimension; ++i) out_ << ",x" << i;
    out_ << ",energy,mode\n";
  }

  void operator()(const ObservedPoint &p) {
    out_ << format_double(p.t);
    for (Eigen::Index i = 0; i < p.x.size(); ++i) out_ << ',' << format_double(p.x[i]);
    out_ << ',' << format_double(p.energy) << ',' << p.mode << '\n';
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_; }

private:
  std::ostream &out_;
  std::size_t rows_ = 0;
};

inline constexpr const char *kTrialCsvHeader = "trial_index,outcome_kind,time,seed";

// One row per trial. With `point` set, a leading point column identifies the sweep point.
inline void write_trials_csv(std::ostream &out, const ExperimentReport &report, bool with_point = false,
                             std::size_t point = 0, bool header = true) {
  if (header) out << (with_point ? "point," : "") << kTrialCsvHeader << '\n';
  for (const auto &t : report.trials) {
    if (with_point) out << point << ',';
    out << t.trial_index << ',' << to_string(t.result.kind) << ',' << format_double(t.result.time) << ',' << t.seed
        << '\n';
  }
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

} // namespace detail

inline nlohmann::json report_summary(const ExperimentReport &report) {
  std::int64_t checks = 0, unmatched = 0;
  for (const auto &t : report.trials) {
    checks += t.result.quench_checks;
    unmatched += t.result.unmatched_quenches;
  }
  nlohmann::json j;
  j["label"] = report.label;
  j["master_seed"] = report.master_seed;
  j["n_trials"] = report.trials.size();
  j["successes"] = report.successes;
  j["failures"] = report.failures;
  j["failure_rate"] = report.failure_rate;
  j["mean"] = detail::number_or_null(report.mean);
  j["stderr"] = detail::number_or_null(report.std_error);
  if (checks > 0) {
    j["quench_checks"] = checks;
    j["unmatched_quenches"] = unmatched;
  }
  if (!report.config_echo.empty()) j["config"] = report.config_echo;
  return j;
}

// Histogram rows: ix,iy,x_center,y_center,mass.
inline void write_histogram_csv(std::ostream &out, const Histogram2D &h) {
  out << "ix,iy,x_center,y_center,mass\n";
  for (int iy = 0; iy < h.bins; ++iy) {
    for (int ix = 0; ix < h.bins; ++ix) {
      out << ix << ',' << iy << ',' << format_double(h.center(ix)) << ',' << format_double(h.center(iy)) << ','
          << format_double(h.at(ix, iy)) << '\n';
    }
  }
}

} // namespace switchdyn
