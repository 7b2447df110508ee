#include "evrot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evrot/textio.hpp"

namespace evrot {

double window_error(const Vec3& estimate, const Vec3& reference) {
  return (estimate - reference).norm();
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw ConfigError("rmse of an empty error sequence");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / double(errors.size()));
}

ErrorSeries imu_errors(const MethodRun& run, const ImuSeries& imu) {
  if (run.t_mid.size() != run.omega.size()) {
    throw ConfigError("method run has misaligned time and estimate columns");
  }
  ErrorSeries out;
  for (std::size_t k = 0; k < run.t_mid.size(); ++k) {
    if (!imu.covers(run.t_mid[k])) {
      ++out.skipped;
      continue;
    }
    out.t.push_back(run.t_mid[k]);
    out.e.push_back(window_error(run.omega[k], imu.at(run.t_mid[k])));
  }
  return out;
}

MethodSummary summarize(const MethodRun& run, const ImuSeries& imu) {
  ErrorSeries series = imu_errors(run, imu);
  MethodSummary s;
  s.name = run.name;
  s.windows = series.e.size();
  s.skipped = series.skipped;
  if (!series.e.empty()) {
    s.rmse_native = rmse(series.e);
    s.rmse_deg = s.rmse_native * kDegPerRad;
  }
  for (std::int64_t u : run.updates) s.total_updates += u;
  for (std::int64_t w : run.wall_cost) s.total_wall_cost += w;
  return s;
}

DeviationResult deviation_metric(std::span<const double> errors_m,
                                 std::span<const double> errors_ref,
                                 std::span<const double> t, int n_segments) {
  if (errors_m.size() != errors_ref.size() || errors_m.size() != t.size()) {
    throw ConfigError("deviation metric needs aligned error and time sequences");
  }
  if (n_segments < 1) throw ConfigError("deviation metric needs at least one segment");
  if (errors_m.empty()) throw ConfigError("deviation metric of empty sequences");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] < t[i - 1]) throw ConfigError("deviation metric times must be sorted");
  }

  DeviationResult out;
  const std::size_t n = errors_m.size();
  out.d.resize(n);
  out.segment.resize(n);

  const double t0 = t.front(), t1 = t.back();
  const double span = t1 - t0;
  out.boundaries.resize(std::size_t(n_segments) + 1);
  for (int s = 0; s <= n_segments; ++s) {
    out.boundaries[std::size_t(s)] = t0 + span * double(s) / double(n_segments);
  }

  for (std::size_t i = 0; i < n; ++i) {
    int seg = span > 0.0 ? int((t[i] - t0) / span * double(n_segments)) : 0;
    out.segment[i] = std::clamp(seg, 0, n_segments - 1);
    out.d[i] = std::abs(errors_m[i] - errors_ref[i]);
  }

  for (int s = 0; s < n_segments; ++s) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.segment[i] != s) continue;
      lo = std::min(lo, out.d[i]);
      hi = std::max(hi, out.d[i]);
      any = true;
    }
    if (!any) continue;
    if (hi == lo) {
      // No spread to normalize against; the whole span flattens.
      for (std::size_t i = 0; i < n; ++i) {
        if (out.segment[i] == s) out.d[i] = 0.0;
      }
      out.degenerate.push_back(s);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (out.segment[i] == s) out.d[i] = (out.d[i] - lo) / (hi - lo);
    }
  }
  return out;
}

void write_rmse_table(std::ostream& os, std::span<const MethodSummary> rows) {
  os << "method,windows,skipped,rmse_rad_s,rmse_deg_s,total_updates,total_work_units\n";
  for (const MethodSummary& r : rows) {
    os << r.name << ',' << r.windows << ',' << r.skipped << ','
       << fmt_double(r.rmse_native) << ',' << fmt_double(r.rmse_deg) << ','
       << r.total_updates << ',' << r.total_wall_cost << '\n';
  }
}

void write_error_rows(std::ostream& os, const std::string& name, const ErrorSeries& series) {
  os << "method,t_mid,error\n";
  for (std::size_t i = 0; i < series.e.size(); ++i) {
    os << name << ',' << fmt_double(series.t[i]) << ',' << fmt_double(series.e[i]) << '\n';
  }
}

void write_deviation_rows(std::ostream& os, const std::string& name,
                          std::span<const double> t, std::span<const double> errors_m,
                          std::span<const double> errors_ref, const DeviationResult& dev) {
  os << "method,t_mid,error_method,error_reference,segment,deviation_normalized\n";
  for (std::size_t i = 0; i < dev.d.size(); ++i) {
    os << name << ',' << fmt_double(t[i]) << ',' << fmt_double(errors_m[i]) << ','
       << fmt_double(errors_ref[i]) << ',' << dev.segment[i] << ','
       << fmt_double(dev.d[i]) << '\n';
  }
}

}  // namespace evrot
