#pragma once
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "evrot/events.hpp"
#include "evrot/vec3.hpp"

namespace evrot {

// Angular-velocity error of one window: Euclidean distance between the
// estimate and the gyro reference.
double window_error(const Vec3& estimate, const Vec3& reference);

// Root mean square of a nonempty error sequence.
double rmse(std::span<const double> errors);

constexpr double kDegPerRad = 180.0 / 3.14159265358979323846;

// One estimation pass over a window sequence, aligned by window index.
// updates and wall_cost are optional cost columns; leave them empty when the
// producing run did not track them.
struct MethodRun {
  std::string name;
  std::vector<double> t_mid;            // window midpoint times, seconds
  std::vector<Vec3> omega;              // per-window estimates
  std::vector<std::int64_t> updates;
  std::vector<std::int64_t> wall_cost;
};

// Errors of the windows the gyro actually covers, in input order. Windows
// whose midpoint falls outside the sampled range are skipped, not clamped.
struct ErrorSeries {
  std::vector<double> t;
  std::vector<double> e;
  std::size_t skipped = 0;
};

ErrorSeries imu_errors(const MethodRun& run, const ImuSeries& imu);

// Accuracy and cost roll-up for one method. The angular unit of rmse_native
// is whatever the gyro file used; the converted column assumes rad/s input.
struct MethodSummary {
  std::string name;
  std::size_t windows = 0;
  std::size_t skipped = 0;
  double rmse_native = 0;
  double rmse_deg = 0;
  std::int64_t total_updates = 0;
  std::int64_t total_wall_cost = 0;
};

MethodSummary summarize(const MethodRun& run, const ImuSeries& imu);

// Per-window deviation from a reference method, min-max normalized within
// each time segment. boundaries holds the n_segments+1 edges used.
struct DeviationResult {
  std::vector<double> d;
  std::vector<int> segment;         // segment index per entry
  std::vector<int> degenerate;      // segments whose deviations were constant
  std::vector<double> boundaries;
};

// Splits [t.front(), t.back()] into n_segments equal spans and normalizes
// |errors_m - errors_ref| to [0, 1] independently inside each span. A span
// with constant deviation has no spread to normalize; it maps to zeros and
// its index is reported in `degenerate`.
DeviationResult deviation_metric(std::span<const double> errors_m,
                                 std::span<const double> errors_ref,
                                 std::span<const double> t, int n_segments = 4);

// CSV emitters. Columns are raw enough that every derived number in the
// summary tables can be recomputed from them.
void write_rmse_table(std::ostream& os, std::span<const MethodSummary> rows);
void write_error_rows(std::ostream& os, const std::string& name, const ErrorSeries& series);
void write_deviation_rows(std::ostream& os, const std::string& name,
                          std::span<const double> t, std::span<const double> errors_m,
                          std::span<const double> errors_ref, const DeviationResult& dev);

}  // namespace evrot
