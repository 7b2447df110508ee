#pragma once
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "evrot/contrast.hpp"
#include "evrot/events.hpp"
#include "evrot/optimizer.hpp"

namespace evrot {

struct StageConfig {
  StageScale scale;
  double tau = 0;          // minimum relative variance gain to stay in the stage
  double rho = 0;          // event keep ratio, tied to the scale
  GaussianKernel kernel;
  int max_iters = 50;
  // Stage pixels of warp shift per rad/s per second of warp interval, the
  // mean focal length at this scale. Converts the optimizer's pixel-sized
  // step knobs into rates once the window's event timing is known.
  double px_per_rad = 1.0;
};

enum class ScheduleMode { fixed, adaptive, full };

struct Schedule {
  ScheduleMode mode = ScheduleMode::adaptive;
  std::vector<StageConfig> stages;       // coarse to fine, last one at scale 1
  std::vector<int> fixed_iters;          // per stage, fixed mode only
  int window_cap = 200;                  // total updates allowed per window
};

// Stage list for the given mode at the camera's resolution. Adaptive and
// fixed run quarter/half/full; full-resolution-only mode runs one stage at
// scale 1 governed by the finest threshold.
Schedule make_schedule(const CameraIntrinsics& cam, ScheduleMode mode,
                       const std::vector<double>& taus = {0.02, 0.01, 0.005},
                       double sigma = 1.0, int stage_cap = 50,
                       std::vector<int> fixed_iters = {});

// Relative variance improvement of one update. A zero baseline cannot be
// normalized: any improvement from zero counts as infinite gain (stay), no
// improvement as zero (leave).
double stage_gain(double v_new, double v_prev);

// One stage's compute interface. enter() fixes the working event set from
// the stage-entry estimate; eval() measures the objective at a candidate.
// selected_events() reports the per-update event cost after enter().
class StageEvaluator {
 public:
  virtual ~StageEvaluator() = default;
  virtual void enter(const Vec3& omega) = 0;
  virtual Objective eval(const Vec3& omega) = 0;
  virtual std::int64_t selected_events() const = 0;
};

using EvaluatorFactory =
    std::function<std::unique_ptr<StageEvaluator>(const EventWindow&, const StageConfig&)>;

// Dense-arithmetic evaluator: subsamples with the same grouping rule as the
// datapath model, then accumulates, blurs and evaluates in full precision.
EvaluatorFactory make_reference_factory(const CameraIntrinsics& cam);

struct TraceRow {
  int window = 0;
  double stage = 0;        // stage scale: 0.25, 0.5 or 1
  int iter = 0;            // 0 marks the stage-entry evaluation
  double variance = 0;
  double gain = 0;         // NaN on entry rows
  Vec3 omega;
  std::int64_t work_units = 0;  // selected events + stage pixels, 0 on entry rows
};

enum class Departure { gain, cap };

struct StageVisit {
  int stage_index = 0;
  int updates = 0;
  Departure departure = Departure::gain;
};

struct WindowResult {
  Vec3 omega_hat;
  double final_variance = 0;
  std::vector<StageVisit> visits;
  std::vector<TraceRow> trace;
  std::int64_t wall_cost = 0;
  int total_updates = 0;
};

WindowResult run_window(const EventWindow& win, const Vec3& omega0,
                        const Schedule& schedule, const EvaluatorFactory& factory,
                        const OptOptions& opt = {}, int window_index = 0);

// Warm-started chain over consecutive windows.
std::vector<WindowResult> run_sequence(const std::vector<EventWindow>& windows,
                                       const Schedule& schedule,
                                       const EvaluatorFactory& factory,
                                       const OptOptions& opt = {});

// Trace CSV, one row per evaluation. Entry rows print gain as nan.
void write_trace_header(std::ostream& os);
void write_trace_rows(std::ostream& os, const std::vector<TraceRow>& rows);

// Structural audit of an emitted trace against its schedule: stage blocks in
// strictly increasing scale order, each opened by an entry row, iteration
// numbering dense as well as the departure rule (a stage is left only on a
// sub-threshold gain or an exhausted iteration budget). Returns an empty
// string when the trace conforms, else a description of the first violation.
std::string validate_trace(const std::vector<TraceRow>& rows, const Schedule& schedule);

}  // namespace evrot
