#include "evrot/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evrot/engine_sim.hpp"
#include "evrot/textio.hpp"

namespace evrot {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Full-precision evaluator. Stage entry re-runs the same grouped subsampling
// the datapath model uses, so both paths optimize over identical event sets;
// evaluation itself is plain dense arithmetic.
class ReferenceEvaluator final : public StageEvaluator {
 public:
  ReferenceEvaluator(const EventWindow& win, const CameraIntrinsics& cam,
                     const StageConfig& sc)
      : win_(win), cam_(cam), sc_(sc), mask_(win.events.size(), 0) {}

  void enter(const Vec3& omega) override {
    SortTables t = pixel_group_sort(win_, omega, sc_.scale, cam_, sc_.rho, nullptr);
    std::fill(mask_.begin(), mask_.end(), 0);
    for (std::int32_t idx : t.perm) mask_[std::size_t(idx)] = 1;
    selected_ = t.retained();
    entered_ = true;
  }

  Objective eval(const Vec3& omega) override {
    if (!entered_) throw ConfigError("stage evaluator used before enter()");
    IweChannels ch = accumulate_window(win_, mask_, omega, sc_.scale, cam_);
    Objective o = objective_from_stats(stream_stats(smooth(ch, sc_.kernel)));
    o.mass = double(ch.voted);
    return o;
  }

  std::int64_t selected_events() const override { return selected_; }

 private:
  EventWindow win_;
  CameraIntrinsics cam_;
  StageConfig sc_;
  std::vector<std::uint8_t> mask_;
  std::int64_t selected_ = 0;
  bool entered_ = false;
};

}  // namespace

Schedule make_schedule(const CameraIntrinsics& cam, ScheduleMode mode,
                       const std::vector<double>& taus, double sigma, int stage_cap,
                       std::vector<int> fixed_iters) {
  if (taus.empty()) throw ConfigError("schedule needs at least one threshold");
  if (stage_cap <= 0) throw ConfigError("stage iteration cap must be positive");

  Schedule sch;
  sch.mode = mode;
  std::vector<double> scales =
      mode == ScheduleMode::full ? std::vector<double>{1.0}
                                 : std::vector<double>{0.25, 0.5, 1.0};
  for (std::size_t i = 0; i < scales.size(); ++i) {
    StageConfig sc;
    sc.scale = StageScale::make(scales[i], cam);
    sc.rho = scales[i];
    sc.tau = mode == ScheduleMode::full ? taus.back()
                                        : taus[std::min(i, taus.size() - 1)];
    sc.kernel = make_kernel(scales[i], sigma);
    sc.max_iters = stage_cap;
    sc.px_per_rad = scales[i] * 0.5 * (cam.fx + cam.fy);
    sch.stages.push_back(std::move(sc));
  }
  if (mode == ScheduleMode::fixed) {
    if (fixed_iters.empty()) {
      fixed_iters.assign(sch.stages.size(), stage_cap);
    } else if (fixed_iters.size() != sch.stages.size()) {
      throw ConfigError("fixed schedule needs one iteration count per stage");
    }
    for (int n : fixed_iters) {
      if (n < 0) throw ConfigError("fixed iteration counts cannot be negative");
    }
  }
  sch.fixed_iters = std::move(fixed_iters);
  return sch;
}

double stage_gain(double v_new, double v_prev) {
  if (v_prev == 0.0) {
    return v_new > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return (v_new - v_prev) / std::abs(v_prev);
}

EvaluatorFactory make_reference_factory(const CameraIntrinsics& cam) {
  return [cam](const EventWindow& win,
               const StageConfig& sc) -> std::unique_ptr<StageEvaluator> {
    return std::make_unique<ReferenceEvaluator>(win, cam, sc);
  };
}

WindowResult run_window(const EventWindow& win, const Vec3& omega0,
                        const Schedule& schedule, const EvaluatorFactory& factory,
                        const OptOptions& opt, int window_index) {
  if (schedule.stages.empty()) throw ConfigError("schedule has no stages");
  const bool adaptive = schedule.mode != ScheduleMode::fixed;
  if (!adaptive && schedule.fixed_iters.size() != schedule.stages.size()) {
    throw ConfigError("fixed schedule needs one iteration count per stage");
  }

  WindowResult res;
  res.omega_hat = omega0;
  OptState st = init_state(omega0, opt);

  // Mean warp interval of the window. Together with a stage's px_per_rad it
  // converts rate changes into pixels of image shift, which is the scale the
  // line-search knobs are written in. Windows without events (and stages
  // built without intrinsics) fall back to a factor of one, so the knobs
  // then read as rad/s directly.
  double mean_dt = 0.0;
  for (const Event& e : win.events) mean_dt += std::abs(e.t - win.t_ref);
  if (!win.events.empty()) mean_dt /= double(win.events.size());

  std::unique_ptr<StageEvaluator> ev;
  for (std::size_t k = 0; k < schedule.stages.size(); ++k) {
    const StageConfig& sc = schedule.stages[k];
    const int budget = adaptive ? sc.max_iters : schedule.fixed_iters[k];
    if (!adaptive && budget == 0) continue;  // skipped stage costs nothing
    if (res.total_updates >= schedule.window_cap) break;

    ev = factory(win, sc);
    ev->enter(st.omega);
    Objective entry = ev->eval(st.omega);
    begin_stage(st, entry, opt, mean_dt > 0.0 ? mean_dt * sc.px_per_rad : 1.0);
    double v_prev = entry.variance;
    res.trace.push_back(
        TraceRow{window_index, sc.scale.s, 0, v_prev, kNan, st.omega, 0});

    const std::int64_t work = ev->selected_events() + sc.scale.pixels();
    EvalFn fn = [&ev](const Vec3& w) { return ev->eval(w); };
    StageVisit visit{int(k), 0, Departure::cap};

    while (true) {
      if (visit.updates >= budget || res.total_updates >= schedule.window_cap) {
        visit.departure = Departure::cap;
        break;
      }
      update(st, fn, opt);
      visit.updates += 1;
      res.total_updates += 1;
      const double v_new = st.obj.variance;
      const double g = stage_gain(v_new, v_prev);
      res.wall_cost += work;
      res.trace.push_back(
          TraceRow{window_index, sc.scale.s, visit.updates, v_new, g, st.omega, work});
      if (adaptive && g < sc.tau) {
        visit.departure = Departure::gain;
        break;
      }
      v_prev = v_new;
    }

    res.visits.push_back(visit);
    res.omega_hat = st.omega;
    res.final_variance = st.obj.variance;
  }

  // No-regression rule: a coarse stage can hill-climb its tiny subsampled
  // landscape into territory the finer stages only polish locally, ending
  // below where the window began. Scored by the finest evaluator actually
  // visited, a window that lost ground keeps its warm start instead, which
  // also stops one bad window from poisoning the rest of the sequence
  // through warm-start chaining. The check is skipped when nothing moved.
  if (ev && (st.omega.x != omega0.x || st.omega.y != omega0.y || st.omega.z != omega0.z)) {
    const double v_start = ev->eval(omega0).variance;
    if (v_start > st.obj.variance) {
      res.omega_hat = omega0;
      res.final_variance = v_start;
    }
  }
  return res;
}

std::vector<WindowResult> run_sequence(const std::vector<EventWindow>& windows,
                                       const Schedule& schedule,
                                       const EvaluatorFactory& factory,
                                       const OptOptions& opt) {
  std::vector<WindowResult> out;
  out.reserve(windows.size());
  std::optional<Vec3> previous;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    WindowResult r =
        run_window(windows[i], warm_start(previous), schedule, factory, opt, int(i));
    previous = r.omega_hat;
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace_header(std::ostream& os) {
  os << "window,stage,iter,variance,gain,omega_x,omega_y,omega_z,work_units\n";
}

void write_trace_rows(std::ostream& os, const std::vector<TraceRow>& rows) {
  for (const TraceRow& r : rows) {
    os << r.window << ',' << fmt_double(r.stage) << ',' << r.iter << ','
       << fmt_double(r.variance) << ','
       << (std::isnan(r.gain) ? std::string("nan") : fmt_double(r.gain)) << ','
       << fmt_double(r.omega.x) << ',' << fmt_double(r.omega.y) << ','
       << fmt_double(r.omega.z) << ',' << r.work_units << '\n';
  }
}

std::string validate_trace(const std::vector<TraceRow>& rows, const Schedule& schedule) {
  auto fail = [](std::size_t i, const std::string& msg) {
    return "trace row " + std::to_string(i) + ": " + msg;
  };
  if (schedule.stages.empty()) return "schedule has no stages";
  const bool adaptive = schedule.mode != ScheduleMode::fixed;

  std::size_t i = 0;
  bool first_window = true;
  int prev_window = 0;
  while (i < rows.size()) {
    const int w = rows[i].window;
    if (!first_window && w <= prev_window) {
      return fail(i, "window ids must increase and stay contiguous");
    }
    first_window = false;
    prev_window = w;

    int prev_stage_idx = -1;
    int cum_updates = 0;
    const TraceRow* prev_row = nullptr;
    std::vector<int> seen_stages;

    while (i < rows.size() && rows[i].window == w) {
      const TraceRow& entry = rows[i];
      if (entry.iter != 0) return fail(i, "stage block must open with an entry row");
      if (!std::isnan(entry.gain)) return fail(i, "entry row must report gain as nan");
      if (entry.work_units != 0) return fail(i, "entry row must carry zero work");
      if (!std::isfinite(entry.variance)) return fail(i, "variance is not finite");

      int sidx = -1;
      for (std::size_t k = 0; k < schedule.stages.size(); ++k) {
        if (schedule.stages[k].scale.s == entry.stage) sidx = int(k);
      }
      if (sidx < 0) return fail(i, "stage scale is not part of the schedule");
      if (sidx <= prev_stage_idx) return fail(i, "stage scales must strictly increase");
      if (adaptive && sidx != prev_stage_idx + 1) {
        return fail(i, "adaptive run skipped a stage");
      }
      if (prev_row && (entry.omega.x != prev_row->omega.x ||
                       entry.omega.y != prev_row->omega.y ||
                       entry.omega.z != prev_row->omega.z)) {
        return fail(i, "stage entry estimate does not continue the previous stage");
      }
      seen_stages.push_back(sidx);
      ++i;

      int updates = 0;
      std::int64_t work = -1;
      double last_gain = kNan;
      while (i < rows.size() && rows[i].window == w && rows[i].iter != 0) {
        const TraceRow& r = rows[i];
        if (r.stage != entry.stage) return fail(i, "update row switches stage mid-block");
        if (r.iter != updates + 1) return fail(i, "iteration numbering is not dense");
        if (std::isnan(r.gain)) return fail(i, "update row gain must be a number");
        if (!std::isfinite(r.variance)) return fail(i, "variance is not finite");
        if (work < 0) {
          work = r.work_units;
        } else if (r.work_units != work) {
          return fail(i, "work units vary inside one stage");
        }
        if (r.work_units < schedule.stages[std::size_t(sidx)].scale.pixels()) {
          return fail(i, "work units fall below the stage pixel cost");
        }
        last_gain = r.gain;
        updates += 1;
        cum_updates += 1;
        ++i;
      }

      const StageConfig& sc = schedule.stages[std::size_t(sidx)];
      const bool window_exhausted = cum_updates >= schedule.window_cap;
      if (!adaptive) {
        if (!window_exhausted && updates != schedule.fixed_iters[std::size_t(sidx)]) {
          return fail(i - 1, "fixed stage ran a different iteration count");
        }
      } else if (updates == 0) {
        if (sc.max_iters != 0 && !window_exhausted) {
          return fail(i - 1, "stage left without any update");
        }
      } else if (last_gain >= sc.tau && updates < sc.max_iters && !window_exhausted) {
        return fail(i - 1, "stage left while gaining above threshold with budget left");
      }

      prev_stage_idx = sidx;
      prev_row = &rows[i - 1];
    }

    const bool window_exhausted = cum_updates >= schedule.window_cap;
    if (adaptive && prev_stage_idx != int(schedule.stages.size()) - 1 &&
        !window_exhausted) {
      return fail(i - 1, "window ended before the finest stage with budget left");
    }
    if (!adaptive && !window_exhausted) {
      std::vector<int> expected;
      for (std::size_t k = 0; k < schedule.fixed_iters.size(); ++k) {
        if (schedule.fixed_iters[k] > 0) expected.push_back(int(k));
      }
      if (seen_stages != expected) {
        return fail(i - 1, "fixed run visited a different stage set");
      }
    }
  }
  return {};
}

}  // namespace evrot
