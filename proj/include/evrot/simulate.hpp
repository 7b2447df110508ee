#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evrot/engine_sim.hpp"
#include "evrot/scheduler.hpp"

namespace evrot {

// One stage visit recovered from an estimation trace: the entry estimate plus
// the velocity after each accepted update. Replaying a block charges one
// datapath iteration per logged evaluation, so access and energy figures
// describe the same trajectory the estimator actually took.
struct ReplayBlock {
  int window = 0;
  double scale = 1.0;
  Vec3 entry;
  std::vector<Vec3> updates;
};

struct ReplayPlan {
  std::vector<ReplayBlock> blocks;
  int windows = 0;  // one past the highest window id seen
};

ReplayPlan plan_from_rows(const std::vector<TraceRow>& rows);
// Reads back a trace CSV written by the estimator.
ReplayPlan load_trace_plan(const std::string& path);
// Stand-in plan when no estimate ran: every window visits every listed stage
// for `iters` evaluations at one fixed velocity.
ReplayPlan plan_fixed(int n_windows, std::span<const StageConfig> stages,
                      const Vec3& omega, int iters);

// Aggregate measurement of one datapath variant over a plan. max_rel_dev is
// the built-in cross-check: the worst relative disagreement between the
// variant's streamed statistics and a dense re-computation over the same
// event selection, across every replayed evaluation.
struct SimVariant {
  std::string name;
  std::vector<StageTrace> stage;  // one entry per replayed block, plan order
  std::vector<int> stage_window;
  AccessCounts acc;
  std::int64_t cycles = 0;
  std::int64_t evaluations = 0;
  double max_rel_dev = 0;
};

SimVariant simulate_plan(const std::string& name, const ReplayPlan& plan,
                         std::span<const EventWindow> windows,
                         const CameraIntrinsics& cam,
                         std::span<const StageConfig> stages,
                         const EngineConfig& ecfg);

}  // namespace evrot
