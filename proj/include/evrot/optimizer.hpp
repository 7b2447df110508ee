#pragma once
#include <functional>
#include <optional>

#include "evrot/contrast.hpp"
#include "evrot/vec3.hpp"

namespace evrot {

using EvalFn = std::function<Objective(const Vec3&)>;

// Maximizes the objective along omega with nonlinear conjugate gradient
// (Polak-Ribiere, beta clamped at zero) and a backtracking line search.
struct OptOptions {
  double step0_px = 1.0;    // first stage-entry move, in pixels of warp shift
  int max_halvings = 8;     // line-search budget before the step is rejected
  double growth = 2.0;      // step growth after a clean first-try acceptance
  double step_max_px = 16;  // per-update move cap, same pixel units
  // Minimum vote mass a trial may keep, as a fraction of the stage-entry
  // mass. Variance alone rewards warps that throw events off the grid; a
  // trial below this floor is rejected no matter how its variance looks.
  // Zero disables the veto.
  double keep_mass = 0.8;
  // When a whole line search fails on a mass-tracking objective, probe the
  // six axis neighbors one entry step away and take the best improvement.
  // Near the vote lattice the analytic slope is dominated by sub-pixel
  // ripple and can point anywhere; a probe at the scale the search actually
  // moves reads the envelope instead.
  bool probe_on_fail = true;
};

struct OptState {
  Vec3 omega;
  Vec3 prev_grad;
  Vec3 direction;
  double step = 1.0;       // current step multiplier along the direction
  double step_floor = 1.0; // reset value after a rejected line search
  double step_cap = 16.0;
  double entry_mass = 0;    // vote mass at stage entry, the keep_mass baseline
  double probe_radius = 0;  // rad/s distance of one step0_px move, for rescues
  int iter = 0;             // accepted updates within the current stage
  bool have_obj = false;    // obj holds the objective at omega
  bool restart = false;     // next update must take the raw gradient direction
  Objective obj;
};

OptState init_state(const Vec3& omega0, const OptOptions& opt);

// Resets per-stage state (direction, step, iteration count) and seeds the
// cached objective with the stage-entry evaluation. The step multiplier is
// normalized by the entry gradient and by px_per_radsec, the warp shift in
// image pixels that one rad/s of extra rate produces for this stage and
// window. The first trial therefore moves the image by about step0_px pixels
// no matter how the objective or the event timing is scaled; step_max_px is
// converted the same way. Callers with no geometry pass 1 and the knobs read
// as rad/s directly.
void begin_stage(OptState& st, const Objective& at_omega, const OptOptions& opt,
                 double px_per_radsec = 1.0);

// Warm start: the previous window's estimate. The first window starts from
// rest, but offset off the exact zero point: at zero every event warps onto
// an exact cell corner, where the one-sided vote derivative misleads the
// first ascent step. The offset shifts warped positions by well under a
// thousandth of a pixel, far below the estimate tolerances.
inline constexpr Vec3 kColdStart{1e-4, 1e-4, 1e-4};
Vec3 warm_start(const std::optional<Vec3>& previous);

// Optional exact line search hook for tests: returns the step along dir.
using LineSearchFn = std::function<double(const Vec3& omega, const Vec3& dir)>;

// One ascent update. Evaluates at omega if no objective is cached, builds the
// conjugate direction and line-searches along it. Returns false if every
// backtracking trial failed; omega is then unchanged and the next call
// restarts from the raw gradient.
bool update(OptState& st, const EvalFn& eval, const OptOptions& opt,
            const LineSearchFn* exact = nullptr);

}  // namespace evrot
