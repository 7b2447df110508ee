#include "evrot/optimizer.hpp"

#include <cmath>

#include "evrot/textio.hpp"

namespace evrot {

OptState init_state(const Vec3& omega0, const OptOptions& opt) {
  OptState st;
  st.omega = omega0;
  st.step = opt.step0_px;
  st.step_floor = opt.step0_px;
  st.step_cap = opt.step_max_px;
  return st;
}

void begin_stage(OptState& st, const Objective& at_omega, const OptOptions& opt,
                 double px_per_radsec) {
  st.prev_grad = Vec3{};
  st.direction = Vec3{};
  st.iter = 0;
  st.restart = false;
  st.obj = at_omega;
  st.have_obj = true;
  st.entry_mass = at_omega.mass;
  double conv = px_per_radsec > 0.0 ? px_per_radsec : 1.0;
  double gn = at_omega.grad.norm();
  double scale = (gn > 0.0 ? 1.0 / gn : 1.0) / conv;
  st.step = opt.step0_px * scale;
  st.step_floor = st.step;
  st.step_cap = opt.step_max_px * scale;
  st.probe_radius = opt.step0_px / conv;
}

Vec3 warm_start(const std::optional<Vec3>& previous) { return previous.value_or(kColdStart); }

bool update(OptState& st, const EvalFn& eval, const OptOptions& opt, const LineSearchFn* exact) {
  if (!st.have_obj) {
    st.obj = eval(st.omega);
    st.have_obj = true;
  }
  if (!st.obj.grad.finite() || !std::isfinite(st.obj.variance))
    throw DataError("non-finite objective in optimizer update");

  const Vec3 g = st.obj.grad;
  if (g.norm2() == 0.0) {
    // Stationary point; count the no-op so stage caps still apply.
    ++st.iter;
    return true;
  }

  Vec3 d;
  if (st.iter == 0 || st.restart) {
    d = g;
  } else {
    double denom = st.prev_grad.norm2();
    double beta = denom > 0.0 ? g.dot(g - st.prev_grad) / denom : 0.0;
    if (beta < 0.0) beta = 0.0;  // clamped: direction falls back to g exactly
    d = g + st.direction * beta;
    if (d.dot(g) <= 0.0) d = g;  // keep an ascent direction
  }
  st.restart = false;

  // Stage-entry mass anchors the off-grid veto; objectives that do not
  // report mass (entry 0) leave it disabled.
  const double mass_floor =
      st.entry_mass > 0.0 ? opt.keep_mass * st.entry_mass : 0.0;
  auto admissible = [&](const Objective& o) { return o.mass >= mass_floor; };

  if (exact) {
    double eta = (*exact)(st.omega, d);
    Vec3 cand = st.omega + d * eta;
    Objective o = eval(cand);
    if (o.variance >= st.obj.variance - 1e-12 && admissible(o)) {
      st.omega = cand;
      st.prev_grad = g;
      st.direction = d;
      st.obj = o;
      ++st.iter;
      return true;
    }
    st.restart = true;
    return false;
  }

  double eta = st.step;
  for (int h = 0; h <= opt.max_halvings; ++h) {
    Vec3 cand = st.omega + d * eta;
    Objective o = eval(cand);
    if (o.variance > st.obj.variance && admissible(o)) {
      st.omega = cand;
      st.prev_grad = g;
      st.direction = d;
      st.obj = o;
      ++st.iter;
      // Clean first-try acceptance earns a longer step next time; a trimmed
      // step becomes the new starting point.
      st.step = h == 0 ? std::min(eta * opt.growth, st.step_cap) : eta;
      return true;
    }
    eta *= 0.5;
  }

  // Rescue probe for real image objectives: the slope that just failed may
  // be lattice ripple, so read the envelope with a six-point axis star at
  // the entry move scale and keep the best admissible improvement.
  if (opt.probe_on_fail && st.entry_mass > 0.0 && st.probe_radius > 0.0) {
    static constexpr Vec3 kAxes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vec3 best_w;
    Objective best_o;
    bool found = false;
    for (const Vec3& axis : kAxes) {
      for (double sgn : {1.0, -1.0}) {
        Vec3 cand = st.omega + axis * (sgn * st.probe_radius);
        Objective o = eval(cand);
        if (o.variance > st.obj.variance && admissible(o) &&
            (!found || o.variance > best_o.variance)) {
          best_w = cand;
          best_o = o;
          found = true;
        }
      }
    }
    if (found) {
      st.omega = best_w;
      st.obj = best_o;
      st.prev_grad = g;
      st.direction = Vec3{};
      st.restart = true;  // a probe move carries no usable conjugate memory
      st.step = st.step_floor;
      ++st.iter;
      return true;
    }
  }

  st.restart = true;
  st.step = st.step_floor;
  return false;
}

}  // namespace evrot
