#pragma once
#include <cmath>
#include <cstdint>

#include "evrot/events.hpp"
#include "evrot/vec3.hpp"

namespace evrot {

// Pyramid stage geometry. Grids shrink by the stage factor, rounding up, and
// the event keep ratio equals the stage factor.
struct StageScale {
  double s = 1.0;
  int hs = 0, ws = 0;

  static StageScale make(double s, const CameraIntrinsics& cam) {
    StageScale st;
    st.s = s;
    st.hs = static_cast<int>(std::ceil(s * cam.height));
    st.ws = static_cast<int>(std::ceil(s * cam.width));
    return st;
  }
  double keep_ratio() const { return s; }
  std::int64_t pixels() const { return std::int64_t(hs) * ws; }
};

// One event warped to the window reference time under a candidate angular
// velocity, with everything the voting stage needs: the stencil corner, the
// bilinear fractions and the position sensitivity rows rx, ry. The sign
// convention is d(x')/d(omega) = -rx and d(y')/d(omega) = -ry; it is pinned
// by a finite-difference test and the voting stage folds the minus in.
struct WarpedEvent {
  double xw = 0, yw = 0;       // warped position in stage pixels
  int x0 = 0, y0 = 0;          // stencil corner, floor of (xw, yw)
  double ax = 0, ay = 0;       // fractional parts in [0,1)
  Vec3 rx, ry;
  std::int64_t p_act = -1;     // y0*ws + x0, or -1 if any of the 4 taps is off-grid
  int polarity = 0;

  bool valid() const { return p_act >= 0; }
};

// Image-plane velocity (pixels/s) of the purely rotational motion model at
// sensor pixel (x, y).
inline void rotational_flow(double x, double y, const Vec3& w, const CameraIntrinsics& cam,
                            double* u, double* v) {
  const double xn = (x - cam.cx) / cam.fx;
  const double yn = (y - cam.cy) / cam.fy;
  const double xy = xn * yn;
  *u = cam.fx * (xy * w.x - (1.0 + xn * xn) * w.y + yn * w.z);
  *v = cam.fy * ((1.0 + yn * yn) * w.x - xy * w.y - xn * w.z);
}

WarpedEvent warp_event(const Event& e, double t_ref, const Vec3& omega, const StageScale& st,
                       const CameraIntrinsics& cam);

}  // namespace evrot
