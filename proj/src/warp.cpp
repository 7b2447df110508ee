#include "evrot/warp.hpp"

namespace evrot {

WarpedEvent warp_event(const Event& e, double t_ref, const Vec3& omega, const StageScale& st,
                       const CameraIntrinsics& cam) {
  WarpedEvent we;
  we.polarity = e.p;

  const double dt = e.t - t_ref;
  const double xn = (e.x - cam.cx) / cam.fx;
  const double yn = (e.y - cam.cy) / cam.fy;
  const double xy = xn * yn;
  const double bx = 1.0 + xn * xn;
  const double by = 1.0 + yn * yn;

  const double u = cam.fx * (xy * omega.x - bx * omega.y + yn * omega.z);
  const double v = cam.fy * (by * omega.x - xy * omega.y - xn * omega.z);

  we.xw = st.s * (e.x - dt * u);
  we.yw = st.s * (e.y - dt * v);

  const double sdt = st.s * dt;
  we.rx = Vec3{cam.fx * xy, -cam.fx * bx, cam.fx * yn} * sdt;
  we.ry = Vec3{cam.fy * by, -cam.fy * xy, -cam.fy * xn} * sdt;

  const double fx0 = std::floor(we.xw);
  const double fy0 = std::floor(we.yw);
  we.x0 = static_cast<int>(fx0);
  we.y0 = static_cast<int>(fy0);
  we.ax = we.xw - fx0;
  we.ay = we.yw - fy0;

  // All four bilinear taps must be on the stage grid, otherwise the event is
  // dropped for this evaluation.
  if (we.x0 >= 0 && we.x0 + 1 < st.ws && we.y0 >= 0 && we.y0 + 1 < st.hs)
    we.p_act = std::int64_t(we.y0) * st.ws + we.x0;
  else
    we.p_act = -1;
  return we;
}

}  // namespace evrot
