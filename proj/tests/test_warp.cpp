#include <doctest.h>

#include "evrot/warp.hpp"
#include "test_util.hpp"

using namespace evrot;
using evtest::close_rel;
using evtest::uniform;

namespace {

CameraIntrinsics unit_cam() { return CameraIntrinsics{1.0, 1.0, 0.0, 0.0, 8, 8}; }

}  // namespace

TEST_CASE("warp: worked example, unit camera, pure z rotation") {
  // Hand-derived once and frozen: fx=fy=1, c=(0,0), event (2,1) at dt=0.5,
  // omega=(0,0,1). Flow is u=1, v=-2, so the event warps to (1.5, 2.0).
  CameraIntrinsics cam = unit_cam();
  StageScale st = StageScale::make(1.0, cam);
  Event e{0.5, 2, 1, 1};
  WarpedEvent we = warp_event(e, 0.0, Vec3{0, 0, 1}, st, cam);

  CHECK(we.xw == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(we.yw == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(we.x0 == 1);
  CHECK(we.y0 == 2);
  CHECK(we.ax == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(we.ay == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(we.p_act == 2 * 8 + 1);

  // Sensitivity rows for the same numbers: s*dt = 0.5, xn=2, yn=1.
  CHECK(we.rx.x == doctest::Approx(0.5 * 2.0));   // fx*xn*yn
  CHECK(we.rx.y == doctest::Approx(0.5 * -5.0));  // -fx*(1+xn^2)
  CHECK(we.rx.z == doctest::Approx(0.5 * 1.0));   // fx*yn
  CHECK(we.ry.x == doctest::Approx(0.5 * 2.0));   // fy*(1+yn^2)
  CHECK(we.ry.y == doctest::Approx(0.5 * -2.0));  // -fy*xn*yn
  CHECK(we.ry.z == doctest::Approx(0.5 * -2.0));  // -fy*xn
}

TEST_CASE("warp: principal point is a fixed point of in-plane rotation") {
  CameraIntrinsics cam = evtest::desk_camera();
  StageScale st = StageScale::make(1.0, cam);
  Event e{0.1, std::int16_t(cam.cx), std::int16_t(cam.cy), 1};
  WarpedEvent we = warp_event(e, 0.0, Vec3{0, 0, 3.0}, st, cam);
  CHECK(we.xw == doctest::Approx(cam.cx).epsilon(1e-14));
  CHECK(we.yw == doctest::Approx(cam.cy).epsilon(1e-14));
}

TEST_CASE("warp: zero motion and zero dt") {
  CameraIntrinsics cam = evtest::desk_camera();
  StageScale st = StageScale::make(1.0, cam);
  Event e{0.02, 17, 29, -1};

  SUBCASE("omega = 0 keeps the position but not the sensitivity") {
    WarpedEvent we = warp_event(e, 0.0, Vec3{}, st, cam);
    CHECK(we.xw == 17.0);
    CHECK(we.yw == 29.0);
    CHECK(we.rx.norm() > 0.0);
    CHECK(we.ry.norm() > 0.0);
  }
  SUBCASE("event at the reference time is inert") {
    WarpedEvent we = warp_event(e, e.t, Vec3{1.2, -0.4, 0.8}, st, cam);
    CHECK(we.xw == 17.0);
    CHECK(we.yw == 29.0);
    CHECK(we.rx.norm() == 0.0);
    CHECK(we.ry.norm() == 0.0);
  }
}

TEST_CASE("warp: rx, ry carry the pinned sign d(xw)/d(omega) = -rx") {
  // The warped position is linear in omega, so central differences are exact
  // to rounding. This test is the anchor for the global gradient sign.
  CameraIntrinsics cam = evtest::desk_camera();
  std::mt19937_64 rng(77);
  const double h = 1e-6;
  for (double s : {0.25, 0.5, 1.0}) {
    StageScale st = StageScale::make(s, cam);
    for (int trial = 0; trial < 40; ++trial) {
      Event e;
      e.t = uniform(rng, 0.0, 0.05);
      e.x = std::int16_t(uniform(rng, 0, cam.width - 1));
      e.y = std::int16_t(uniform(rng, 0, cam.height - 1));
      e.p = 1;
      Vec3 w{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
      WarpedEvent base = warp_event(e, 0.0, w, st, cam);
      for (int j = 0; j < 3; ++j) {
        Vec3 wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        WarpedEvent a = warp_event(e, 0.0, wp, st, cam);
        WarpedEvent b = warp_event(e, 0.0, wm, st, cam);
        double fdx = (a.xw - b.xw) / (2 * h);
        double fdy = (a.yw - b.yw) / (2 * h);
        CHECK(close_rel(fdx, -base.rx[j], 1e-5, 1e-9));
        CHECK(close_rel(fdy, -base.ry[j], 1e-5, 1e-9));
      }
    }
  }
}

TEST_CASE("warp: scaled warp equals scaled full-resolution warp") {
  CameraIntrinsics cam = evtest::desk_camera();
  StageScale full = StageScale::make(1.0, cam);
  std::mt19937_64 rng(5);
  for (double s : {0.25, 0.5}) {
    StageScale st = StageScale::make(s, cam);
    for (int trial = 0; trial < 50; ++trial) {
      Event e;
      e.t = uniform(rng, 0.0, 0.05);
      e.x = std::int16_t(uniform(rng, 0, cam.width - 1));
      e.y = std::int16_t(uniform(rng, 0, cam.height - 1));
      e.p = -1;
      Vec3 w{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
      WarpedEvent ws = warp_event(e, 0.0, w, st, cam);
      WarpedEvent w1 = warp_event(e, 0.0, w, full, cam);
      CHECK(close_rel(ws.xw, s * w1.xw, 1e-12, 1e-12));
      CHECK(close_rel(ws.yw, s * w1.yw, 1e-12, 1e-12));
      for (int j = 0; j < 3; ++j) {
        CHECK(close_rel(ws.rx[j], s * w1.rx[j], 1e-12, 1e-15));
        CHECK(close_rel(ws.ry[j], s * w1.ry[j], 1e-12, 1e-15));
      }
    }
  }
}

TEST_CASE("warp: stencil validity matches the four-tap bounds check") {
  CameraIntrinsics cam{20.0, 20.0, 8.0, 6.0, 16, 12};
  std::mt19937_64 rng(11);
  for (double s : {0.25, 0.5, 1.0}) {
    StageScale st = StageScale::make(s, cam);
    int valid_seen = 0, invalid_seen = 0;
    for (int trial = 0; trial < 4000; ++trial) {
      Event e;
      e.t = uniform(rng, 0.0, 0.2);
      e.x = std::int16_t(uniform(rng, 0, cam.width - 1));
      e.y = std::int16_t(uniform(rng, 0, cam.height - 1));
      e.p = 1;
      Vec3 w{uniform(rng, -6, 6), uniform(rng, -6, 6), uniform(rng, -6, 6)};
      WarpedEvent we = warp_event(e, 0.0, w, st, cam);
      bool expect = we.x0 >= 0 && we.x0 + 1 < st.ws && we.y0 >= 0 && we.y0 + 1 < st.hs;
      CHECK(we.valid() == expect);
      if (we.valid()) {
        ++valid_seen;
        CHECK(we.p_act == std::int64_t(we.y0) * st.ws + we.x0);
        CHECK(we.ax >= 0.0);
        CHECK(we.ax < 1.0);
        CHECK(we.ay >= 0.0);
        CHECK(we.ay < 1.0);
      } else {
        ++invalid_seen;
        CHECK(we.p_act == -1);
      }
    }
    // The aggressive motion range must actually exercise both branches.
    CHECK(valid_seen > 0);
    CHECK(invalid_seen > 0);
  }
}

TEST_CASE("warp: stage grids round up and keep ratio follows the scale") {
  CameraIntrinsics cam{100, 100, 120, 90, 240, 180};
  StageScale q = StageScale::make(0.25, cam);
  CHECK(q.hs == 45);
  CHECK(q.ws == 60);
  CHECK(q.keep_ratio() == 0.25);
  CameraIntrinsics odd{10, 10, 5, 5, 63, 47};
  StageScale qo = StageScale::make(0.25, odd);
  CHECK(qo.ws == 16);  // ceil(15.75)
  CHECK(qo.hs == 12);  // ceil(11.75)
}
