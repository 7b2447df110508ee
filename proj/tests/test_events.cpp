#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "evrot/events.hpp"
#include "evrot/synth.hpp"
#include "evrot/warp.hpp"
#include "test_util.hpp"

using namespace evrot;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& body) : path(name) {
    std::ofstream out(path);
    out << body;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

CameraIntrinsics dvs240() { return CameraIntrinsics{200.0, 200.0, 120.0, 90.0, 240, 180}; }

}  // namespace

TEST_CASE("events: loader parses, remaps polarity and validates") {
  SUBCASE("well-formed line") {
    TempFile f("tmp_ev_ok.txt", "0.003811 120 84 1\n0.003912 10 20 0\n");
    auto ev = load_events(f.path, dvs240());
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].t == doctest::Approx(0.003811).epsilon(1e-15));
    CHECK(ev[0].x == 120);
    CHECK(ev[0].y == 84);
    CHECK(ev[0].p == 1);
    CHECK(ev[1].p == -1);
  }
  SUBCASE("comments and blank lines are skipped") {
    TempFile f("tmp_ev_c.txt", "# header\n\n0.1 1 2 1\n");
    CHECK(load_events(f.path, dvs240()).size() == 1);
  }
  SUBCASE("pixel outside the sensor names the line") {
    TempFile f("tmp_ev_oob.txt", "0.1 10 10 1\n0.2 240 10 1\n");
    try {
      load_events(f.path, dvs240());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("bad polarity and malformed lines throw") {
    TempFile f1("tmp_ev_p.txt", "0.1 1 1 7\n");
    CHECK_THROWS_AS(load_events(f1.path, dvs240()), DataError);
    TempFile f2("tmp_ev_m.txt", "0.1 1\n");
    CHECK_THROWS_AS(load_events(f2.path, dvs240()), DataError);
  }
  SUBCASE("decreasing timestamps throw") {
    TempFile f("tmp_ev_t.txt", "0.2 1 1 1\n0.1 1 1 1\n");
    CHECK_THROWS_AS(load_events(f.path, dvs240()), DataError);
  }
  SUBCASE("missing file throws") {
    CHECK_THROWS_AS(load_events("no_such_events.txt", dvs240()), DataError);
  }
}

TEST_CASE("events: save/load round trip is exact") {
  CameraIntrinsics cam = evtest::desk_camera();
  auto ev = evtest::random_events(500, 1, cam);
  save_events("tmp_ev_rt.txt", ev);
  auto back = load_events("tmp_ev_rt.txt", cam);
  REQUIRE(back.size() == ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(back[i].t == ev[i].t);
    CHECK(back[i].x == ev[i].x);
    CHECK(back[i].y == ev[i].y);
    CHECK(back[i].p == ev[i].p);
  }
  std::remove("tmp_ev_rt.txt");
}

TEST_CASE("events: count windowing partitions and drops the tail") {
  CameraIntrinsics cam = evtest::desk_camera();
  auto ev = evtest::random_events(101, 2, cam);
  std::span<const Event> stream(ev.data(), ev.size());

  auto windows = window_by_count(stream, 50);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].first_index == 0);
  CHECK(windows[1].first_index == 50);
  CHECK(windows[0].events.size() == 50);
  CHECK(windows[0].t_ref == ev[0].t);
  CHECK(windows[1].t_ref == ev[50].t);

  // Partition: no overlap, no gap, remainder shorter than one window.
  std::size_t covered = windows.size() * 50;
  CHECK(covered <= ev.size());
  CHECK(ev.size() - covered < 50);

  CHECK(window_by_count(stream, 101).size() == 1);
  CHECK(window_by_count(stream, 102).empty());
  CHECK_THROWS_AS(window_by_count(stream, 0), ConfigError);
}

TEST_CASE("events: imu series lookup clamps and interpolates") {
  SUBCASE("from file") {
    TempFile f("tmp_imu.txt", "0.0 1 2 3 99 99 99\n1.0 3 2 1 99 99 99\n");
    ImuSeries s = load_imu(f.path);
    REQUIRE(s.samples.size() == 2);
    CHECK(s.at(0.0).x == 1.0);          // exact sample
    CHECK(s.at(0.5).x == doctest::Approx(2.0));  // midpoint
    CHECK(s.at(0.5).z == doctest::Approx(2.0));
    CHECK(s.at(-5.0).x == 1.0);         // clamp below
    CHECK(s.at(5.0).x == 3.0);          // clamp above
    CHECK(s.covers(0.7));
    CHECK_FALSE(s.covers(1.7));
  }
  SUBCASE("unsorted imu rejected") {
    TempFile f("tmp_imu_bad.txt", "1.0 1 1 1\n0.5 1 1 1\n");
    CHECK_THROWS_AS(load_imu(f.path), DataError);
  }
  SUBCASE("empty imu rejected") {
    TempFile f("tmp_imu_e.txt", "# nothing\n");
    CHECK_THROWS_AS(load_imu(f.path), DataError);
  }
}

TEST_CASE("events: calibration reader takes the first four numbers") {
  TempFile f("tmp_calib.txt", "199.0 198.0 132.1 bad\n");
  // A corrupted value must not slip through as a partial read.
  CHECK_THROWS_AS(load_calib(f.path, 240, 180), DataError);
  TempFile ok("tmp_calib_ok.txt", "199.0 198.0 132.1 110.7 0.1 -0.2\n");
  CameraIntrinsics cam = load_calib(ok.path, 240, 180);
  CHECK(cam.fx == 199.0);
  CHECK(cam.fy == 198.0);
  CHECK(cam.cx == doctest::Approx(132.1));
  CHECK(cam.cy == doctest::Approx(110.7));
  CHECK(cam.width == 240);
  CHECK(cam.height == 180);
}

TEST_CASE("synth: still camera emits nothing, flow fixed point holds") {
  SynthParams p;
  p.points = 100;
  p.duration = 0.5;
  SynthResult r = synth_scene(p);
  CHECK(r.events.empty());

  // A point at the principal point under pure z rotation never moves.
  double u, v;
  rotational_flow(p.cam.cx, p.cam.cy, Vec3{0, 0, 5.0}, p.cam, &u, &v);
  CHECK(u == 0.0);
  CHECK(v == 0.0);
}

TEST_CASE("synth: rotating scene emits sorted in-bounds events with provenance") {
  SynthParams p;
  p.points = 120;
  p.duration = 0.6;
  p.base = Vec3{0.4, -0.3, 1.2};
  p.seed = 9;
  SynthResult r = synth_scene(p);
  REQUIRE(r.events.size() > 500);
  REQUIRE(r.source.size() == r.events.size());
  for (std::size_t i = 0; i < r.events.size(); ++i) {
    const Event& e = r.events[i];
    CHECK(e.x >= 0);
    CHECK(e.x < p.cam.width);
    CHECK(e.y >= 0);
    CHECK(e.y < p.cam.height);
    CHECK((e.p == 1 || e.p == -1));
    if (i) CHECK(e.t >= r.events[i - 1].t);
    CHECK(r.source[i] >= 0);  // no noise requested
    CHECK(r.source[i] < p.points);
  }
  // IMU carries the exact profile.
  CHECK(r.imu.at(0.25).x == doctest::Approx(p.omega_at(0.25).x).epsilon(1e-12));

  SUBCASE("noise injection is labeled and proportional") {
    SynthParams pn = p;
    pn.noise_fraction = 0.25;
    SynthResult rn = synth_scene(pn);
    std::size_t clean = 0, noise = 0;
    for (auto s : rn.source) (s < 0 ? noise : clean)++;
    CHECK(clean == r.events.size());
    CHECK(noise == std::size_t(0.25 * double(clean)));
  }
  SUBCASE("same seed reproduces the byte-identical stream") {
    SynthResult r2 = synth_scene(p);
    REQUIRE(r2.events.size() == r.events.size());
    for (std::size_t i = 0; i < r.events.size(); ++i) {
      CHECK(r2.events[i].t == r.events[i].t);
      CHECK(r2.events[i].x == r.events[i].x);
    }
  }
}

TEST_CASE("synth: written files load back consistently") {
  SynthParams p;
  p.points = 60;
  p.duration = 0.3;
  p.base = Vec3{0, 0, 1.5};
  SynthResult r = synth_scene(p);
  REQUIRE(!r.events.empty());
  write_synth(".", p, r);
  auto ev = load_events("events.txt", p.cam);
  CHECK(ev.size() == r.events.size());
  ImuSeries imu = load_imu("imu.txt");
  CHECK(imu.samples.size() == r.imu.samples.size());
  CameraIntrinsics cam = load_calib("calib.txt", p.cam.width, p.cam.height);
  CHECK(cam.fx == p.cam.fx);
  std::remove("events.txt");
  std::remove("imu.txt");
  std::remove("calib.txt");
}
