#include "evrot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "evrot/textio.hpp"
#include "evrot/warp.hpp"

namespace evrot {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMargin = 2.0;  // spawn margin from the sensor border, pixels
}  // namespace

Vec3 SynthParams::omega_at(double t) const {
  return Vec3{base.x + amp.x * std::sin(kTwoPi * freq.x * t + phase.x),
              base.y + amp.y * std::sin(kTwoPi * freq.y * t + phase.y),
              base.z + amp.z * std::sin(kTwoPi * freq.z * t + phase.z)};
}

SynthResult synth_scene(const SynthParams& params) {
  if (params.points <= 0 || params.duration <= 0) throw ConfigError("synth: empty scene");
  const CameraIntrinsics& cam = params.cam;
  std::mt19937_64 rng(params.seed);
  auto uniform = [&rng](double lo, double hi) {
    // Fixed 53-bit mapping instead of std::uniform_real_distribution so the
    // stream is stable across standard library versions.
    double u = double(rng() >> 11) * 0x1p-53;
    return lo + (hi - lo) * u;
  };

  struct Point {
    double x, y;
    int polarity;
  };
  std::vector<Point> pts(params.points);
  for (int i = 0; i < params.points; ++i) {
    pts[i].x = uniform(kMargin, cam.width - 1 - kMargin);
    pts[i].y = uniform(kMargin, cam.height - 1 - kMargin);
    pts[i].polarity = (i % 2 == 0) ? 1 : -1;
  }

  struct Raw {
    double t;
    int x, y, p;
    std::int32_t src;
  };
  std::vector<Raw> raw;

  // Midpoint integration of the flow field; step chosen so a point advances
  // well under a pixel per step.
  for (int i = 0; i < params.points; ++i) {
    double x = pts[i].x, y = pts[i].y;
    double t = 0.0;
    int cell_x = static_cast<int>(std::floor(x));
    int cell_y = static_cast<int>(std::floor(y));
    while (t < params.duration) {
      double u, v;
      rotational_flow(x, y, params.omega_at(t), cam, &u, &v);
      double speed = std::abs(u) + std::abs(v);
      double dt = std::min(0.2 / (speed + 1e-6), params.duration / 200.0);
      dt = std::min(dt, params.duration - t + 1e-12);

      double mx = x + 0.5 * dt * u;
      double my = y + 0.5 * dt * v;
      double um, vm;
      rotational_flow(mx, my, params.omega_at(t + 0.5 * dt), cam, &um, &vm);
      x += dt * um;
      y += dt * vm;
      t += dt;

      if (x < 0.0 || x >= cam.width || y < 0.0 || y >= cam.height) {
        // Respawn off-sensor points so the event rate stays roughly steady.
        x = uniform(kMargin, cam.width - 1 - kMargin);
        y = uniform(kMargin, cam.height - 1 - kMargin);
        cell_x = static_cast<int>(std::floor(x));
        cell_y = static_cast<int>(std::floor(y));
        continue;
      }
      int nx = static_cast<int>(std::floor(x));
      int ny = static_cast<int>(std::floor(y));
      if ((nx != cell_x || ny != cell_y) && t <= params.duration) {
        raw.push_back(Raw{t, nx, ny, pts[i].polarity, i});
        cell_x = nx;
        cell_y = ny;
      }
    }
  }

  std::size_t clean = raw.size();
  std::size_t noise = static_cast<std::size_t>(params.noise_fraction * double(clean));
  for (std::size_t k = 0; k < noise; ++k) {
    Raw r;
    r.t = uniform(0.0, params.duration);
    r.x = std::min(cam.width - 1, static_cast<int>(uniform(0.0, double(cam.width))));
    r.y = std::min(cam.height - 1, static_cast<int>(uniform(0.0, double(cam.height))));
    r.p = uniform(0.0, 1.0) < 0.5 ? -1 : 1;
    r.src = -1;
    raw.push_back(r);
  }

  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.t < b.t; });

  SynthResult out;
  out.events.reserve(raw.size());
  out.source.reserve(raw.size());
  for (const Raw& r : raw) {
    out.events.push_back(Event{r.t, static_cast<std::int16_t>(r.x),
                               static_cast<std::int16_t>(r.y),
                               static_cast<std::int8_t>(r.p)});
    out.source.push_back(r.src);
  }

  std::size_t n_imu = static_cast<std::size_t>(params.duration * params.imu_rate_hz) + 1;
  out.imu.samples.reserve(n_imu);
  for (std::size_t k = 0; k < n_imu; ++k) {
    double t = double(k) / params.imu_rate_hz;
    out.imu.samples.push_back(ImuSample{t, params.omega_at(t)});
  }
  return out;
}

void write_synth(const std::string& dir, const SynthParams& params, const SynthResult& result) {
  save_events(dir + "/events.txt", result.events);

  std::ofstream imu(dir + "/imu.txt");
  if (!imu) throw DataError("cannot write " + dir + "/imu.txt");
  for (const ImuSample& s : result.imu.samples) {
    imu << fmt_double(s.t) << ' ' << fmt_double(s.w.x) << ' ' << fmt_double(s.w.y) << ' '
        << fmt_double(s.w.z) << '\n';
  }

  std::ofstream calib(dir + "/calib.txt");
  if (!calib) throw DataError("cannot write " + dir + "/calib.txt");
  calib << fmt_double(params.cam.fx) << ' ' << fmt_double(params.cam.fy) << ' '
        << fmt_double(params.cam.cx) << ' ' << fmt_double(params.cam.cy) << '\n';
}

}  // namespace evrot
