#include "evrot/events.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "evrot/textio.hpp"

namespace evrot {

namespace {

// Strips comments and reports whether anything is left to parse.
bool strip_line(std::string& line) {
  auto hash = line.find('#');
  if (hash != std::string::npos) line.resize(hash);
  return line.find_first_not_of(" \t\r\n") != std::string::npos;
}

[[noreturn]] void fail(const std::string& path, std::size_t lineno, const std::string& what) {
  throw DataError(path + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace

Vec3 ImuSeries::at(double t) const {
  if (empty()) throw DataError("imu lookup on empty series");
  if (t <= samples.front().t) return samples.front().w;
  if (t >= samples.back().t) return samples.back().w;
  // First sample with time > t; its predecessor brackets t from below.
  std::size_t lo = 0, hi = samples.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (samples[mid].t <= t) lo = mid; else hi = mid;
  }
  const ImuSample& a = samples[lo];
  const ImuSample& b = samples[hi];
  if (b.t == a.t) return a.w;
  double u = (t - a.t) / (b.t - a.t);
  return a.w + (b.w - a.w) * u;
}

std::vector<Event> load_events(const std::string& path, const CameraIntrinsics& cam) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open events file: " + path);
  std::vector<Event> out;
  std::string line;
  std::size_t lineno = 0;
  double prev_t = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!strip_line(line)) continue;
    std::istringstream ss(line);
    double t;
    long x, y, p;
    if (!(ss >> t >> x >> y >> p)) fail(path, lineno, "expected 't x y p'");
    if (x < 0 || x >= cam.width || y < 0 || y >= cam.height)
      fail(path, lineno, "pixel (" + std::to_string(x) + "," + std::to_string(y) +
                             ") outside " + std::to_string(cam.width) + "x" +
                             std::to_string(cam.height) + " sensor");
    if (p != 0 && p != 1) fail(path, lineno, "polarity must be 0 or 1");
    if (!out.empty() && t < prev_t) fail(path, lineno, "timestamps decrease");
    prev_t = t;
    out.push_back(Event{t, static_cast<std::int16_t>(x), static_cast<std::int16_t>(y),
                        static_cast<std::int8_t>(p == 1 ? 1 : -1)});
  }
  return out;
}

void save_events(const std::string& path, std::span<const Event> events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write events file: " + path);
  for (const Event& e : events) {
    out << fmt_double(e.t) << ' ' << e.x << ' ' << e.y << ' ' << (e.p > 0 ? 1 : 0) << '\n';
  }
}

ImuSeries load_imu(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open imu file: " + path);
  ImuSeries s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!strip_line(line)) continue;
    std::istringstream ss(line);
    ImuSample smp;
    // Trailing columns (accelerometer etc.) are ignored.
    if (!(ss >> smp.t >> smp.w.x >> smp.w.y >> smp.w.z))
      fail(path, lineno, "expected 't wx wy wz ...'");
    if (!s.samples.empty() && smp.t < s.samples.back().t)
      fail(path, lineno, "timestamps decrease");
    s.samples.push_back(smp);
  }
  if (s.samples.empty()) throw DataError(path + ": no imu samples");
  return s;
}

CameraIntrinsics load_calib(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration file: " + path);
  CameraIntrinsics cam;
  cam.width = width;
  cam.height = height;
  if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy))
    throw DataError(path + ": expected at least four numbers (fx fy cx cy)");
  if (cam.fx <= 0 || cam.fy <= 0) throw DataError(path + ": non-positive focal length");
  if (width <= 0 || height <= 0) throw ConfigError("sensor size must be positive");
  return cam;
}

std::vector<EventWindow> window_by_count(std::span<const Event> stream, std::size_t count) {
  if (count == 0) throw ConfigError("window size must be positive");
  std::vector<EventWindow> out;
  for (std::size_t base = 0; base + count <= stream.size(); base += count) {
    EventWindow w;
    w.events = stream.subspan(base, count);
    w.t_ref = w.events.front().t;
    w.first_index = base;
    out.push_back(w);
  }
  return out;
}

}  // namespace evrot
