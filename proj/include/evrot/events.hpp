#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evrot/textio.hpp"
#include "evrot/vec3.hpp"

namespace evrot {

struct Event {
  double t = 0.0;       // seconds
  std::int16_t x = 0, y = 0;
  std::int8_t p = 0;    // -1 or +1
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
};

// View into a contiguous slice of an event stream. t_ref is the warp target
// time, fixed to the first event's timestamp of the window.
struct EventWindow {
  std::span<const Event> events;
  double t_ref = 0.0;
  std::size_t first_index = 0;  // position of events[0] in the source stream
};

struct ImuSample {
  double t = 0.0;
  Vec3 w;
};

// Angular-rate reference, sorted by time. Lookup clamps outside the covered
// range and interpolates linearly inside it.
class ImuSeries {
 public:
  std::vector<ImuSample> samples;

  bool empty() const { return samples.empty(); }
  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }
  bool covers(double t) const { return !empty() && t >= t_begin() && t <= t_end(); }
  Vec3 at(double t) const;
};

// Text loaders. Lines are whitespace-separated; '#' starts a comment. Errors
// carry the file path and 1-based line number.
std::vector<Event> load_events(const std::string& path, const CameraIntrinsics& cam);
void save_events(const std::string& path, std::span<const Event> events);
ImuSeries load_imu(const std::string& path);
// Reads fx fy cx cy from the first four numbers of the file; the sensor pixel
// size is not stored in calibration files, so it comes from the caller.
CameraIntrinsics load_calib(const std::string& path, int width, int height);

// Splits a sorted stream into back-to-back windows of exactly `count` events.
// A trailing partial window is dropped.
std::vector<EventWindow> window_by_count(std::span<const Event> stream, std::size_t count);

}  // namespace evrot
