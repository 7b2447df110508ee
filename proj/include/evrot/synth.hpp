#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "evrot/events.hpp"

namespace evrot {

// Synthetic scene: a fixed set of edge points observed by a camera rotating
// with w(t) = base + amp*sin(2*pi*freq*t + phase), per axis. Points drift
// with the rotational image-plane flow and emit an event each time they enter
// a new pixel cell.
struct SynthParams {
  CameraIntrinsics cam{40.0, 40.0, 32.0, 24.0, 64, 48};
  int points = 240;
  double duration = 2.0;        // seconds
  double noise_fraction = 0.0;  // noise events as a fraction of clean events
  double imu_rate_hz = 1000.0;
  std::uint64_t seed = 1;
  Vec3 base, amp, freq, phase;

  Vec3 omega_at(double t) const;
};

struct SynthResult {
  std::vector<Event> events;
  // Texture point that generated each event; -1 for injected noise.
  std::vector<std::int32_t> source;
  ImuSeries imu;
};

SynthResult synth_scene(const SynthParams& params);

// Writes events.txt, imu.txt and calib.txt into an existing directory.
void write_synth(const std::string& dir, const SynthParams& params, const SynthResult& result);

}  // namespace evrot
