#pragma once
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evrot/textio.hpp"
#include "evrot/warp.hpp"

namespace evrot {

struct Image {
  int h = 0, w = 0;
  std::vector<double> v;

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), v(std::size_t(h_) * w_, 0.0) {}
  double& at(int y, int x) { return v[std::size_t(y) * w + x]; }
  double at(int y, int x) const { return v[std::size_t(y) * w + x]; }
};

// Event-count image plus its three angular-velocity derivative images, all on
// the same stage grid. Channel order everywhere: iwe, dwx, dwy, dwz.
struct IweChannels {
  StageScale scale;
  Image iwe, dwx, dwy, dwz;
  std::int64_t voted = 0;  // events whose whole stencil landed on the grid

  explicit IweChannels(const StageScale& st)
      : scale(st), iwe(st.hs, st.ws), dwx(st.hs, st.ws), dwy(st.hs, st.ws), dwz(st.hs, st.ws) {}
  Image& channel(int c) { return c == 0 ? iwe : (c == 1 ? dwx : (c == 2 ? dwy : dwz)); }
  const Image& channel(int c) const {
    return c == 0 ? iwe : (c == 1 ? dwx : (c == 2 ? dwy : dwz));
  }
};

// One bilinear tap: target cell plus the four per-channel deltas.
struct Tap {
  int x = 0, y = 0;
  double d_iwe = 0;
  std::array<double, 3> d{};  // derivative-channel deltas for wx, wy, wz
};

struct TapDeltas {
  std::array<Tap, 4> taps;  // order: (x0,y0), (x0+1,y0), (x0,y0+1), (x0+1,y0+1)
};

// Splits the event's polarity over the 2x2 stencil. The derivative deltas use
// d(x')/d(omega) = -rx, so they are the true per-cell derivatives of the vote.
// quant_step > 0 snaps every delta to that grid (reorder-exact test mode).
TapDeltas bilinear_vote(const WarpedEvent& we, double quant_step = 0.0);

void accumulate_event(IweChannels& ch, const TapDeltas& td);

// Direct dense accumulation of the masked window events; the arithmetic
// reference for the engine model. An empty mask selects every event. Events
// whose warped stencil leaves the grid contribute nothing. With threads > 1
// events are sharded and per-shard images reduced in shard order.
IweChannels accumulate_window(const EventWindow& win, std::span<const std::uint8_t> mask,
                              const Vec3& omega, const StageScale& st,
                              const CameraIntrinsics& cam, double quant_step = 0.0,
                              int threads = 1);

// Debug container format: "IWC1", u32 h, u32 w, u32 channel count, then each
// channel row-major as 64-bit floats, host byte order.
void dump_channels(const std::string& path, const IweChannels& ch);
IweChannels load_channels(const std::string& path);

// 8-bit PGM with min..max of the image stretched to 0..255.
void export_pgm(const std::string& path, const Image& img);

}  // namespace evrot
