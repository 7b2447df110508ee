#include "evrot/accumulate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "evrot/textio.hpp"

namespace evrot {

namespace {

inline double quantize(double v, double step) {
  return step > 0.0 ? std::nearbyint(v / step) * step : v;
}

}  // namespace

TapDeltas bilinear_vote(const WarpedEvent& we, double quant_step) {
  const double ax = we.ax, ay = we.ay;
  const double p = double(we.polarity);

  // Tap weights and their partials with respect to the warped position.
  const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const double dwdx[4] = {-(1 - ay), (1 - ay), -ay, ay};
  const double dwdy[4] = {-(1 - ax), -ax, (1 - ax), ax};
  const int ox[4] = {0, 1, 0, 1};
  const int oy[4] = {0, 0, 1, 1};

  TapDeltas td;
  for (int k = 0; k < 4; ++k) {
    Tap& tap = td.taps[k];
    tap.x = we.x0 + ox[k];
    tap.y = we.y0 + oy[k];
    tap.d_iwe = quantize(p * w[k], quant_step);
    for (int j = 0; j < 3; ++j) {
      // Chain rule through the warp; the warp stores rx = -d(xw)/d(omega).
      double g = -p * (dwdx[k] * we.rx[j] + dwdy[k] * we.ry[j]);
      tap.d[j] = quantize(g, quant_step);
    }
  }
  return td;
}

void accumulate_event(IweChannels& ch, const TapDeltas& td) {
  for (const Tap& tap : td.taps) {
    ch.iwe.at(tap.y, tap.x) += tap.d_iwe;
    ch.dwx.at(tap.y, tap.x) += tap.d[0];
    ch.dwy.at(tap.y, tap.x) += tap.d[1];
    ch.dwz.at(tap.y, tap.x) += tap.d[2];
  }
}

namespace {

void accumulate_range(IweChannels& ch, const EventWindow& win,
                      std::span<const std::uint8_t> mask, const Vec3& omega,
                      const StageScale& st, const CameraIntrinsics& cam, double quant_step,
                      std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    WarpedEvent we = warp_event(win.events[i], win.t_ref, omega, st, cam);
    if (!we.valid()) continue;
    accumulate_event(ch, bilinear_vote(we, quant_step));
    ch.voted += 1;
  }
}

}  // namespace

IweChannels accumulate_window(const EventWindow& win, std::span<const std::uint8_t> mask,
                              const Vec3& omega, const StageScale& st,
                              const CameraIntrinsics& cam, double quant_step, int threads) {
  if (!mask.empty() && mask.size() != win.events.size())
    throw ConfigError("event mask length does not match window");

  IweChannels out(st);
  const std::size_t n = win.events.size();
  if (threads <= 1 || n < 1024) {
    accumulate_range(out, win, mask, omega, st, cam, quant_step, 0, n);
    return out;
  }

  // Shard the event range, then reduce private images in shard order so the
  // result does not depend on scheduling.
  const std::size_t shards = std::size_t(threads);
  std::vector<IweChannels> partial(shards, IweChannels(st));
  std::vector<std::thread> pool;
  for (std::size_t sidx = 0; sidx < shards; ++sidx) {
    std::size_t lo = n * sidx / shards;
    std::size_t hi = n * (sidx + 1) / shards;
    pool.emplace_back([&, sidx, lo, hi] {
      accumulate_range(partial[sidx], win, mask, omega, st, cam, quant_step, lo, hi);
    });
  }
  for (auto& th : pool) th.join();
  for (std::size_t sidx = 0; sidx < shards; ++sidx) {
    for (int c = 0; c < 4; ++c) {
      const Image& src = partial[sidx].channel(c);
      Image& dst = out.channel(c);
      for (std::size_t k = 0; k < dst.v.size(); ++k) dst.v[k] += src.v[k];
    }
    out.voted += partial[sidx].voted;
  }
  return out;
}

void dump_channels(const std::string& path, const IweChannels& ch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const char magic[4] = {'I', 'W', 'C', '1'};
  out.write(magic, 4);
  std::uint32_t hdr[3] = {std::uint32_t(ch.iwe.h), std::uint32_t(ch.iwe.w), 4u};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  for (int c = 0; c < 4; ++c) {
    const Image& img = ch.channel(c);
    out.write(reinterpret_cast<const char*>(img.v.data()),
              std::streamsize(img.v.size() * sizeof(double)));
  }
}

IweChannels load_channels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  std::uint32_t hdr[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!in || std::memcmp(magic, "IWC1", 4) != 0) throw DataError(path + ": not a channel dump");
  if (hdr[2] != 4) throw DataError(path + ": unexpected channel count");
  StageScale st;
  st.s = 1.0;
  st.hs = int(hdr[0]);
  st.ws = int(hdr[1]);
  IweChannels ch(st);
  for (int c = 0; c < 4; ++c) {
    Image& img = ch.channel(c);
    in.read(reinterpret_cast<char*>(img.v.data()), std::streamsize(img.v.size() * sizeof(double)));
  }
  if (!in) throw DataError(path + ": truncated channel dump");
  return ch;
}

void export_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  double lo = img.v.empty() ? 0.0 : img.v[0], hi = lo;
  for (double v : img.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n" << img.w << ' ' << img.h << "\n255\n";
  for (double v : img.v) {
    int g = int(255.0 * (v - lo) / span + 0.5);
    out.put(char(g < 0 ? 0 : (g > 255 ? 255 : g)));
  }
}

}  // namespace evrot
