#include "evrot/contrast.hpp"

#include <cmath>

#include "evrot/textio.hpp"

namespace evrot {

GaussianKernel make_kernel(double stage_scale, double sigma) {
  if (sigma <= 0.0) throw ConfigError("smoothing sigma must be positive");
  int taps = stage_scale <= 0.26 ? 3 : (stage_scale <= 0.51 ? 5 : 9);
  GaussianKernel k;
  k.radius = taps / 2;
  k.w.resize(taps);
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    double d = double(i - k.radius);
    k.w[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k.w[i];
  }
  for (double& w : k.w) w /= sum;
  return k;
}

Image smooth_image(const Image& img, const GaussianKernel& k) {
  Image tmp(img.h, img.w);
  Image out(img.h, img.w);
  const int r = k.radius;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k.taps(); ++i) {
        int xx = x + i - r;
        if (xx >= 0 && xx < img.w) acc += k.w[i] * img.at(y, xx);
      }
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k.taps(); ++i) {
        int yy = y + i - r;
        if (yy >= 0 && yy < img.h) acc += k.w[i] * tmp.at(yy, x);
      }
      out.at(y, x) = acc;
    }
  return out;
}

IweChannels smooth(const IweChannels& ch, const GaussianKernel& k) {
  IweChannels out(ch.scale);
  for (int c = 0; c < 4; ++c) out.channel(c) = smooth_image(ch.channel(c), k);
  return out;
}

StreamStats stream_stats(const IweChannels& b) {
  StreamStats st;
  const std::size_t n = b.iwe.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    double iv = b.iwe.v[i];
    st.s1 += iv;
    st.s2 += iv * iv;
    st.g.x += iv * b.dwx.v[i];
    st.g.y += iv * b.dwy.v[i];
    st.g.z += iv * b.dwz.v[i];
    st.t.x += b.dwx.v[i];
    st.t.y += b.dwy.v[i];
    st.t.z += b.dwz.v[i];
  }
  st.pixels = std::int64_t(n);
  return st;
}

Objective objective_from_stats(const StreamStats& st) {
  if (st.pixels <= 0) throw ConfigError("stats over an empty grid");
  const double p = double(st.pixels);
  const double mean = st.s1 / p;
  Objective o;
  o.variance = st.s2 / p - mean * mean;
  // The two-pass definition is non-negative; the one-pass form may dip a hair
  // below zero in floating point. Anything further negative is a real bug.
  if (o.variance < 0.0) {
    if (o.variance < -1e-12) throw DataError("negative variance from moment accumulation");
    o.variance = 0.0;
  }
  o.grad = (st.g - st.t * mean) * (2.0 / p);
  return o;
}

}  // namespace evrot
