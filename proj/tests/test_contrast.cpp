#include <doctest.h>

#include "evrot/contrast.hpp"
#include "test_util.hpp"

using namespace evrot;
using evtest::close_rel;
using evtest::uniform;

namespace {

Image random_image(int h, int w, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  Image img(h, w);
  for (double& v : img.v) v = uniform(rng, lo, hi);
  return img;
}

// Independent oracle: dense 2-D convolution with the outer-product kernel,
// zero padding.
Image conv2d_oracle(const Image& img, const GaussianKernel& k) {
  Image out(img.h, img.w);
  int r = k.radius;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k.taps(); ++i)
        for (int j = 0; j < k.taps(); ++j) {
          int yy = y + i - r, xx = x + j - r;
          if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) continue;
          acc += k.w[i] * k.w[j] * img.at(yy, xx);
        }
      out.at(y, x) = acc;
    }
  return out;
}

IweChannels random_channels(const StageScale& st, std::uint64_t seed) {
  IweChannels ch(st);
  for (int c = 0; c < 4; ++c) ch.channel(c) = random_image(st.hs, st.ws, seed + c);
  return ch;
}

}  // namespace

TEST_CASE("kernel: tap counts by stage, symmetry, unit mass") {
  CHECK(make_kernel(0.25).taps() == 3);
  CHECK(make_kernel(0.5).taps() == 5);
  CHECK(make_kernel(1.0).taps() == 9);
  for (double s : {0.25, 0.5, 1.0}) {
    GaussianKernel k = make_kernel(s, 1.0);
    double sum = 0.0;
    for (int i = 0; i < k.taps(); ++i) {
      sum += k.w[i];
      CHECK(k.w[i] == k.w[k.taps() - 1 - i]);
      if (i != k.radius) CHECK(k.w[i] < k.w[k.radius]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kernel: frozen center weight at full scale, sigma 1") {
  double denom = 0.0;
  for (int d = -4; d <= 4; ++d) denom += std::exp(-0.5 * d * d);
  GaussianKernel k = make_kernel(1.0, 1.0);
  CHECK(k.w[k.radius] == doctest::Approx(1.0 / denom).epsilon(1e-14));
}

TEST_CASE("kernel: tiny sigma degenerates to identity, bad sigma throws") {
  GaussianKernel k = make_kernel(1.0, 1e-6);
  CHECK(k.w[k.radius] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(make_kernel(1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(make_kernel(1.0, -1.0), ConfigError);
}

TEST_CASE("smooth: hand identity kernel passes the image through") {
  GaussianKernel ident;
  ident.radius = 1;
  ident.w = {0.0, 1.0, 0.0};
  Image img = random_image(9, 13, 3);
  Image out = smooth_image(img, ident);
  for (std::size_t i = 0; i < img.v.size(); ++i) CHECK(out.v[i] == img.v[i]);
}

TEST_CASE("smooth: constant image stays constant away from the border") {
  // Zero padding starves the outer ring, so exact preservation holds on the
  // interior only; border pixels must come out strictly smaller.
  GaussianKernel k = make_kernel(1.0, 1.0);
  Image img(20, 24);
  for (double& v : img.v) v = 3.25;
  Image out = smooth_image(img, k);
  int r = k.radius;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      bool interior = y >= r && y < img.h - r && x >= r && x < img.w - r;
      if (interior)
        CHECK(out.at(y, x) == doctest::Approx(3.25).epsilon(1e-12));
      else
        CHECK(out.at(y, x) < 3.25);
    }
}

TEST_CASE("smooth: impulse response is the outer-product kernel") {
  GaussianKernel k = make_kernel(0.5, 1.0);
  Image img(15, 17);
  img.at(7, 8) = 1.0;
  Image out = smooth_image(img, k);
  Image expect = conv2d_oracle(img, k);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    CHECK(close_rel(out.v[i], expect.v[i], 1e-12, 1e-15));
  int r = k.radius;
  CHECK(out.at(7, 8) == doctest::Approx(k.w[r] * k.w[r]).epsilon(1e-12));
  CHECK(out.at(7 - 1, 8) == doctest::Approx(k.w[r - 1] * k.w[r]).epsilon(1e-12));
}

TEST_CASE("smooth: separable passes equal dense 2-D convolution") {
  for (double s : {0.25, 0.5, 1.0}) {
    GaussianKernel k = make_kernel(s, 1.3);
    Image img = random_image(18, 22, 37 + int(s * 8));
    Image fast = smooth_image(img, k);
    Image slow = conv2d_oracle(img, k);
    for (std::size_t i = 0; i < fast.v.size(); ++i)
      CHECK(close_rel(fast.v[i], slow.v[i], 1e-12, 1e-14));
  }
}

TEST_CASE("stats: stream accumulators match a two-pass oracle") {
  StageScale st;
  st.s = 1.0;
  st.hs = 8;
  st.ws = 8;
  for (int trial = 0; trial < 30; ++trial) {
    IweChannels ch = random_channels(st, 100 + trial);
    StreamStats s = stream_stats(ch);

    double s1 = 0, s2 = 0, g[3] = {0, 0, 0}, t[3] = {0, 0, 0};
    for (int y = 0; y < st.hs; ++y)
      for (int x = 0; x < st.ws; ++x) {
        double iv = ch.iwe.at(y, x);
        s1 += iv;
        s2 += iv * iv;
        for (int j = 0; j < 3; ++j) {
          double dv = ch.channel(1 + j).at(y, x);
          g[j] += iv * dv;
          t[j] += dv;
        }
      }
    CHECK(close_rel(s.s1, s1, 1e-12, 1e-12));
    CHECK(close_rel(s.s2, s2, 1e-12, 1e-12));
    for (int j = 0; j < 3; ++j) {
      CHECK(close_rel(s.g[j], g[j], 1e-12, 1e-12));
      CHECK(close_rel(s.t[j], t[j], 1e-12, 1e-12));
    }
    CHECK(s.pixels == 64);
  }
}

TEST_CASE("objective: moment form equals the centered two-pass form") {
  StageScale st;
  st.s = 1.0;
  st.hs = 10;
  st.ws = 12;
  for (int trial = 0; trial < 50; ++trial) {
    IweChannels ch = random_channels(st, 500 + trial);
    Objective o = objective_from_stats(stream_stats(ch));

    // Centered oracle evaluated directly from the images.
    double p = double(st.hs) * st.ws;
    double mean = 0.0;
    for (double v : ch.iwe.v) mean += v;
    mean /= p;
    double var = 0.0;
    Vec3 grad;
    for (int y = 0; y < st.hs; ++y)
      for (int x = 0; x < st.ws; ++x) {
        double dc = ch.iwe.at(y, x) - mean;
        var += dc * dc;
        grad.x += dc * ch.dwx.at(y, x);
        grad.y += dc * ch.dwy.at(y, x);
        grad.z += dc * ch.dwz.at(y, x);
      }
    var /= p;
    grad = grad * (2.0 / p);
    CHECK(close_rel(o.variance, var, 1e-12, 1e-13));
    for (int j = 0; j < 3; ++j) CHECK(close_rel(o.grad[j], grad[j], 1e-12, 1e-13));
  }
}

TEST_CASE("objective: degenerate inputs") {
  SUBCASE("all-zero stats give zero variance and gradient") {
    StreamStats s;
    s.pixels = 64;
    Objective o = objective_from_stats(s);
    CHECK(o.variance == 0.0);
    CHECK(o.grad.norm() == 0.0);
  }
  SUBCASE("constant image has (numerically) zero variance") {
    StageScale st;
    st.s = 1.0;
    st.hs = 6;
    st.ws = 6;
    IweChannels ch(st);
    for (double& v : ch.iwe.v) v = 2.5;
    Objective o = objective_from_stats(stream_stats(ch));
    CHECK(o.variance >= 0.0);
    CHECK(o.variance < 1e-12);
  }
  SUBCASE("slightly negative one-pass variance clamps, badly negative throws") {
    StreamStats s;
    s.pixels = 4;
    s.s1 = 4.0;      // mean 1, mean^2 = 1
    s.s2 = 4.0 - 4 * 0.5e-12;
    CHECK(objective_from_stats(s).variance == 0.0);
    s.s2 = 4.0 - 4 * 5e-12;
    CHECK_THROWS_AS(objective_from_stats(s), DataError);
    s.pixels = 0;
    CHECK_THROWS_AS(objective_from_stats(s), ConfigError);
  }
}

TEST_CASE("objective: analytic gradient matches finite differences end to end") {
  CameraIntrinsics cam = evtest::desk_camera();
  std::vector<Event> ev = evtest::random_events(800, 55, cam);
  EventWindow win = evtest::window_over(ev);
  const double h = 1e-6;

  auto evaluate = [&](const Vec3& w, const StageScale& st, const GaussianKernel& k) {
    IweChannels ch = accumulate_window(win, {}, w, st, cam);
    return objective_from_stats(stream_stats(smooth(ch, k)));
  };

  for (double s : {0.5, 1.0}) {
    StageScale st = StageScale::make(s, cam);
    GaussianKernel k = make_kernel(s, 1.0);
    Vec3 w{0.35, -0.2, 0.6};
    Objective base = evaluate(w, st, k);
    for (int j = 0; j < 3; ++j) {
      Vec3 wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      double fd = (evaluate(wp, st, k).variance - evaluate(wm, st, k).variance) / (2 * h);
      CHECK(close_rel(fd, base.grad[j], 1e-3, 1e-6));
    }
  }
}
