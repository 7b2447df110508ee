#pragma once
#include <cstdint>
#include <vector>

#include "evrot/accumulate.hpp"

namespace evrot {

// Separable, normalized Gaussian. Tap count follows the stage: 3 at quarter,
// 5 at half, 9 at full scale. sigma is in stage pixels.
struct GaussianKernel {
  std::vector<double> w;
  int radius = 0;
  int taps() const { return int(w.size()); }
};

GaussianKernel make_kernel(double stage_scale, double sigma = 1.0);

// Horizontal then vertical pass with zero padding; off-grid taps contribute
// nothing, so border pixels see less kernel mass by design.
Image smooth_image(const Image& img, const GaussianKernel& k);
IweChannels smooth(const IweChannels& ch, const GaussianKernel& k);

// Single-pass accumulators over the blurred channels. Everything the
// objective needs, without keeping the blurred images around.
struct StreamStats {
  double s1 = 0, s2 = 0;      // sum and sum of squares of the blurred count image
  Vec3 g;                     // per-axis sum of blurred_count * blurred_derivative
  Vec3 t;                     // per-axis plain sum of the blurred derivative
  std::int64_t pixels = 0;
};

StreamStats stream_stats(const IweChannels& blurred);

struct Objective {
  double variance = 0;
  Vec3 grad;
  // How much of the window actually landed on the grid, as a count of voted
  // events. Warps that push events off the image lose mass, which the search
  // uses to veto candidates that raise variance by emptying the image
  // instead of sharpening it. Zero means the evaluator does not track it.
  double mass = 0;
};

// Variance and its gradient from the streamed moments:
//   var    = s2/P - (s1/P)^2
//   grad_j = (2/P) * (g_j - s1 * t_j / P)
Objective objective_from_stats(const StreamStats& st);

}  // namespace evrot
