#include <doctest.h>

#include <limits>

#include "evrot/optimizer.hpp"
#include "test_util.hpp"

using namespace evrot;
using evtest::uniform;

namespace {

// Concave quadratic C(w) = -(w - t)' A (w - t) with A positive definite.
// Closed-form maximizer t and gradient -2 A (w - t); the usual optimizer
// oracle.
struct Quadratic {
  double a[3][3];
  Vec3 target;

  Vec3 apply(const Vec3& v) const {
    Vec3 r;
    for (int i = 0; i < 3; ++i) r[i] = a[i][0] * v.x + a[i][1] * v.y + a[i][2] * v.z;
    return r;
  }
  Objective eval(const Vec3& w) const {
    Vec3 d = w - target;
    Vec3 ad = apply(d);
    return Objective{-d.dot(ad), Vec3{-2.0 * ad.x, -2.0 * ad.y, -2.0 * ad.z}};
  }
  // Exact maximizing step along dir from w.
  double exact_step(const Vec3& w, const Vec3& dir) const {
    Vec3 g = eval(w).grad;
    double denom = 2.0 * dir.dot(apply(dir));
    return denom > 0.0 ? g.dot(dir) / denom : 0.0;
  }
};

Quadratic diag_quadratic() {
  Quadratic q{};
  q.a[0][0] = 2.0;
  q.a[1][1] = 1.0;
  q.a[2][2] = 0.5;
  q.target = Vec3{0.4, -0.7, 1.1};
  return q;
}

Quadratic random_spd(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double r[3][3];
  for (auto& row : r)
    for (double& v : row) v = uniform(rng, -1, 1);
  Quadratic q{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      q.a[i][j] = 0.0;
      for (int k = 0; k < 3; ++k) q.a[i][j] += r[k][i] * r[k][j];
      if (i == j) q.a[i][j] += 0.3;
    }
  q.target = Vec3{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
  return q;
}

}  // namespace

TEST_CASE("optimizer: conjugate directions finish a 3-D quadratic in 3 exact steps") {
  Quadratic q = diag_quadratic();
  OptOptions opt;
  OptState st = init_state(Vec3{2.0, 2.0, -1.5}, opt);
  EvalFn eval = [&](const Vec3& w) { return q.eval(w); };
  LineSearchFn exact = [&](const Vec3& w, const Vec3& d) { return q.exact_step(w, d); };
  for (int i = 0; i < 3; ++i) update(st, eval, opt, &exact);
  CHECK((st.omega - q.target).norm() < 1e-10);
}

TEST_CASE("optimizer: backtracking reaches the maximizer of a quadratic") {
  Quadratic q = diag_quadratic();
  OptOptions opt;
  opt.step0_px = 0.25;
  opt.step_max_px = 2.0;
  OptState st = init_state(Vec3{1.4, 0.3, -0.2}, opt);
  EvalFn eval = [&](const Vec3& w) { return q.eval(w); };
  int iters = 0;
  while (iters < 20 && (st.omega - q.target).norm() >= 1e-6) {
    update(st, eval, opt);
    ++iters;
  }
  CHECK((st.omega - q.target).norm() < 1e-6);
  CHECK(iters <= 20);
}

TEST_CASE("optimizer: first direction is the raw gradient") {
  Quadratic q = diag_quadratic();
  OptOptions opt;
  OptState st = init_state(Vec3{1.0, 1.0, 1.0}, opt);
  Vec3 g0 = q.eval(st.omega).grad;
  update(st, [&](const Vec3& w) { return q.eval(w); }, opt);
  CHECK(st.direction.x == g0.x);
  CHECK(st.direction.y == g0.y);
  CHECK(st.direction.z == g0.z);
}

TEST_CASE("optimizer: clamped negative beta falls back to the gradient exactly") {
  // Scripted objective: the first evaluation returns g1, every later one g2
  // with g2.(g2-g1) < 0, forcing the raw Polak-Ribiere beta negative.
  Vec3 g1{1.0, 0.0, 0.0}, g2{0.5, 0.0, 0.0};
  int calls = 0;
  EvalFn eval = [&](const Vec3&) {
    ++calls;
    return Objective{double(calls), calls == 1 ? g1 : g2};
  };
  OptOptions opt;
  OptState st = init_state(Vec3{}, opt);
  CHECK(update(st, eval, opt));  // seeds with g1, accepts a step, caches g2
  CHECK(update(st, eval, opt));  // beta = g2.(g2-g1)/|g1|^2 = -0.25 -> clamp
  CHECK(st.direction.x == g2.x);
  CHECK(st.direction.y == g2.y);
  CHECK(st.direction.z == g2.z);
}

TEST_CASE("optimizer: accepted steps never lower the objective") {
  OptOptions opt;
  opt.step0_px = 0.1;
  for (int trial = 0; trial < 20; ++trial) {
    Quadratic q = random_spd(700 + trial);
    std::mt19937_64 rng(40 + trial);
    OptState st = init_state(
        Vec3{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)}, opt);
    EvalFn eval = [&](const Vec3& w) { return q.eval(w); };
    double prev = q.eval(st.omega).variance;
    for (int i = 0; i < 30; ++i) {
      update(st, eval, opt);
      CHECK(st.obj.variance >= prev - 1e-12);
      prev = st.obj.variance;
    }
  }
}

TEST_CASE("optimizer: degenerate inputs") {
  OptOptions opt;
  SUBCASE("zero gradient leaves omega untouched") {
    EvalFn eval = [](const Vec3&) { return Objective{1.0, Vec3{}}; };
    OptState st = init_state(Vec3{0.3, 0.3, 0.3}, opt);
    CHECK(update(st, eval, opt));
    CHECK(st.omega.x == 0.3);
    CHECK(st.iter == 1);
  }
  SUBCASE("non-finite gradient is rejected loudly") {
    EvalFn eval = [](const Vec3&) {
      return Objective{1.0, Vec3{std::numeric_limits<double>::quiet_NaN(), 0, 0}};
    };
    OptState st = init_state(Vec3{}, opt);
    CHECK_THROWS_AS(update(st, eval, opt), DataError);
  }
  SUBCASE("hopeless line search rejects the step and requests a restart") {
    // Objective falls with every evaluation, so no trial can improve on the
    // cached value.
    int calls = 0;
    EvalFn eval = [&](const Vec3&) {
      ++calls;
      return Objective{-double(calls), Vec3{1.0, 0.0, 0.0}};
    };
    OptState st = init_state(Vec3{}, opt);
    CHECK_FALSE(update(st, eval, opt));
    CHECK(st.omega.x == 0.0);
    CHECK(st.restart);
    CHECK(st.iter == 0);
  }
}

TEST_CASE("optimizer: mass veto rejects variance gained by emptying the grid") {
  // Scripted landscape: variance keeps rising with distance from the origin,
  // which is exactly how a warp that dumps events off the image looks. Mass
  // collapses past |omega| = 1, so the veto has to hold the line there.
  auto eval_at = [](const Vec3& w) {
    double r = w.norm();
    return Objective{1.0 + r, Vec3{1.0, 0.0, 0.0}, r <= 1.0 ? 100.0 : 5.0};
  };
  OptOptions opt;
  opt.step0_px = 0.4;
  OptState st = init_state(Vec3{}, opt);
  begin_stage(st, eval_at(st.omega), opt);
  CHECK(st.entry_mass == 100.0);
  EvalFn eval = [&](const Vec3& w) { return eval_at(w); };
  for (int i = 0; i < 6; ++i) update(st, eval, opt);
  // Every accepted step stayed inside the full-mass region.
  CHECK(st.omega.norm() <= 1.0);
  CHECK(st.obj.mass == 100.0);

  SUBCASE("disabling the veto lets the runaway through") {
    OptOptions open = opt;
    open.keep_mass = 0.0;
    OptState loose = init_state(Vec3{}, open);
    begin_stage(loose, eval_at(loose.omega), open);
    for (int i = 0; i < 6; ++i) update(loose, eval, open);
    CHECK(loose.omega.norm() > 1.0);
  }
}

TEST_CASE("optimizer: axis probe rescues a failed search with a lying slope") {
  // The reported gradient points along +x where everything is downhill; the
  // actual improvement lives one probe radius along +y. This is the shape of
  // the vote-lattice trap, where the analytic slope is ripple noise.
  auto eval_at = [](const Vec3& w) {
    if (w.y > 0.3) return Objective{3.0, Vec3{1, 0, 0}, 10.0};
    if (w.y < -0.3) return Objective{0.2, Vec3{1, 0, 0}, 10.0};
    if (w.x != 0.0) return Objective{0.5, Vec3{1, 0, 0}, 10.0};
    return Objective{1.0, Vec3{1, 0, 0}, 10.0};
  };
  EvalFn eval = [&](const Vec3& w) { return eval_at(w); };
  OptOptions opt;
  opt.step0_px = 0.4;

  OptState st = init_state(Vec3{}, opt);
  begin_stage(st, eval_at(st.omega), opt);
  CHECK(st.probe_radius == doctest::Approx(0.4));
  CHECK(update(st, eval, opt));
  CHECK(st.omega.x == 0.0);
  CHECK(st.omega.y == doctest::Approx(0.4));
  CHECK(st.obj.variance == 3.0);
  CHECK(st.iter == 1);
  CHECK(st.restart);

  SUBCASE("with the probe off the same search just fails") {
    OptOptions off = opt;
    off.probe_on_fail = false;
    OptState stuck = init_state(Vec3{}, off);
    begin_stage(stuck, eval_at(stuck.omega), off);
    CHECK_FALSE(update(stuck, eval, off));
    CHECK(stuck.omega.y == 0.0);
  }
}

TEST_CASE("optimizer: warm start and stage reset") {
  // The cold start sits just off zero so no event lands on an exact corner.
  CHECK(warm_start(std::nullopt).x == 1e-4);
  CHECK(warm_start(std::nullopt).norm() < 2e-4);
  Vec3 prev{0.4, 0.5, -0.6};
  Vec3 w = warm_start(prev);
  CHECK(w.x == 0.4);
  OptOptions opt;
  OptState st = init_state(w, opt);
  st.iter = 7;
  st.step = 0.5;
  Objective seeded{3.0, Vec3{1, 2, 3}};
  begin_stage(st, seeded, opt);
  CHECK(st.iter == 0);
  CHECK(st.have_obj);
  CHECK(st.obj.variance == 3.0);
  // Entry normalization: with a unit conversion factor the first trial moves
  // step0_px along the entry gradient, whatever its magnitude.
  double gn = std::sqrt(14.0);
  CHECK(st.step == doctest::Approx(opt.step0_px / gn).epsilon(1e-15));
  CHECK(st.step_cap == doctest::Approx(opt.step_max_px / gn).epsilon(1e-15));
  CHECK(st.step * gn == doctest::Approx(opt.step0_px).epsilon(1e-15));
  // With a geometry factor the knobs read as pixels: a stage where one rad/s
  // shifts the image 4 px gets a quarter of the rate step.
  begin_stage(st, seeded, opt, 4.0);
  CHECK(st.step * gn == doctest::Approx(opt.step0_px / 4.0).epsilon(1e-15));
  CHECK(st.step_cap * gn == doctest::Approx(opt.step_max_px / 4.0).epsilon(1e-15));
  CHECK(st.step_floor == st.step);
}
