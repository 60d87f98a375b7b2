#include <doctest.h>

#include "falsify/dual_game.hpp"
#include "support/plants.hpp"
#include "support/sampling.hpp"

#include <cmath>
#include <random>

using namespace falsify;
using namespace falsify::dual;
using falsify::testing::scalar;
using falsify::testing::vec;

namespace {

constexpr double kCell = 0.01;

// Smallest grid x in [0, 15] with: for all grid u, some grid w puts x + u + w in [lo, hi].
double grid_epre_lower(double lo, double hi, double u_half, double w_half) {
  const int nu = static_cast<int>(std::lround(2 * u_half / kCell));
  const int nw = static_cast<int>(std::lround(2 * w_half / kCell));
  for (int i = 0; i <= 1500; ++i) {
    const double x = i * kCell;
    bool all_u = true;
    for (int a = 0; a <= nu && all_u; ++a) {
      const double u = -u_half + a * kCell;
      bool some_w = false;
      for (int c = 0; c <= nw && !some_w; ++c) {
        const double next = x + u - w_half + c * kCell;
        some_w = next >= lo - 1e-9 && next <= hi + 1e-9;
      }
      all_u = some_w;
    }
    if (all_u) return x;
  }
  return NAN;
}

double lower_end(const ConvexSet& S) { return -S.support(scalar(-1)); }
double upper_end(const ConvexSet& S) { return S.support(scalar(1)); }

ConvexSet ray_from_10() { return ConvexSet(geom::HPolytope(Mat::Constant(1, 1, -1.0), scalar(-10))); }

}  // namespace

TEST_CASE("dual game: disturbance dominates, predecessor grows") {
  const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.0);
  const ConvexSet pre = epre_under(plant, ray_from_10(), {});
  const double oracle = grid_epre_lower(10, 15, 0.5, 1.0);
  CHECK(oracle == doctest::Approx(9.5));
  CHECK(std::abs(lower_end(pre) - oracle) <= kCell);
  CHECK(upper_end(pre) == doctest::Approx(15));
}

TEST_CASE("dual game: control dominates, predecessor shrinks inside D") {
  const auto plant = falsify::testing::integrator_1d(1.0, 0.5, 0.0);
  const ConvexSet pre = epre_under(plant, ray_from_10(), {});
  const double oracle = grid_epre_lower(10, 15, 1.0, 0.5);
  CHECK(oracle == doctest::Approx(10.5));
  CHECK(std::abs(lower_end(pre) - oracle) <= kCell);
}

TEST_CASE("dual game: without disturbance only robust predecessors remain") {
  const auto plant = falsify::testing::integrator_1d(0.5, 0.0, 0.0);
  const ConvexSet pre = epre_under(plant, ray_from_10(), {});
  CHECK(lower_end(pre) == doctest::Approx(10.5));
  CHECK(upper_end(pre) == doctest::Approx(15));
  for (double x = 9.0; x <= 15.0; x += 0.05) {
    const bool forced = x - 0.5 >= 10 && x + 0.5 >= 10;
    if (std::abs(x - 10.5) > 1e-6) CHECK(pre.contains(scalar(x)) == forced);
  }
}

TEST_CASE("dual game: expansion frames follow 10 - 0.5k") {
  const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.0);
  DualGameOptions opt;
  opt.k_stop = 8;
  const auto game = expand(plant, ray_from_10(), opt);
  REQUIRE(game.K == 8);
  CHECK(game.stop_reason == "k_stop");
  double lo = 10, hi = 15;
  for (int k = 0; k <= game.K; ++k) {
    CHECK(std::abs(lower_end(game.frames[k]) - lo) <= kCell);
    CHECK(lower_end(game.frames[k]) == doctest::Approx(10 - 0.5 * k));
    if (k < game.K) {
      lo = grid_epre_lower(lo, hi, 0.5, 1.0);
      hi = 15;
    }
  }
}

TEST_CASE("dual game: expansion stops at the fixpoint and at k_stop = 0") {
  const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.0);
  const auto full = expand(plant, ray_from_10(), {});
  CHECK(full.stop_reason == "fixpoint");
  CHECK(full.K == 20);
  CHECK(lower_end(full.frames.back()) == doctest::Approx(0.0));

  DualGameOptions none;
  none.k_stop = 0;
  const auto g0 = expand(plant, ray_from_10(), none);
  CHECK(g0.K == 0);
  CHECK(g0.frames.size() == 1);

  const auto controlled = falsify::testing::integrator_1d(1.0, 0.5, 0.0);
  const auto shrinking = expand(controlled, ray_from_10(), {});
  CHECK(shrinking.stop_reason == "empty");
  CHECK(shrinking.K == 5);
}

TEST_CASE("dual strategy step drives the state into the previous frame") {
  const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.0);
  DualGameOptions opt;
  opt.k_stop = 3;
  const auto game = expand(plant, ray_from_10(), opt);
  const auto mv = dual_strategy_step(plant, game, scalar(9.5), 1, 0, scalar(-0.5));
  CHECK(mv.w(0) == doctest::Approx(1.0));
  CHECK(mv.next(0) == doctest::Approx(10.0));
  CHECK(game.frames[0].contains(mv.next));

  const auto calm = falsify::testing::integrator_1d(0.5, 0.0, 0.0);
  const auto g = expand(calm, ray_from_10(), opt);
  const auto still = dual_strategy_step(calm, g, scalar(11), 1, 0, scalar(0.3));
  CHECK(still.w(0) == 0.0);
  CHECK_THROWS_AS(dual_strategy_step(calm, g, scalar(11), 0, 0, scalar(0.3)), Error);
}

TEST_CASE("dual game on the obstacle plant: frames shrink by 2 across and die") {
  const auto plant = falsify::testing::obstacle_plant();
  const ConvexSet unsafe(geom::HPolytope::box(vec({3, 0}), vec({17, 3})));
  const auto game = expand(plant, unsafe, {});
  CHECK(game.stop_reason == "empty");
  REQUIRE(game.K == 7);
  for (int k = 0; k <= game.K; ++k) {
    CHECK(game.frames[k].support(vec({1, 0})) == doctest::Approx(17 - k).epsilon(1e-6));
    CHECK(-game.frames[k].support(vec({-1, 0})) == doctest::Approx(3 + k).epsilon(1e-6));
  }
}

TEST_CASE("property: every dual frame satisfies the forall-u exists-w step (sampled)") {
  const auto plant = falsify::testing::obstacle_plant();
  const ConvexSet unsafe(geom::HPolytope::box(vec({3, 0}), vec({17, 3})));
  std::mt19937_64 rng(17);
  for (Backend backend : {Backend::polytope, Backend::zonotope}) {
    DualGameOptions opt;
    opt.backend = backend;
    const auto game = expand(plant, unsafe, opt);
    REQUIRE(game.K >= 1);
    int failures = 0;
    for (int k = 1; k <= game.K; ++k) {
      const auto& F = game.frames[k];
      const auto pts = F.polytope() ? falsify::testing::sample_polytope(*F.polytope(), 500, rng)
                                    : falsify::testing::sample_zonotope(*F.zonotope(), 500, rng);
      for (const Vec& x : pts) {
        for (const Vec& u : plant.control().vertices().vertices) {
          if (!steer_disturbance(plant, game.frames[k - 1], x, 0, u, Vec(0))) ++failures;
        }
      }
    }
    CHECK_MESSAGE(failures == 0, to_string(backend));
  }
}

TEST_CASE("property: the dual strategy reaches the unsafe set in exactly K steps from any controller") {
  const auto plant = falsify::testing::obstacle_plant();
  const ConvexSet unsafe(geom::HPolytope::box(vec({3, 0}), vec({17, 3})));
  const auto game = expand(plant, unsafe, {});
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pick_u(-1.2, 1.2);
  for (const Vec& x0 : falsify::testing::sample_polytope(*game.frames[game.K].polytope(), 100, rng)) {
    Vec x = x0;
    for (int k = game.K; k >= 1; --k) x = dual_strategy_step(plant, game, x, k, 0, scalar(pick_u(rng))).next;
    CHECK(unsafe.contains(x));
  }
}

TEST_CASE("zonotope dual frames lie inside the polytope frames") {
  const auto plant = falsify::testing::obstacle_plant();
  const ConvexSet unsafe(geom::HPolytope::box(vec({3, 0}), vec({17, 3})));
  DualGameOptions zopt;
  zopt.backend = Backend::zonotope;
  const auto poly = expand(plant, unsafe, {});
  const auto zono = expand(plant, unsafe, zopt);
  CHECK(zono.K <= poly.K);
  std::mt19937_64 rng(29);
  for (int k = 0; k <= zono.K; ++k) {
    for (const Vec& x : falsify::testing::sample_zonotope(*zono.frames[k].zonotope(), 500, rng)) {
      CHECK(poly.frames[k].contains(x, 1e-7));
    }
  }
}

TEST_CASE("zonotope backend rejects state-dependent disturbances") {
  auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.0);
  sys::UncertaintyModel unc{sys::UncertaintySet::state_dependent(Mat::Constant(2, 1, -0.1), Mat(Eigen::Vector2d(1, -1)),
                                                                 Vec::Zero(2)),
                            plant.uncertainty().V};
  sys::Plant sd(plant.system(), unc, plant.control(), plant.domain());
  CHECK_THROWS_AS(check_backend(sd, Backend::zonotope), Error);
  CHECK_NOTHROW(check_backend(sd, Backend::polytope));
}
