#include <doctest.h>

#include "falsify/geometry.hpp"
#include "../support/sampling.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace falsify;
using namespace falsify::geom;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Zonotope unit_square(double cx, double cy) { return Zonotope(Mat::Identity(2, 2), v2(cx, cy)); }

}  // namespace

TEST_CASE("geometry: disjoint squares intersect to the empty marker") {
  CHECK_FALSE(zonotope_intersection_under({unit_square(0, 0), unit_square(3, 0)}).has_value());
}

TEST_CASE("geometry: overlapping squares give an inner approximation") {
  const auto Z = zonotope_intersection_under({unit_square(0, 0), unit_square(1, 0)});
  REQUIRE(Z.has_value());
  const HPolytope expected = HPolytope::box(v2(0, -1), v2(1, 1));
  for (const Vec& p : Z->vertices()) CHECK(expected.contains(p, 1e-8));
  // The exact intersection is itself a zonotope and the LP recovers it.
  CHECK(Z->support(v2(1, 0)) == doctest::Approx(1.0));
  CHECK(Z->support(v2(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("geometry: rotated zonotope membership") {
  Mat G(2, 2);
  G << 1, 1, 1, -1;
  const Zonotope Z(G, Vec::Zero(2));
  CHECK(Z.contains(v2(2, 0)));
  CHECK_FALSE(Z.contains(v2(2.01, 0)));
  CHECK(Z.contains(v2(0, -2)));
}

TEST_CASE("geometry: 1-norm distance between boxes") {
  const auto a = HPolytope::box(v2(0, 0), v2(1, 1));
  const auto b = HPolytope::box(v2(2, 2), v2(3, 3));
  CHECK(distance_1norm(a, b) == doctest::Approx(2.0));
  CHECK(distance_1norm(a, a) == doctest::Approx(0.0));
}

TEST_CASE("geometry: V-polytope prunes duplicate and interior points") {
  VPolytope P({v2(0, 0), v2(1, 0), v2(0, 0), v2(0, 1), v2(1, 1), v2(0.5, 0.5)});
  CHECK(P.vertices.size() == 5);
  CHECK(P.pruned().vertices.size() == 4);
  CHECK(P.contains(v2(0.2, 0.9)));
  CHECK_FALSE(P.contains(v2(1.2, 0.9)));
  CHECK(P.diameter() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("geometry: empty H-polytope and empty marker") {
  Mat A(2, 1);
  A << 1, -1;
  Vec b(2);
  b << 0, -1;
  CHECK(HPolytope(A, b).is_empty());
  CHECK(ConvexSet::empty(2).is_empty());
  CHECK(ConvexSet::empty(2).is_empty_marker());
  CHECK_FALSE(ConvexSet(HPolytope::box(v2(0, 0), v2(1, 1))).is_empty());
  CHECK_FALSE(contains_point(ConvexSet::empty(2), v2(0, 0)));
}

TEST_CASE("geometry: zonotope facets agree with support functions") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const int m = n + trial % 4;
    const Zonotope Z(Mat::NullaryExpr(n, m, [&]() { return g(rng); }),
                     Vec::NullaryExpr(n, [&]() { return g(rng); }));
    const HPolytope P = Z.to_hpolytope();
    for (int k = 0; k < 10; ++k) {
      const Vec d = Vec::NullaryExpr(n, [&]() { return g(rng); });
      CHECK(P.support(d) == doctest::Approx(Z.support(d)).epsilon(1e-6));
    }
  }
}

TEST_CASE("geometry: projection of a lifted box with an equality") {
  // {(x, v) | v = y - x, |v| <= 1, 0 <= x <= 5} projected onto x for y = 3
  LinearSystem sys(2);
  Mat Aeq(1, 2);
  Aeq << 1, 1;
  sys.add_eq(Aeq, Vec::Constant(1, 3.0));
  Mat A(4, 2);
  A << 0, 1, 0, -1, 1, 0, -1, 0;
  Vec b(4);
  b << 1, 1, 5, 0;
  sys.add_ineq(A, b);
  const auto P = project(sys, {0});
  REQUIRE(P.has_value());
  CHECK(P->support(Vec::Constant(1, 1.0)) == doctest::Approx(4.0));
  CHECK(-P->support(Vec::Constant(1, -1.0)) == doctest::Approx(2.0));
}

TEST_CASE("geometry: projection guard and empty input") {
  LinearSystem big(13);
  CHECK_THROWS_AS(project(big, {0}), DimensionGuardError);
  LinearSystem bad(2);
  Mat A(2, 2);
  A << 1, 0, -1, 0;
  Vec b(2);
  b << 0, -1;
  bad.add_ineq(A, b);
  CHECK_FALSE(project(bad, {1}).has_value());
}

TEST_CASE("geometry: Fourier-Motzkin matches LP support functions (3D to 2D)") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  int instances = 0;
  while (instances < 50) {
    const int m = 6 + instances % 6;
    Mat A(m + 6, 3);
    Vec b(m + 6);
    for (int i = 0; i < m; ++i) {
      A.row(i) << g(rng), g(rng), g(rng);
      b(i) = 1.0 + std::abs(g(rng));
    }
    A.bottomRows(6) << Mat::Identity(3, 3), -Mat::Identity(3, 3);
    b.tail(6).setConstant(3.0);
    const HPolytope P(A, b);
    const auto Q = project(P, {0, 1});
    REQUIRE(Q.has_value());
    for (int k = 0; k < 20; ++k) {
      const double th = 2.0 * M_PI * k / 20.0;
      Vec d3 = Vec::Zero(3);
      d3(0) = std::cos(th);
      d3(1) = std::sin(th);
      CHECK(std::abs(Q->support(d3.head(2)) - P.support(d3)) <= 1e-6);
    }
    ++instances;
  }
}

TEST_CASE("geometry: intersection stays inside every operand (sampled)") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  int total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<Zonotope> ops;
    for (int k = 0; k < 3; ++k) {
      ops.emplace_back(Mat::NullaryExpr(n, n + 1, [&]() { return g(rng); }),
                       0.3 * Vec::NullaryExpr(n, [&]() { return g(rng); }));
    }
    const auto Z = zonotope_intersection_under(ops);
    if (!Z) continue;
    const auto pts = falsify::testing::sample_zonotope(*Z, 1000, rng);
    for (const Vec& p : pts) {
      for (const Zonotope& op : ops) {
        if (!op.contains(p, 1e-8)) {
          CHECK(op.contains(p, 1e-8));
        }
      }
      ++total;
    }
  }
  CHECK(total >= 5000);
}

TEST_CASE("geometry: Minkowski difference inner approximation") {
  const Zonotope Z = Zonotope::box(v2(0, 0), v2(4, 2));
  const Zonotope S = Zonotope::box(v2(-0.5, -0.5), v2(0.5, 0.5));
  const auto D = minkowski_difference_under(Z, S);
  REQUIRE(D.has_value());
  CHECK(D->support(v2(1, 0)) == doctest::Approx(3.5));
  CHECK(-D->support(v2(-1, 0)) == doctest::Approx(0.5));
  CHECK(D->support(v2(0, 1)) == doctest::Approx(1.5));
  std::mt19937_64 rng(5);
  for (const Vec& p : falsify::testing::sample_zonotope(*D, 200, rng)) {
    for (const Vec& s : S.vertices()) CHECK(Z.contains(p + s - S.c, 1e-8));
  }
  CHECK_FALSE(minkowski_difference_under(S, Z).has_value());
}

TEST_CASE("geometry: zonotope clipped by a halfspace") {
  Mat A(1, 2);
  A << 1, 0;
  const HPolytope half(A, Vec::Constant(1, 0.0));
  const auto Z = zonotope_polytope_intersection_under(unit_square(0, 0), half);
  REQUIRE(Z.has_value());
  CHECK(Z->support(v2(1, 0)) <= 1e-9);
  CHECK(-Z->support(v2(-1, 0)) == doctest::Approx(-1.0));
}

TEST_CASE("geometry: containment block holds for translated boxes") {
  // Largest scaling of the unit square that fits inside a rotated square.
  Mat G(2, 2);
  G << 1, 1, 1, -1;
  const Zonotope outer(G, Vec::Zero(2));
  lp::Builder b;
  const int lam = b.add_variables(2, 0.0, lp::kInf);
  const int c = b.add_variables(2, 0.0, 0.0);
  b.set_objective(lam, 1.0);
  b.set_objective(lam + 1, 1.0);
  b.add_eq({{lam, 1.0}, {lam + 1, -1.0}}, 0.0);
  InnerZonotopeSpec inner;
  inner.T = Mat::Identity(2, 2);
  inner.lambda_var = lam;
  inner.center_var = c;
  containment_constraints(b, inner, outer);
  const auto s = b.solve(lp::Sense::maximize);
  REQUIRE(s.optimal());
  CHECK(s.point(lam) == doctest::Approx(1.0));
}

TEST_CASE("geometry: affine image and preimage") {
  const HPolytope P = HPolytope::box(v2(0, 0), v2(1, 1));
  Mat M(2, 2);
  M << 2, 0, 0, 3;
  const auto Q = affine_map(P, M, v2(1, 1));
  REQUIRE(Q.has_value());
  CHECK(Q->contains(v2(3, 4)));
  CHECK_FALSE(Q->contains(v2(3.1, 4)));
  const HPolytope R = preimage(*Q, M, v2(1, 1));
  CHECK(R.contains(v2(1, 1)));
  Mat S(1, 2);
  S << 1, 1;
  const auto line = affine_map(P, S, Vec::Zero(1));
  REQUIRE(line.has_value());
  CHECK(line->support(Vec::Constant(1, 1.0)) == doctest::Approx(2.0));
  const auto sum = minkowski_sum(P, P);
  REQUIRE(sum.has_value());
  CHECK(sum->support(v2(1, 1)) == doctest::Approx(4.0));
}
