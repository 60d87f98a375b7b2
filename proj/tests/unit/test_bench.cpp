#include <doctest.h>

#include "falsify/bench.hpp"
#include "falsify/engine.hpp"
#include "falsify/io.hpp"

using namespace falsify;
using io::json;

namespace {

json zero_box(int n) {
  return json{{"lo", std::vector<double>(n, 0.0)}, {"hi", std::vector<double>(n, 0.0)}};
}

// A 2D instance with a constant controller and a single box obstacle.
io::Problem constant_push(double u1, bool noisy) {
  json doc = bench::generate_instance({2, 1, 3, 0.0});
  doc["controller"] = {{"type", "piecewise"}, {"pieces", json::array()}, {"fallback", {{"offset", {u1, 0.0}}}}};
  doc["sets"]["X_unsafe"] = json::array({json{{"lo", {4.0, -1.0}}, {"hi", {6.0, 1.0}}}});
  doc["sets"]["X_init"] = json{{"lo", {0.0, -0.1}}, {"hi", {0.1, 0.1}}};
  if (!noisy) {
    doc["uncertainty"]["W"] = zero_box(2);
    doc["uncertainty"]["V"] = zero_box(2);
  }
  return io::parse_problem(doc);
}

}  // namespace

TEST_CASE("bench: instances are a function of the spec") {
  for (int d : {2, 6, 10}) {
    const bench::InstanceSpec s{d, 2, 11, 0.0};
    CHECK(bench::generate_instance(s).dump() == bench::generate_instance(s).dump());
    const bench::InstanceSpec t{d, 2, 12, 0.0};
    CHECK(bench::generate_instance(s).dump() != bench::generate_instance(t).dump());
  }
  CHECK_THROWS(bench::generate_instance({4, 1, 1, 0.0}));
  CHECK_THROWS(bench::generate_instance({2, -1, 1, 0.0}));
}

TEST_CASE("bench: generated instances parse and pick a backend by dimension") {
  for (int d : {2, 6, 10}) {
    for (int obstacles : {0, 1, 3}) {
      const io::Problem pr = io::parse_problem(bench::generate_instance({d, obstacles, 5, d == 2 ? 0.02 : 0.0}));
      CHECK(pr.plant.system().nx() == d);
      CHECK(!pr.targets.empty());
      // Without obstacles each position facet of X_safe becomes an unsafe half-space.
      const int npos = d == 2 ? 2 : 3;
      CHECK(pr.X_unsafe.size() == static_cast<std::size_t>(obstacles > 0 ? obstacles : 2 * npos));
      const auto backend = engine::resolve_backend(pr.plant, pr.engine);
      CHECK((backend == engine::Backend::zonotope) == (d > 2));
      for (const auto& X : pr.X_unsafe) CHECK(pr.X_init.intersect(X).is_empty());
    }
  }
}

TEST_CASE("bench: random baseline counts violations") {
  geom::Vec x0(2);
  x0 << 0.05, 0.0;
  {
    const io::Problem pr = constant_push(0.0, false);
    auto c = pr.make_controller();
    const auto r = bench::random_baseline(pr.plant, *c, x0, 10, 40, 1, pr.X_unsafe);
    CHECK(r.runs == 10);
    CHECK(r.violations == 0);
    CHECK(r.membership_failures == 0);
  }
  {
    const io::Problem pr = constant_push(1.0, true);
    auto c = pr.make_controller();
    const auto r = bench::random_baseline(pr.plant, *c, x0, 10, 40, 1, pr.X_unsafe);
    CHECK(r.violations == 10);
    CHECK(r.membership_failures == 0);
  }
}
