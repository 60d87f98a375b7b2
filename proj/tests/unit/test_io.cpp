#include <doctest.h>

#include "falsify/engine.hpp"
#include "falsify/io.hpp"
#include "falsify/replay.hpp"

#include <string>

using namespace falsify;
using io::json;

namespace {

json example1() { return io::read_json(std::string(FALSIFY_CONFIGS) + "/example1_pi1.json"); }

std::string spec_error(const json& doc) {
  try {
    io::parse_problem(doc, FALSIFY_CONFIGS);
  } catch (const io::SpecError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("io: spec errors name the offending field") {
  json doc = example1();
  doc["system"].erase("C");
  CHECK(spec_error(doc).rfind("system.C: missing", 0) == 0);

  doc = example1();
  doc["system"]["modes"][0]["B"] = json::array({json::array({1.0})});
  CHECK(spec_error(doc).rfind("system.modes[0].B", 0) == 0);

  doc = example1();
  doc["controller"]["type"] = "lookup";
  CHECK(spec_error(doc).rfind("controller.type", 0) == 0);

  doc = example1();
  doc["engine"]["beta"] = 1.5;
  CHECK(spec_error(doc).rfind("engine.beta", 0) == 0);

  doc = example1();
  doc["sets"].erase("X_unsafe");
  CHECK(spec_error(doc).rfind("sets", 0) == 0);

  CHECK(spec_error(example1()).empty());
}

TEST_CASE("io: config hash follows the document") {
  const json a = example1();
  json b = a;
  CHECK(io::config_hash(a) == io::config_hash(b));
  b["engine"]["seed"] = 2;
  CHECK(io::config_hash(a) != io::config_hash(b));
}

TEST_CASE("io: scenario json round trip") {
  const io::Problem pr = io::parse_problem(example1(), FALSIFY_CONFIGS);
  auto controller = pr.make_controller();
  const auto run = engine::find_adversarial_scenario(pr.plant, *controller, pr.X_init, pr.targets, pr.engine);
  REQUIRE(run.scenario.has_value());
  const Scenario& sc = *run.scenario;

  const json j = io::scenario_to_json(sc, io::config_hash(pr.doc));
  const Scenario back = io::scenario_from_json(j);
  CHECK(back.T == sc.T);
  CHECK(back.N == sc.N);
  CHECK(back.from_init == sc.from_init);
  CHECK(back.target == sc.target);
  CHECK(back.seed == sc.seed);
  REQUIRE(back.x_traj.size() == sc.x_traj.size());
  for (std::size_t t = 0; t < sc.x_traj.size(); ++t) CHECK((back.x_traj[t] - sc.x_traj[t]).norm() == 0.0);
  for (std::size_t t = 0; t < sc.w_seq.size(); ++t) CHECK((back.w_seq[t] - sc.w_seq[t]).norm() == 0.0);
  for (std::size_t t = 0; t < sc.v_seq.size(); ++t) CHECK((back.v_seq[t] - sc.v_seq[t]).norm() == 0.0);
  CHECK(io::scenario_to_json(back, io::config_hash(pr.doc)).dump() == j.dump());

  auto fresh = pr.make_controller();
  const auto rep = replay::validate(pr.plant, *fresh, back, pr.violation());
  CHECK(rep.ok());
}

TEST_CASE("io: trace csv has one row per time step") {
  const io::Problem pr = io::parse_problem(example1(), FALSIFY_CONFIGS);
  auto controller = pr.make_controller();
  const auto run = engine::find_adversarial_scenario(pr.plant, *controller, pr.X_init, pr.targets, pr.engine);
  REQUIRE(run.scenario.has_value());
  const std::string csv = io::trace_csv(*run.scenario);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == run.scenario->T + 2);
  CHECK(csv.rfind("t,", 0) == 0);

  const std::string svg = io::plot_svg(pr, {}, &*run.scenario);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
