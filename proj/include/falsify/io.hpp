#pragma once

#include "falsify/controllers.hpp"
#include "falsify/engine.hpp"
#include "falsify/replay.hpp"
#include "falsify/scenario.hpp"
#include "falsify/system.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace falsify::io {

using json = nlohmann::json;

// Schema violations; the message starts with the offending field path.
class SpecError : public Error {
 public:
  using Error::Error;
};

struct Problem {
  std::string name;
  std::string base_dir;
  json doc;
  sys::Plant plant;
  geom::HPolytope X_init;
  std::vector<geom::HPolytope> X_unsafe;
  std::optional<geom::HPolytope> X_target;
  int t_max = 0;
  std::vector<sys::UnsafeTarget> targets;
  engine::EngineConfig engine;
  int axis_x = 0, axis_y = 1;

  // A fresh controller instance each call.
  std::unique_ptr<ctrl::Controller> make_controller() const;
  replay::ViolationSpec violation() const;
};

Problem parse_problem(const json& doc, const std::string& base_dir = ".");
Problem load_problem(const std::string& path);
json read_json(const std::string& path);
void write_json(const std::string& path, const json& doc);

std::unique_ptr<ctrl::Controller> make_controller(const json& spec, const sys::SwitchedAffineSystem& sys,
                                                  const std::string& base_dir = ".");

engine::EngineConfig parse_engine(const json& block, engine::EngineConfig base = {});
geom::HPolytope parse_polytope(const json& j, const std::string& where);

// FNV-1a over the compact dump of the spec document.
std::string config_hash(const json& doc);

json scenario_to_json(const Scenario& sc, const std::string& config_hash);
Scenario scenario_from_json(const json& doc);

// Columns t, x..., y..., u..., s, w..., v..., phase; the last row carries x_T only.
std::string trace_csv(const Scenario& sc);

json report_to_json(const Problem& problem, const engine::RunResult& run, const replay::Report* replay);

struct PlotLayer {
  std::vector<geom::ConvexSet> sets;
  std::string fill;
  double opacity = 0.3;
};

// Axis-aligned 2D projection: shaded layers, a solid trajectory and a dotted observation path.
std::string plot_svg(const Problem& problem, const std::vector<PlotLayer>& layers, const Scenario* sc);

}  // namespace falsify::io
