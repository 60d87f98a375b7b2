#pragma once

#include "falsify/controllers.hpp"
#include "falsify/scenario.hpp"
#include "falsify/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace falsify::replay {

// What counts as a violation at the final state.
struct ViolationSpec {
  std::vector<geom::HPolytope> unsafe;
  std::optional<geom::HPolytope> target;  // reach-avoid: missing target by t_max
  int t_max = 0;
  std::optional<geom::HPolytope> x_init;
};

struct Failure {
  int t = -1;  // -1 for whole-scenario checks
  std::string what;
};

struct Report {
  std::vector<Failure> failures;
  std::string violation;  // "unsafe[i]" or "deadline"
  std::vector<geom::Vec> x_traj;
  std::vector<geom::Vec> y_traj;
  bool ok() const { return failures.empty(); }
};

struct Options {
  double state_tol = 1e-9;
  double member_tol = geom::kTol;
};

// Re-simulates the scenario through the plant and a fresh controller.
// Uses only the plant model and the controller; no engine state.
Report validate(const sys::Plant& plant, ctrl::Controller& controller, const Scenario& scenario,
                const ViolationSpec& spec, const Options& options = {});

}  // namespace falsify::replay
