#pragma once

#include "falsify/io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace falsify::bench {

using io::json;

struct InstanceSpec {
  int dimension = 2;  // 2, 6 or 10
  int obstacles = 1;
  std::uint64_t seed = 0;
  double mismatch = 0.0;  // bound of the additive quadratic term; 0 disables it
};

// Builds a problem-spec document; identical specs give identical documents.
json generate_instance(const InstanceSpec& spec);

struct BaselineResult {
  int runs = 0;
  int violations = 0;
  int membership_failures = 0;
};

// Closed-loop runs from x0 under uniform w in W(x) and v in V(x); a run counts as a
// violation once the state enters any unsafe set.
BaselineResult random_baseline(const sys::Plant& plant, ctrl::Controller& controller, const geom::Vec& x0, int runs,
                               int horizon, std::uint64_t seed, const std::vector<geom::HPolytope>& unsafe);

struct Row {
  std::string name;
  int dimension = 0;
  int obstacles = 0;
  std::uint64_t seed = 0;
  std::string backend;
  std::string status;  // from_init | partial | failed
  bool replay_ok = false;
  int N = 0, T = 0;
  int baseline_runs = 0;
  int baseline_violations = 0;
  std::size_t queries = 0;
  double engine_seconds = 0.0;
  double baseline_seconds = 0.0;
  std::string error;
};

// Falsifies one instance and runs the baseline from the scenario's x0 with horizon 2 T.
// Writes instance.json, scenario.json and report.json under out_dir when it is non-empty.
Row run_instance(const json& instance, int runs, const std::string& out_dir = "");

std::string rows_csv(const std::vector<Row>& rows);
json rows_json(const std::vector<Row>& rows);

}  // namespace falsify::bench
