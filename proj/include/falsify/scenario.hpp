#pragma once

#include "falsify/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace falsify {

enum class Phase { alternating, dual };

inline const char* to_string(Phase p) { return p == Phase::alternating ? "alt" : "dual"; }

// An adversarial scenario: x0, the disturbance and noise sequences and the
// traces they induce in closed loop.
struct Scenario {
  geom::Vec x0;
  std::vector<geom::Vec> w_seq, v_seq;
  std::vector<geom::Vec> p_seq, q_seq;  // mismatch runs only

  std::vector<geom::Vec> x_traj;  // T + 1 states
  std::vector<geom::Vec> y_traj;  // T observations
  std::vector<geom::Vec> u_traj;  // T applied controls (clamped onto U)
  std::vector<geom::Vec> u_raw;   // T controller outputs before clamping
  std::vector<int> s_traj;        // T mode labels
  std::vector<Phase> phases;      // T phase markers

  int N = 0;
  int T = 0;
  bool from_init = false;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t query_count = 0;
};

}  // namespace falsify
