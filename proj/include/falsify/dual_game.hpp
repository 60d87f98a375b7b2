#pragma once

#include "falsify/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace falsify::dual {

using geom::ConvexSet;
using geom::HPolytope;
using geom::Mat;
using geom::Vec;
using geom::Zonotope;

enum class Backend { polytope, zonotope };

const char* to_string(Backend b);

struct BackendOptions {
  Backend backend = Backend::polytope;
  geom::ProjectionOptions projection;
  geom::ZonotopeOptions zonotope;
};

// Throws when the plant violates an assumption of the chosen backend.
void check_backend(const sys::Plant& plant, Backend backend);

// Converts a polytope frame for the zonotope backend (bounded boxes become
// exact zonotopes, other polytopes an inscribed box) and keeps zonotopes.
ConvexSet to_backend(const ConvexSet& S, Backend backend, const geom::ZonotopeOptions& options = {});

// Clips a frame to a polytope (the plant domain or a target invariant).
ConvexSet clip(const ConvexSet& S, const HPolytope& P, const geom::ZonotopeOptions& options = {});

struct DualGameOptions : BackendOptions {
  int k_stop = 50;
  double fixpoint_tol = 1e-6;
  std::optional<HPolytope> invariant;
};

struct DualGameResult {
  std::vector<ConvexSet> frames;  // frames[0] is the unsafe set
  int K = 0;                      // index of the deepest frame
  std::string stop_reason;        // "empty" | "fixpoint" | "k_stop"
  std::vector<int> combinations;  // (mode, u-vertex, p-vertex) combinations per frame
};

// States from which, for every mode and control, some disturbance forces the next
// state into D (for every q, against every p).
ConvexSet epre_under(const sys::Plant& plant, const ConvexSet& D, const BackendOptions& options,
                     int* combinations = nullptr);

DualGameResult expand(const sys::Plant& plant, const ConvexSet& X_unsafe, const DualGameOptions& options);

struct Steering {
  Vec w;
  double margin = 0.0;
};

// Max-margin w in W(x) with A x + B u + K + E w + Pm p + Qm q in target for every
// vertex q of Q. nullopt when no w reaches the target within tolerance.
std::optional<Steering> steer_disturbance(const sys::Plant& plant, const ConvexSet& target, const Vec& x,
                                          int mode, const Vec& u, const Vec& p);

struct DualMove {
  Vec w;
  Vec next;
};

// One move of the environment's winning strategy from frame k into frame k-1.
DualMove dual_strategy_step(const sys::Plant& plant, const DualGameResult& game, const Vec& x, int k, int mode,
                            const Vec& u);

}  // namespace falsify::dual
