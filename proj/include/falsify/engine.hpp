#pragma once

#include "falsify/controllers.hpp"
#include "falsify/dual_game.hpp"
#include "falsify/scenario.hpp"
#include "falsify/system.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace falsify::engine {

using dual::Backend;
using geom::Box;
using geom::ConvexSet;
using geom::HPolytope;
using geom::Mat;
using geom::Vec;

enum class BackendChoice { polytope, zonotope, automatic };
enum class X0Choice { last_dual_frame, unsafe_set };

struct EngineConfig {
  double beta = 0.6;
  int k_max = 100;
  double delta = std::numeric_limits<double>::infinity();
  BackendChoice backend = BackendChoice::automatic;
  std::uint64_t seed = 0;
  X0Choice x0_choice = X0Choice::last_dual_frame;
  int k_stop = 50;
  int max_generators = 0;  // 0 = 2 nx up to nx = 4, nx beyond
  int max_total_dim = 12;
};

Backend resolve_backend(const sys::Plant& plant, const EngineConfig& cfg);
dual::BackendOptions backend_options(const sys::Plant& plant, const EngineConfig& cfg, Backend backend);

// Implicit description of EPre_y(X | U') as a lifted LP:
// y together with one (x, v) per (mode, control vertex) and one w per p vertex.
class ObservationSet {
 public:
  ObservationSet(const sys::Plant& plant, ConvexSet frame, std::vector<Vec> controls,
                 std::optional<Box> observation_box);

  // Adds the lifted constraints; returns the index of the first y variable.
  int build(lp::Builder& b) const;

  std::optional<Vec> witness() const;
  bool contains(const Vec& y) const;
  // y minimizing the 1-norm distance between {x | x ~ y} and X_init.
  std::optional<Vec> closest_to(const HPolytope& X_init) const;
  // Mean of the 2 ny axis-extreme points, or nullopt when unbounded.
  std::optional<Vec> approximate_center() const;

  const ConvexSet& frame() const { return frame_; }
  const std::vector<Vec>& controls() const { return controls_; }

 private:
  const sys::Plant* plant_;
  ConvexSet frame_;
  std::vector<Vec> controls_;
  std::optional<Box> ybox_;
};

// Box C * domain, the observation space used to bound the Y sets.
std::optional<Box> observation_box(const sys::Plant& plant);

struct EpreY {
  std::optional<Vec> witness;
  ObservationSet set;
};

EpreY epre_y(const sys::Plant& plant, const ConvexSet& X, const Box& piece);

// beta * y_close + (1 - beta) * y_center, falling back to y_close when the blend leaves Y.
Vec select_query_point(const ObservationSet& Y, const HPolytope& X_init, double beta);

// {x ~ ybar | for all p, some w puts f(x, u, w) into X for all q}, clipped to the
// domain and to the invariant when given.
ConvexSet pre_y_pi(const sys::Plant& plant, const ConvexSet& X, const Vec& ybar, int mode, const Vec& u,
                   const dual::BackendOptions& options, const std::optional<HPolytope>& invariant = std::nullopt);

struct Query {
  Vec y;
  int mode = 0;    // mode index
  Vec u;           // clamped onto U
  Vec u_raw;       // controller output
  Box piece;
  int rejections = 0;
};

struct RefineResult {
  std::optional<Query> accepted;
  int pieces_tried = 0;
  int rejections = 0;
};

RefineResult refine_and_query(const sys::Plant& plant, ctrl::Controller& controller, const ConvexSet& X,
                              const HPolytope& X_init, const EngineConfig& cfg);

struct BackreachFrame {
  int k = 0;
  ConvexSet X;
  std::optional<Vec> y_query;
  int mode = 0;
  Vec u, u_raw;
  std::optional<Box> u_piece;
  Backend backend = Backend::polytope;
};

enum class AlternatingStatus { reached_init, frame_died, exhausted, k_max };
const char* to_string(AlternatingStatus s);

struct AlternatingResult {
  std::vector<BackreachFrame> frames;
  AlternatingStatus status = AlternatingStatus::k_max;
  int rejections = 0;
};

// min_time: the chain must also be at least this long (dual depth included).
AlternatingResult alternating_backward(const sys::Plant& plant, ctrl::Controller& controller, const ConvexSet& X0,
                                       const HPolytope& X_init, const EngineConfig& cfg, Backend backend,
                                       const std::optional<HPolytope>& invariant = std::nullopt, int dual_depth = 0,
                                       int min_time = 0);

struct ForwardInput {
  const std::vector<BackreachFrame>* frames = nullptr;
  int start = 0;  // frame index the scenario starts from
  const dual::DualGameResult* game = nullptr;
  int dual_start = 0;  // dual frame index that alternating frame 0 lies in
  int min_time = 0;
};

Scenario forward_expand(const sys::Plant& plant, ctrl::Controller& controller, const ForwardInput& in,
                        const HPolytope& X_init, std::uint64_t seed);

struct TargetReport {
  std::string name;
  Backend backend = Backend::polytope;
  int dual_depth = 0;
  std::string dual_stop;
  AlternatingStatus status = AlternatingStatus::k_max;
  int alternating_frames = 0;
  int rejections = 0;
  bool from_init = false;
  double seconds = 0.0;
  std::string error;
};

struct RunResult {
  std::optional<Scenario> scenario;
  std::vector<TargetReport> targets;
  int chosen = -1;
  std::vector<BackreachFrame> frames;  // of the chosen target
  dual::DualGameResult game;           // of the chosen target
  std::size_t query_count = 0;
  double seconds = 0.0;
};

RunResult find_adversarial_scenario(const sys::Plant& plant, ctrl::Controller& controller, const HPolytope& X_init,
                                    const std::vector<sys::UnsafeTarget>& targets, const EngineConfig& cfg);

}  // namespace falsify::engine
