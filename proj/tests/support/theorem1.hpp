#pragma once

// Sampled one-step inclusion over a backward chain: every sampled x in frame k is
// consistent with the frame's query y, and some w in W(x) steps it into frame k-1.

#include "falsify/dual_game.hpp"
#include "falsify/engine.hpp"
#include "sampling.hpp"

#include <random>
#include <vector>

namespace falsify::testing {

inline std::vector<geom::Vec> sample_frame(const geom::ConvexSet& X, int count, std::mt19937_64& rng) {
  if (const geom::HPolytope* H = X.polytope()) return sample_polytope(*H, count, rng);
  return sample_zonotope(*X.zonotope(), count, rng);
}

struct InclusionCount {
  int samples = 0;
  int failures = 0;
};

inline InclusionCount theorem1_check(const sys::Plant& plant, const std::vector<engine::BackreachFrame>& frames,
                                     int per_frame, std::uint64_t seed, double tol = 1e-7) {
  std::mt19937_64 rng(seed);
  const auto& sys = plant.system();
  const auto& V = plant.uncertainty().V;
  const auto& W = plant.uncertainty().W;
  InclusionCount out;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const auto& f = frames[k];
    for (const geom::Vec& x : sample_frame(f.X, per_frame, rng)) {
      ++out.samples;
      lp::Builder b;
      const int v = b.add_variables(sys.nv());
      b.add_eq_block({{v, sys.F()}}, *f.y_query - sys.C() * x - sys.D() * f.u);
      b.add_le_block({{v, V.Hz()}}, V.h() - V.Hx() * x);
      const auto s = b.solve(lp::Sense::feasibility);
      bool ok = s.optimal();
      if (ok) {
        const geom::Vec vv = s.point.segment(v, sys.nv());
        ok = V.contains(x, vv, tol) && (plant.measure(x, f.u, vv) - *f.y_query).cwiseAbs().maxCoeff() <= tol;
      }
      if (ok) {
        const auto st = dual::steer_disturbance(plant, frames[k - 1].X, x, f.mode, f.u, plant.injection(x, f.mode, f.u));
        ok = st.has_value() && W.contains(x, st->w, tol) &&
             frames[k - 1].X.contains(plant.concrete_step(x, f.mode, f.u, st->w), tol);
      }
      out.failures += !ok;
    }
  }
  return out;
}

}  // namespace falsify::testing
