#pragma once

// Small plants shared by the unit tests.

#include "falsify/system.hpp"

namespace falsify::testing {

using geom::Mat;
using geom::Vec;

inline Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

inline Vec scalar(double d) { return Vec::Constant(1, d); }

// x' = x + u + w, y = x + v on the domain [lo, hi].
inline sys::Plant integrator_1d(double u_half, double w_half, double v_half, double lo = 0.0, double hi = 15.0) {
  sys::Mode m{0, Mat::Identity(1, 1), Mat::Identity(1, 1), Vec::Zero(1), Mat::Identity(1, 1)};
  sys::SwitchedAffineSystem s({m}, Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1));
  sys::UncertaintyModel unc{sys::UncertaintySet::from_box(scalar(-w_half), scalar(w_half), 1),
                            sys::UncertaintySet::from_box(scalar(-v_half), scalar(v_half), 1)};
  return sys::Plant(s, unc, sys::ControlSpace::from_box(scalar(-u_half), scalar(u_half)),
                    geom::Box{scalar(lo), scalar(hi)});
}

// The obstacle-avoidance plant: x' = x + [u; -1] + w, y = x + v.
inline sys::Plant obstacle_plant() {
  Mat B(2, 1);
  B << 1, 0;
  sys::Mode m{0, Mat::Identity(2, 2), B, vec({0, -1}), Mat::Identity(2, 2)};
  sys::SwitchedAffineSystem s({m}, Mat::Identity(2, 2), Mat::Zero(2, 1), Mat::Identity(2, 2));
  // ||w||_1 <= 0.2
  Mat Gw(2, 2);
  Gw << 0.1, 0.1, 0.1, -0.1;
  sys::UncertaintyModel unc{sys::UncertaintySet::from_zonotope(geom::Zonotope(Gw, Vec::Zero(2)), 2),
                            sys::UncertaintySet::from_box(vec({-1, -0.1}), vec({1, 0.1}), 2)};
  return sys::Plant(s, unc, sys::ControlSpace::from_box(scalar(-1.2), scalar(1.2)),
                    geom::Box{vec({-5, -5}), vec({25, 25})});
}

}  // namespace falsify::testing
