#pragma once

#include "falsify/geometry.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace falsify::sys {

using geom::Box;
using geom::HPolytope;
using geom::Mat;
using geom::Vec;
using geom::Zonotope;

struct Mode {
  int label = 0;
  Mat A, B;
  Vec K;
  Mat E;
};

// x+ = A_s x + B_s u + K_s + E_s w,   y = C x + D u + F v
class SwitchedAffineSystem {
 public:
  SwitchedAffineSystem() = default;
  SwitchedAffineSystem(std::vector<Mode> modes, Mat C, Mat D, Mat F);

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int nw() const { return nw_; }
  int ny() const { return ny_; }
  int nv() const { return nv_; }
  int num_modes() const { return static_cast<int>(modes_.size()); }
  const Mode& mode(int index) const { return modes_.at(index); }
  const std::vector<Mode>& modes() const { return modes_; }
  const Mat& C() const { return C_; }
  const Mat& D() const { return D_; }
  const Mat& F() const { return F_; }

  // Throws for unknown labels.
  int mode_index(int label) const;

  Vec step(const Vec& x, int mode_index, const Vec& u, const Vec& w) const;
  Vec measure(const Vec& x, const Vec& u, const Vec& v) const;

  // Whether every A_s is invertible, C = I and D = 0.
  bool zonotope_compatible(std::string* why = nullptr) const;

 private:
  std::vector<Mode> modes_;
  Mat C_, D_, F_;
  int nx_ = 0, nu_ = 0, nw_ = 0, ny_ = 0, nv_ = 0;
};

// {z | Hx x + Hz z <= h}; a zonotope form is kept when the set was given as one.
class UncertaintySet {
 public:
  UncertaintySet() = default;
  static UncertaintySet from_polytope(const HPolytope& P, int nx);
  static UncertaintySet from_zonotope(const Zonotope& Z, int nx);
  static UncertaintySet from_box(const Vec& lo, const Vec& hi, int nx);
  static UncertaintySet state_dependent(Mat Hx, Mat Hz, Vec h);

  int dim() const { return static_cast<int>(Hz_.cols()); }
  bool is_state_dependent() const;
  const Mat& Hx() const { return Hx_; }
  const Mat& Hz() const { return Hz_; }
  const Vec& h() const { return h_; }
  const std::optional<Zonotope>& zonotope() const { return zonotope_; }
  // The slice at a fixed state.
  HPolytope at(const Vec& x) const;
  bool contains(const Vec& x, const Vec& z, double tol = geom::kTol) const;
  std::optional<Box> bounding_box(const Vec& x) const;
  // Rejection sampling from the bounding box of the slice.
  Vec sample(const Vec& x, std::mt19937_64& rng, int max_tries = 10000) const;

 private:
  Mat Hx_, Hz_;
  Vec h_;
  std::optional<Zonotope> zonotope_;
};

struct UncertaintyModel {
  UncertaintySet W;
  UncertaintySet V;
};

class ControlSpace {
 public:
  ControlSpace() = default;
  static ControlSpace from_box(const Vec& lo, const Vec& hi);
  static ControlSpace from_vertices(std::vector<Vec> vertices);
  static ControlSpace from_zonotope(const Zonotope& Z);

  int dim() const { return vertices_.dim(); }
  const geom::VPolytope& vertices() const { return vertices_; }
  const std::optional<Zonotope>& zonotope() const { return zonotope_; }
  const std::optional<Box>& box() const { return box_; }
  bool contains(const Vec& u, double tol = geom::kTol) const;
  // Nearest point of U in the 1-norm; returns u when already inside.
  Vec clamp(const Vec& u) const;

 private:
  geom::VPolytope vertices_;
  std::optional<Zonotope> zonotope_;
  std::optional<Box> box_;
};

// Additive mismatch: f(x,u,w) = A_s x + B_s u + K_s + E_s w + Pm p + Qm q with
// p fixed by a known injection rule and q in Q.
struct MismatchModel {
  Mat Pm, Qm;
  geom::VPolytope P, Q;
  std::optional<Zonotope> P_zonotope, Q_zonotope;
  std::function<Vec(const Vec& x, int mode, const Vec& u)> injection;
  std::function<Vec(const Vec& x, int mode, const Vec& u, const Vec& w)> oracle;

  int np() const { return static_cast<int>(Pm.cols()); }
  int nq() const { return static_cast<int>(Qm.cols()); }
};

class Plant {
 public:
  Plant() = default;
  Plant(SwitchedAffineSystem sys, UncertaintyModel unc, ControlSpace U,
        std::optional<Box> domain = std::nullopt);

  const SwitchedAffineSystem& system() const { return sys_; }
  const UncertaintyModel& uncertainty() const { return unc_; }
  const ControlSpace& control() const { return U_; }
  const std::optional<Box>& domain() const { return domain_; }
  const std::optional<MismatchModel>& mismatch() const { return mismatch_; }
  void set_mismatch(MismatchModel m);

  // Abstraction with explicit mismatch parameters (zero-length p or q allowed).
  Vec abstract_step(const Vec& x, int mode, const Vec& u, const Vec& w, const Vec& p, const Vec& q) const;
  // The system actually simulated: the oracle when a mismatch is declared.
  Vec concrete_step(const Vec& x, int mode, const Vec& u, const Vec& w) const;
  Vec injection(const Vec& x, int mode, const Vec& u) const;
  Vec measure(const Vec& x, const Vec& u, const Vec& v) const { return sys_.measure(x, u, v); }

  // Samples points and checks that the oracle equals the abstraction for the
  // injected p and some q in Q. Returns an empty string on success.
  std::string validate_mismatch(int samples, double tol, std::uint64_t seed) const;

 private:
  SwitchedAffineSystem sys_;
  UncertaintyModel unc_;
  ControlSpace U_;
  std::optional<Box> domain_;
  std::optional<MismatchModel> mismatch_;
};

// A set the falsifier aims for. Frames leading to it are kept inside the
// invariant, and chains shorter than min_time do not count as reaching it.
struct UnsafeTarget {
  std::string name;
  HPolytope set;
  std::optional<HPolytope> invariant;
  int min_time = 0;
};

struct AugmentedState {
  Vec x;
  int z = 0;
};

struct ReachAvoidAugmentation {
  HPolytope xi_init;              // X_init at z = 0
  std::vector<UnsafeTarget> targets;  // obstacle hits first, then deadline misses
  int t_max = 0;
};

AugmentedState augmented_step(const Plant& plant, const AugmentedState& s, int mode, const Vec& u,
                              const Vec& w);

// The deadline-miss region (X \ X_target) x [t_max, inf) is covered by one convex
// piece per facet of X_target, each pushed outward by margin and clipped to the domain.
ReachAvoidAugmentation augment_time(const Plant& plant, const HPolytope& X_init,
                                    const std::vector<HPolytope>& X_unsafe, const HPolytope& X_target,
                                    int t_max, double margin = 1e-3);

}  // namespace falsify::sys
