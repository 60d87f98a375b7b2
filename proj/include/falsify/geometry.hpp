#pragma once

#include "falsify/lp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <variant>
#include <vector>

namespace falsify::geom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kTol = lp::kFeasTol;

class DimensionGuardError : public Error {
 public:
  using Error::Error;
};

struct Box {
  Vec lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  Vec center() const { return 0.5 * (lo + hi); }
  bool contains(const Vec& x, double tol = kTol) const;
};

// {x | A x <= b}
struct HPolytope {
  Mat A;
  Vec b;

  HPolytope() = default;
  HPolytope(Mat A_, Vec b_);

  static HPolytope box(const Vec& lo, const Vec& hi);
  static HPolytope from_box(const Box& box) { return HPolytope::box(box.lo, box.hi); }
  static HPolytope universe(int dim);

  int dim() const { return static_cast<int>(A.cols()); }
  int rows() const { return static_cast<int>(A.rows()); }

  HPolytope intersect(const HPolytope& other) const;
  bool contains(const Vec& x, double tol = kTol) const;
  bool is_empty() const;
  // Returns +inf when unbounded in direction d. Throws on an empty set.
  double support(const Vec& d) const;
  std::optional<Box> bounding_box() const;
  lp::ChebyshevBall chebyshev_center() const { return lp::chebyshev_center(A, b); }
};

// <G, c> = {G t + c | t in [-1, 1]^m}
struct Zonotope {
  Mat G;
  Vec c;

  Zonotope() = default;
  Zonotope(Mat G_, Vec c_);
  static Zonotope box(const Vec& lo, const Vec& hi);
  static Zonotope point(const Vec& p);

  int dim() const { return static_cast<int>(c.size()); }
  int order() const { return static_cast<int>(G.cols()); }

  bool contains(const Vec& x, double tol = kTol) const;
  double support(const Vec& d) const;
  Box bounding_box() const;
  // Facet description; feasible for few generators in low dimension.
  HPolytope to_hpolytope() const;
  std::vector<Vec> vertices() const;
};

// Convex hull of a finite point list with duplicates removed.
struct VPolytope {
  std::vector<Vec> vertices;

  VPolytope() = default;
  explicit VPolytope(std::vector<Vec> points);
  static VPolytope box(const Vec& lo, const Vec& hi);

  int dim() const { return vertices.empty() ? 0 : static_cast<int>(vertices.front().size()); }
  bool contains(const Vec& x, double tol = kTol) const;
  Box bounding_box() const;
  double diameter() const;
  // Keeps only extreme points.
  VPolytope pruned() const;
};

struct EmptySet {
  int dim = 0;
};

// Frame representation: a first-class empty marker or one of two backends.
class ConvexSet {
 public:
  ConvexSet() : rep_(EmptySet{0}) {}
  ConvexSet(HPolytope p) : rep_(std::move(p)) {}
  ConvexSet(Zonotope z) : rep_(std::move(z)) {}
  static ConvexSet empty(int dim) {
    ConvexSet s;
    s.rep_ = EmptySet{dim};
    return s;
  }

  bool is_empty_marker() const { return std::holds_alternative<EmptySet>(rep_); }
  // True for the marker and for infeasible H-descriptions.
  bool is_empty() const;
  int dim() const;
  const HPolytope* polytope() const { return std::get_if<HPolytope>(&rep_); }
  const Zonotope* zonotope() const { return std::get_if<Zonotope>(&rep_); }
  bool contains(const Vec& x, double tol = kTol) const;
  double support(const Vec& d) const;

 private:
  std::variant<EmptySet, HPolytope, Zonotope> rep_;
};

// General linear system used as projection input: A_ineq z <= b_ineq, A_eq z == b_eq.
struct LinearSystem {
  Mat A_ineq;
  Vec b_ineq;
  Mat A_eq;
  Vec b_eq;

  explicit LinearSystem(int nvars = 0);
  int num_vars() const { return static_cast<int>(A_ineq.cols()); }
  void add_ineq(const Mat& A, const Vec& b);
  void add_eq(const Mat& A, const Vec& b);
  // Adds block rows acting on variables [offset, offset + M.cols()).
  void add_ineq_block(int offset, const Mat& M, const Vec& b);
};

struct ProjectionOptions {
  int max_total_dim = 12;
};

// Fourier-Motzkin onto the listed coordinates (in listed order). Equalities are
// eliminated by substitution first. nullopt marks an empty result.
std::optional<HPolytope> project(const LinearSystem& system, const std::vector<int>& keep,
                                 const ProjectionOptions& options = {});
std::optional<HPolytope> project(const HPolytope& P, const std::vector<int>& keep,
                                 const ProjectionOptions& options = {});

// Drops rows implied by the others (one LP per row) and exact duplicates.
HPolytope remove_redundancy(const HPolytope& P);

// {M x + t | x in P}
std::optional<HPolytope> affine_map(const HPolytope& P, const Mat& M, const Vec& t,
                                    const ProjectionOptions& options = {});
Zonotope affine_map(const Zonotope& Z, const Mat& M, const Vec& t);
// {x | M x + t in P}
HPolytope preimage(const HPolytope& P, const Mat& M, const Vec& t);

Zonotope minkowski_sum(const Zonotope& X, const Zonotope& Y);
std::optional<HPolytope> minkowski_sum(const HPolytope& X, const HPolytope& Y,
                                       const ProjectionOptions& options = {});

// LP block encoding <[T diag(lambda), F], c + offset> subset of outer, through
// T diag(lambda) = G_out Gamma_1, F = G_out Gamma_2, c + offset - c_out = G_out beta and
// row-wise |Gamma| 1 + |beta| <= 1. lambda_var < 0 means no scaled block.
struct InnerZonotopeSpec {
  Mat T;
  int lambda_var = -1;
  Mat F;
  int center_var = -1;
  Vec offset;
};
void containment_constraints(lp::Builder& builder, const InnerZonotopeSpec& inner,
                             const Zonotope& outer);

struct ZonotopeOptions {
  int max_generators = 0;  // 0 = unlimited
  double prune_tol = 1e-9;
};

// Inner approximation of the intersection; nullopt when the LP finds no point.
std::optional<Zonotope> zonotope_intersection_under(const std::vector<Zonotope>& operands,
                                                    const ZonotopeOptions& options = {});
// Inner approximation of {x | x + S subset Z}.
std::optional<Zonotope> minkowski_difference_under(const Zonotope& Z, const Zonotope& S,
                                                   const ZonotopeOptions& options = {});
// Inner approximation of Z intersected with a polytope.
std::optional<Zonotope> zonotope_polytope_intersection_under(const Zonotope& Z,
                                                             const HPolytope& P,
                                                             const ZonotopeOptions& options = {});
// Drops the shortest generators beyond max_generators (stays inside Z).
Zonotope reduce_order_inner(const Zonotope& Z, int max_generators);

bool contains_point(const ConvexSet& S, const Vec& x, double tol = kTol);
bool is_empty(const ConvexSet& S);

double distance_1norm(const HPolytope& X, const HPolytope& Y);

// Whether a zonotope and a polytope share a point; the point is returned.
std::optional<Vec> intersection_point(const Zonotope& Z, const HPolytope& P);
// A point of Z inside P maximizing the uniform margin in generator coordinates.
std::optional<Vec> deep_point(const Zonotope& Z, const HPolytope& P);

}  // namespace falsify::geom
