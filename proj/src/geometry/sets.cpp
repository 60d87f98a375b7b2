#include "falsify/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace falsify::geom {

bool Box::contains(const Vec& x, double tol) const {
  return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
}

HPolytope::HPolytope(Mat A_, Vec b_) : A(std::move(A_)), b(std::move(b_)) {
  if (A.rows() != b.size()) throw Error("HPolytope: row count mismatch");
}

HPolytope HPolytope::box(const Vec& lo, const Vec& hi) {
  const int n = static_cast<int>(lo.size());
  Mat A(2 * n, n);
  Vec b(2 * n);
  A.setZero();
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(hi(i))) {
      A(r, i) = 1.0;
      b(r++) = hi(i);
    }
    if (std::isfinite(lo(i))) {
      A(r, i) = -1.0;
      b(r++) = -lo(i);
    }
  }
  return HPolytope(A.topRows(r), b.head(r));
}

HPolytope HPolytope::universe(int dim) { return HPolytope(Mat(0, dim), Vec(0)); }

HPolytope HPolytope::intersect(const HPolytope& other) const {
  if (other.dim() != dim()) throw Error("HPolytope::intersect: dimension mismatch");
  Mat A2(rows() + other.rows(), dim());
  Vec b2(rows() + other.rows());
  A2 << A, other.A;
  b2 << b, other.b;
  return HPolytope(A2, b2);
}

bool HPolytope::contains(const Vec& x, double tol) const {
  for (int i = 0; i < rows(); ++i) {
    const double scale = std::max(1.0, A.row(i).cwiseAbs().maxCoeff());
    if (A.row(i).dot(x) - b(i) > tol * scale) return false;
  }
  return true;
}

bool HPolytope::is_empty() const {
  if (rows() == 0) return false;
  lp::LinearProgram p;
  p.sense = lp::Sense::feasibility;
  p.A_ineq = A;
  p.b_ineq = b;
  const auto s = lp::solve(p);
  if (s.status == lp::Status::numerical_failure) throw Error("HPolytope::is_empty: LP failure");
  return s.status == lp::Status::infeasible;
}

double HPolytope::support(const Vec& d) const {
  if (rows() == 0) return d.norm() == 0.0 ? 0.0 : lp::kInf;
  lp::LinearProgram p;
  p.sense = lp::Sense::maximize;
  p.objective = d;
  p.A_ineq = A;
  p.b_ineq = b;
  const auto s = lp::solve(p);
  if (s.status == lp::Status::unbounded) return lp::kInf;
  if (s.status == lp::Status::infeasible) throw lp::EmptySetError("support of an empty set");
  if (!s.optimal()) throw Error("HPolytope::support: LP failure");
  return s.objective_value;
}

std::optional<Box> HPolytope::bounding_box() const {
  const int n = dim();
  Box box{Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e(i) = 1.0;
    box.hi(i) = support(e);
    box.lo(i) = -support(-e);
    if (!std::isfinite(box.hi(i)) || !std::isfinite(box.lo(i))) return std::nullopt;
  }
  return box;
}

Zonotope::Zonotope(Mat G_, Vec c_) : G(std::move(G_)), c(std::move(c_)) {
  if (G.rows() != c.size()) throw Error("Zonotope: generator row count mismatch");
}

Zonotope Zonotope::box(const Vec& lo, const Vec& hi) {
  const Vec half = 0.5 * (hi - lo);
  std::vector<int> cols;
  for (int i = 0; i < half.size(); ++i) {
    if (half(i) > 0.0) cols.push_back(i);
  }
  Mat G = Mat::Zero(lo.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) G(cols[k], static_cast<Eigen::Index>(k)) = half(cols[k]);
  return Zonotope(G, 0.5 * (hi + lo));
}

Zonotope Zonotope::point(const Vec& p) { return Zonotope(Mat(p.size(), 0), p); }

bool Zonotope::contains(const Vec& x, double tol) const {
  const int n = dim();
  const int m = order();
  if (m == 0) return (x - c).cwiseAbs().maxCoeff() <= tol;
  // min ||G t - (x - c)||_inf over the unit cube
  lp::Builder b;
  const int t = b.add_variables(m, -1.0, 1.0);
  const int s = b.add_variables(1, 0.0, lp::kInf);
  const Vec r = x - c;
  for (int i = 0; i < n; ++i) {
    std::vector<lp::Builder::Term> plus, minus;
    for (int j = 0; j < m; ++j) {
      if (G(i, j) == 0.0) continue;
      plus.push_back({t + j, G(i, j)});
      minus.push_back({t + j, -G(i, j)});
    }
    plus.push_back({s, -1.0});
    minus.push_back({s, -1.0});
    b.add_le(plus, r(i));
    b.add_le(minus, -r(i));
  }
  b.set_objective(s, 1.0);
  const auto sol = b.solve(lp::Sense::minimize);
  if (!sol.optimal()) throw Error("Zonotope::contains: LP failure");
  return sol.objective_value <= tol * std::max(1.0, r.cwiseAbs().maxCoeff());
}

double Zonotope::support(const Vec& d) const {
  return d.dot(c) + (d.transpose() * G).cwiseAbs().sum();
}

Box Zonotope::bounding_box() const {
  const Vec r = G.cwiseAbs().rowwise().sum();
  return Box{c - r, c + r};
}

namespace {

void next_combination(std::vector<int>& idx, int n, bool& done) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) {
    done = true;
    return;
  }
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
}

}  // namespace

HPolytope Zonotope::to_hpolytope() const {
  const int n = dim();
  std::vector<int> nz;
  for (int j = 0; j < order(); ++j) {
    if (G.col(j).norm() > 1e-14) nz.push_back(j);
  }
  Mat Gn(n, static_cast<Eigen::Index>(nz.size()));
  for (std::size_t k = 0; k < nz.size(); ++k) Gn.col(static_cast<Eigen::Index>(k)) = G.col(nz[k]);
  Eigen::FullPivLU<Mat> lu(Gn.rows() > 0 && Gn.cols() > 0 ? Gn : Mat::Zero(n, 1));
  const int rank = Gn.cols() > 0 ? static_cast<int>(lu.rank()) : 0;
  if (rank < n) {
    LinearSystem sys(n + static_cast<int>(Gn.cols()));
    Mat Aeq(n, n + Gn.cols());
    Aeq << Mat::Identity(n, n), -Gn;
    sys.add_eq(Aeq, c);
    Mat box(2 * Gn.cols(), n + Gn.cols());
    box.setZero();
    for (int j = 0; j < Gn.cols(); ++j) {
      box(2 * j, n + j) = 1.0;
      box(2 * j + 1, n + j) = -1.0;
    }
    sys.add_ineq(box, Vec::Ones(2 * Gn.cols()));
    std::vector<int> keep(n);
    std::iota(keep.begin(), keep.end(), 0);
    ProjectionOptions opt;
    opt.max_total_dim = 64;
    auto P = project(sys, keep, opt);
    if (!P) throw Error("Zonotope::to_hpolytope: projection failed");
    return *P;
  }
  if (n == 1) {
    const double r = Gn.cwiseAbs().sum();
    return HPolytope::box(Vec::Constant(1, c(0) - r), Vec::Constant(1, c(0) + r));
  }
  const int m = static_cast<int>(Gn.cols());
  std::vector<Vec> normals;
  std::vector<int> idx(n - 1);
  std::iota(idx.begin(), idx.end(), 0);
  bool done = false;
  long combos = 0;
  while (!done) {
    if (++combos > 200000) throw Error("Zonotope::to_hpolytope: too many generator subsets");
    Mat S(n, n - 1);
    for (int k = 0; k < n - 1; ++k) S.col(k) = Gn.col(idx[k]);
    Eigen::FullPivLU<Mat> slu(S.transpose());
    const Mat ker = slu.kernel();
    if (slu.rank() == n - 1 && ker.cols() == 1) {
      Vec a = ker.col(0).normalized();
      // canonical sign
      for (int i = 0; i < n; ++i) {
        if (std::abs(a(i)) > 1e-12) {
          if (a(i) < 0) a = -a;
          break;
        }
      }
      bool dup = false;
      for (const Vec& u : normals) {
        if ((u - a).cwiseAbs().maxCoeff() < 1e-10) {
          dup = true;
          break;
        }
      }
      if (!dup) normals.push_back(a);
    }
    next_combination(idx, m, done);
  }
  Mat A(2 * normals.size(), n);
  Vec b(2 * normals.size());
  for (std::size_t k = 0; k < normals.size(); ++k) {
    const Vec& a = normals[k];
    const double h = (a.transpose() * Gn).cwiseAbs().sum();
    A.row(2 * k) = a.transpose();
    b(2 * k) = a.dot(c) + h;
    A.row(2 * k + 1) = -a.transpose();
    b(2 * k + 1) = -a.dot(c) + h;
  }
  return HPolytope(A, b);
}

std::vector<Vec> Zonotope::vertices() const {
  std::vector<int> nz;
  for (int j = 0; j < order(); ++j) {
    if (G.col(j).norm() > 1e-14) nz.push_back(j);
  }
  if (nz.size() > 16) throw Error("Zonotope::vertices: too many generators");
  std::vector<Vec> pts;
  const unsigned long count = 1ul << nz.size();
  for (unsigned long mask = 0; mask < count; ++mask) {
    Vec p = c;
    for (std::size_t k = 0; k < nz.size(); ++k) p += ((mask >> k) & 1ul ? 1.0 : -1.0) * G.col(nz[k]);
    pts.push_back(p);
  }
  return VPolytope(pts).pruned().vertices;
}

VPolytope::VPolytope(std::vector<Vec> points) {
  for (Vec& p : points) {
    bool dup = false;
    for (const Vec& q : vertices) {
      if ((p - q).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
        dup = true;
        break;
      }
    }
    if (!dup) vertices.push_back(std::move(p));
  }
}

VPolytope VPolytope::box(const Vec& lo, const Vec& hi) {
  return VPolytope(Zonotope::box(lo, hi).vertices());
}

namespace {

// min ||sum_k lambda_k v_k - x||_inf over the simplex.
double hull_distance(const std::vector<Vec>& pts, const Vec& x, int skip) {
  const int n = static_cast<int>(x.size());
  lp::Builder b;
  const int m = static_cast<int>(pts.size());
  const int lam = b.add_variables(m, 0.0, lp::kInf);
  const int s = b.add_variables(1, 0.0, lp::kInf);
  if (skip >= 0) b.set_bounds(lam + skip, 0.0, 0.0);
  std::vector<lp::Builder::Term> sum;
  for (int k = 0; k < m; ++k) sum.push_back({lam + k, 1.0});
  b.add_eq(sum, 1.0);
  for (int i = 0; i < n; ++i) {
    std::vector<lp::Builder::Term> plus, minus;
    for (int k = 0; k < m; ++k) {
      plus.push_back({lam + k, pts[k](i)});
      minus.push_back({lam + k, -pts[k](i)});
    }
    plus.push_back({s, -1.0});
    minus.push_back({s, -1.0});
    b.add_le(plus, x(i));
    b.add_le(minus, -x(i));
  }
  b.set_objective(s, 1.0);
  const auto sol = b.solve(lp::Sense::minimize);
  if (!sol.optimal()) return lp::kInf;
  return sol.objective_value;
}

}  // namespace

bool VPolytope::contains(const Vec& x, double tol) const {
  if (vertices.empty()) return false;
  return hull_distance(vertices, x, -1) <= tol * std::max(1.0, x.cwiseAbs().maxCoeff());
}

Box VPolytope::bounding_box() const {
  if (vertices.empty()) throw Error("VPolytope::bounding_box: empty");
  Box box{vertices.front(), vertices.front()};
  for (const Vec& v : vertices) {
    box.lo = box.lo.cwiseMin(v);
    box.hi = box.hi.cwiseMax(v);
  }
  return box;
}

double VPolytope::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) d = std::max(d, (vertices[i] - vertices[j]).norm());
  }
  return d;
}

VPolytope VPolytope::pruned() const {
  if (vertices.size() <= 2) return *this;
  std::vector<Vec> pts = vertices;
  for (int k = static_cast<int>(pts.size()) - 1; k >= 0 && pts.size() > 1; --k) {
    if (hull_distance(pts, pts[k], k) <= 1e-10 * std::max(1.0, pts[k].cwiseAbs().maxCoeff())) {
      pts.erase(pts.begin() + k);
    }
  }
  VPolytope out;
  out.vertices = std::move(pts);
  return out;
}

bool ConvexSet::is_empty() const {
  if (is_empty_marker()) return true;
  if (const auto* p = polytope()) return p->is_empty();
  return false;
}

int ConvexSet::dim() const {
  if (const auto* e = std::get_if<EmptySet>(&rep_)) return e->dim;
  if (const auto* p = polytope()) return p->dim();
  return zonotope()->dim();
}

bool ConvexSet::contains(const Vec& x, double tol) const {
  if (is_empty_marker()) return false;
  if (const auto* p = polytope()) return p->contains(x, tol);
  return zonotope()->contains(x, tol);
}

double ConvexSet::support(const Vec& d) const {
  if (is_empty_marker()) return -lp::kInf;
  if (const auto* p = polytope()) return p->support(d);
  return zonotope()->support(d);
}

bool contains_point(const ConvexSet& S, const Vec& x, double tol) { return S.contains(x, tol); }

bool is_empty(const ConvexSet& S) { return S.is_empty(); }

LinearSystem::LinearSystem(int nvars)
    : A_ineq(0, nvars), b_ineq(0), A_eq(0, nvars), b_eq(0) {}

void LinearSystem::add_ineq(const Mat& A, const Vec& b) {
  if (A.cols() != num_vars() || A.rows() != b.size()) throw Error("LinearSystem: shape mismatch");
  Mat A2(A_ineq.rows() + A.rows(), num_vars());
  A2 << A_ineq, A;
  Vec b2(b_ineq.size() + b.size());
  b2 << b_ineq, b;
  A_ineq = std::move(A2);
  b_ineq = std::move(b2);
}

void LinearSystem::add_eq(const Mat& A, const Vec& b) {
  if (A.cols() != num_vars() || A.rows() != b.size()) throw Error("LinearSystem: shape mismatch");
  Mat A2(A_eq.rows() + A.rows(), num_vars());
  A2 << A_eq, A;
  Vec b2(b_eq.size() + b.size());
  b2 << b_eq, b;
  A_eq = std::move(A2);
  b_eq = std::move(b2);
}

void LinearSystem::add_ineq_block(int offset, const Mat& M, const Vec& b) {
  Mat full = Mat::Zero(M.rows(), num_vars());
  full.middleCols(offset, M.cols()) = M;
  add_ineq(full, b);
}

double distance_1norm(const HPolytope& X, const HPolytope& Y) {
  const int n = X.dim();
  lp::Builder b;
  const int x = b.add_variables(n);
  const int y = b.add_variables(n);
  const int t = b.add_variables(n, 0.0, lp::kInf);
  b.add_le_block({{x, X.A}}, X.b);
  b.add_le_block({{y, Y.A}}, Y.b);
  const Mat I = Mat::Identity(n, n);
  b.add_le_block({{x, I}, {y, -I}, {t, -I}}, Vec::Zero(n));
  b.add_le_block({{x, -I}, {y, I}, {t, -I}}, Vec::Zero(n));
  for (int i = 0; i < n; ++i) b.set_objective(t + i, 1.0);
  const auto s = b.solve(lp::Sense::minimize);
  if (s.status == lp::Status::infeasible) throw lp::EmptySetError("distance_1norm: empty operand");
  if (!s.optimal()) throw Error("distance_1norm: LP failure");
  return s.objective_value;
}

HPolytope preimage(const HPolytope& P, const Mat& M, const Vec& t) {
  return HPolytope(P.A * M, P.b - P.A * t);
}

Zonotope affine_map(const Zonotope& Z, const Mat& M, const Vec& t) {
  return Zonotope(M * Z.G, M * Z.c + t);
}

std::optional<HPolytope> affine_map(const HPolytope& P, const Mat& M, const Vec& t,
                                    const ProjectionOptions& options) {
  const int m = static_cast<int>(M.rows());
  const int n = static_cast<int>(M.cols());
  if (m == n) {
    Eigen::FullPivLU<Mat> lu(M);
    if (lu.isInvertible() && lu.rcond() > 1e-12) {
      const Mat Minv = lu.inverse();
      return HPolytope(P.A * Minv, P.b + P.A * Minv * t);
    }
  }
  LinearSystem sys(m + n);
  Mat Aeq(m, m + n);
  Aeq << Mat::Identity(m, m), -M;
  sys.add_eq(Aeq, t);
  sys.add_ineq_block(m, P.A, P.b);
  std::vector<int> keep(m);
  std::iota(keep.begin(), keep.end(), 0);
  return project(sys, keep, options);
}

Zonotope minkowski_sum(const Zonotope& X, const Zonotope& Y) {
  Mat G(X.dim(), X.order() + Y.order());
  G << X.G, Y.G;
  return Zonotope(G, X.c + Y.c);
}

std::optional<HPolytope> minkowski_sum(const HPolytope& X, const HPolytope& Y,
                                       const ProjectionOptions& options) {
  const int n = X.dim();
  LinearSystem sys(2 * n);
  sys.add_ineq_block(n, X.A, X.b);
  Mat rows(Y.rows(), 2 * n);
  rows << Y.A, -Y.A;
  sys.add_ineq(rows, Y.b);
  std::vector<int> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  return project(sys, keep, options);
}

std::optional<Vec> intersection_point(const Zonotope& Z, const HPolytope& P) {
  lp::Builder b;
  const int t = b.add_variables(Z.order(), -1.0, 1.0);
  if (P.rows() == 0) return Z.c;
  b.add_le_block({{t, P.A * Z.G}}, P.b - P.A * Z.c);
  const auto s = b.solve(lp::Sense::feasibility);
  if (!s.optimal()) return std::nullopt;
  return Vec(Z.G * s.point.head(Z.order()) + Z.c);
}

std::optional<Vec> deep_point(const Zonotope& Z, const HPolytope& P) {
  const int m = Z.order();
  lp::Builder b;
  const int t = b.add_variables(m, -1.0, 1.0);
  const int s = b.add_variables(1, 0.0, 1.0);
  for (int j = 0; j < m; ++j) {
    b.add_le({{t + j, 1.0}, {s, 1.0}}, 1.0);
    b.add_le({{t + j, -1.0}, {s, 1.0}}, 1.0);
  }
  if (P.rows() > 0) {
    Mat AG = P.A * Z.G;
    b.add_le_block({{t, AG}, {s, Mat(P.A.rowwise().norm())}}, P.b - P.A * Z.c);
  }
  b.set_objective(s, 1.0);
  const auto sol = b.solve(lp::Sense::maximize);
  if (!sol.optimal()) return intersection_point(Z, P);
  return Vec(Z.G * sol.point.head(m) + Z.c);
}

}  // namespace falsify::geom
