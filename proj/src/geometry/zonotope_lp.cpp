// Containment-based zonotope constructions.

#include "falsify/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace falsify::geom {

namespace {

Mat inner_fixed(const InnerZonotopeSpec& inner, int n) {
  return inner.F.size() > 0 ? inner.F : Mat(n, 0);
}

Vec inner_offset(const InnerZonotopeSpec& inner, int n) {
  return inner.offset.size() > 0 ? inner.offset : Vec::Zero(n);
}

// Square well-conditioned outer generators fix Gamma = G^-1 [T diag(lambda), F].
bool square_containment(lp::Builder& b, const InnerZonotopeSpec& inner, const Zonotope& outer) {
  const int n = outer.dim();
  if (outer.order() != n) return false;
  Eigen::FullPivLU<Mat> lu(outer.G);
  if (!lu.isInvertible() || lu.rcond() < 1e-8) return false;
  const Mat Ginv = lu.inverse();
  const Mat F = inner_fixed(inner, n);
  const Vec off = inner_offset(inner, n);
  const Mat MT = inner.lambda_var >= 0 ? Mat((Ginv * inner.T).cwiseAbs()) : Mat(n, 0);
  const Vec fixed = F.cols() > 0 ? Vec((Ginv * F).cwiseAbs().rowwise().sum()) : Vec::Zero(n);
  // |Gamma| 1 +/- G^-1 (c + off - c_out) <= 1
  for (double sgn : {1.0, -1.0}) {
    std::vector<lp::Block> blocks;
    if (inner.lambda_var >= 0) blocks.push_back({inner.lambda_var, MT});
    Vec rhs = Vec::Ones(n) - fixed - sgn * Ginv * (off - outer.c);
    if (inner.center_var >= 0) blocks.push_back({inner.center_var, sgn * Ginv});
    if (blocks.empty()) {
      if (rhs.minCoeff() < -kTol) b.add_le({}, -1.0);
      continue;
    }
    b.add_le_block(blocks, rhs);
  }
  return true;
}

}  // namespace

void containment_constraints(lp::Builder& b, const InnerZonotopeSpec& inner, const Zonotope& outer) {
  if (square_containment(b, inner, outer)) return;
  const int n = outer.dim();
  const int M = outer.order();
  const Mat F = inner_fixed(inner, n);
  const Vec off = inner_offset(inner, n);
  const int nt = inner.lambda_var >= 0 ? static_cast<int>(inner.T.cols()) : 0;
  const int nf = static_cast<int>(F.cols());
  const int cols = nt + nf;

  // Gamma split into positive and negative parts, column-major per inner generator.
  const int gp = b.add_variables(M * cols, 0.0, lp::kInf);
  const int gm = b.add_variables(M * cols, 0.0, lp::kInf);
  const int bp = b.add_variables(M, 0.0, lp::kInf);
  const int bm = b.add_variables(M, 0.0, lp::kInf);

  for (int j = 0; j < cols; ++j) {
    // G_out (gp_j - gm_j) - inner_col_j = 0
    std::vector<lp::Block> blocks{{gp + j * M, outer.G}, {gm + j * M, -outer.G}};
    Vec rhs = Vec::Zero(n);
    if (j < nt) {
      const int lam = inner.lambda_var + j;
      blocks.push_back({lam, -inner.T.col(j)});
    } else {
      rhs = F.col(j - nt);
    }
    b.add_eq_block(blocks, rhs);
  }
  {
    std::vector<lp::Block> blocks{{bp, outer.G}, {bm, -outer.G}};
    if (inner.center_var >= 0) blocks.push_back({inner.center_var, -Mat::Identity(n, n)});
    b.add_eq_block(blocks, off - outer.c);
  }
  for (int k = 0; k < M; ++k) {
    std::vector<lp::Builder::Term> row;
    for (int j = 0; j < cols; ++j) {
      row.push_back({gp + j * M + k, 1.0});
      row.push_back({gm + j * M + k, 1.0});
    }
    row.push_back({bp + k, 1.0});
    row.push_back({bm + k, 1.0});
    b.add_le(row, 1.0);
  }
}

namespace {

Mat template_generators(const std::vector<const Mat*>& sources, int n) {
  std::vector<Vec> cols;
  for (const Mat* G : sources) {
    for (int j = 0; j < G->cols(); ++j) {
      const Vec g = G->col(j);
      const double nrm = g.norm();
      if (nrm <= 1e-12) continue;
      bool dup = false;
      for (const Vec& h : cols) {
        const double tol = 1e-12 * std::max(nrm, h.norm());
        if ((g - h).cwiseAbs().maxCoeff() <= tol || (g + h).cwiseAbs().maxCoeff() <= tol) {
          dup = true;
          break;
        }
      }
      if (!dup) cols.push_back(g);
    }
  }
  Mat T(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) T.col(static_cast<Eigen::Index>(k)) = cols[k];
  return T;
}

Zonotope assemble(const Mat& T, const Vec& lambda, const Vec& c, const ZonotopeOptions& options) {
  std::vector<int> keep;
  for (int j = 0; j < lambda.size(); ++j) {
    if (lambda(j) > options.prune_tol) keep.push_back(j);
  }
  Mat G(T.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    G.col(static_cast<Eigen::Index>(k)) = T.col(keep[k]) * lambda(keep[k]);
  }
  Zonotope Z(G, c);
  if (options.max_generators > 0) Z = reduce_order_inner(Z, options.max_generators);
  return Z;
}

}  // namespace

std::optional<Zonotope> zonotope_intersection_under(const std::vector<Zonotope>& operands,
                                                    const ZonotopeOptions& options) {
  if (operands.empty()) throw Error("zonotope_intersection_under: no operands");
  const int n = operands.front().dim();
  if (operands.size() == 1) {
    Zonotope Z = operands.front();
    if (options.max_generators > 0) Z = reduce_order_inner(Z, options.max_generators);
    return Z;
  }
  std::vector<const Mat*> sources;
  for (const Zonotope& Z : operands) sources.push_back(&Z.G);
  const Mat T = template_generators(sources, n);

  lp::Builder b;
  const int lam = b.add_variables(static_cast<int>(T.cols()), 0.0, lp::kInf);
  const int c = b.add_variables(n);
  for (int j = 0; j < T.cols(); ++j) b.set_objective(lam + j, 1.0);
  for (const Zonotope& Z : operands) {
    InnerZonotopeSpec inner;
    inner.T = T;
    inner.lambda_var = T.cols() > 0 ? lam : -1;
    inner.center_var = c;
    containment_constraints(b, inner, Z);
  }
  const auto s = b.solve(lp::Sense::maximize);
  if (s.status == lp::Status::infeasible) return std::nullopt;
  if (!s.optimal()) throw Error(std::string("zonotope_intersection_under: LP ") + lp::to_string(s.status));
  return assemble(T, s.point.segment(lam, T.cols()), s.point.segment(c, n), options);
}

std::optional<Zonotope> minkowski_difference_under(const Zonotope& Z, const Zonotope& S,
                                                   const ZonotopeOptions& options) {
  const int n = Z.dim();
  const Mat T = template_generators({&Z.G}, n);
  lp::Builder b;
  const int lam = b.add_variables(static_cast<int>(T.cols()), 0.0, lp::kInf);
  const int c = b.add_variables(n);
  for (int j = 0; j < T.cols(); ++j) b.set_objective(lam + j, 1.0);
  InnerZonotopeSpec inner;
  inner.T = T;
  inner.lambda_var = T.cols() > 0 ? lam : -1;
  inner.F = S.G;
  inner.center_var = c;
  inner.offset = S.c;
  containment_constraints(b, inner, Z);
  const auto s = b.solve(lp::Sense::maximize);
  if (s.status == lp::Status::infeasible) return std::nullopt;
  if (!s.optimal()) throw Error(std::string("minkowski_difference_under: LP ") + lp::to_string(s.status));
  return assemble(T, s.point.segment(lam, T.cols()), s.point.segment(c, n), options);
}

std::optional<Zonotope> zonotope_polytope_intersection_under(const Zonotope& Z, const HPolytope& P,
                                                             const ZonotopeOptions& options) {
  const int n = Z.dim();
  const Mat T = template_generators({&Z.G}, n);
  lp::Builder b;
  const int lam = b.add_variables(static_cast<int>(T.cols()), 0.0, lp::kInf);
  const int c = b.add_variables(n);
  for (int j = 0; j < T.cols(); ++j) b.set_objective(lam + j, 1.0);
  InnerZonotopeSpec inner;
  inner.T = T;
  inner.lambda_var = T.cols() > 0 ? lam : -1;
  inner.center_var = c;
  containment_constraints(b, inner, Z);
  // a_i c + sum_j |a_i T_j| lambda_j <= b_i
  if (P.rows() > 0) {
    std::vector<lp::Block> blocks{{c, P.A}};
    if (T.cols() > 0) blocks.push_back({lam, Mat((P.A * T).cwiseAbs())});
    b.add_le_block(blocks, P.b);
  }
  const auto s = b.solve(lp::Sense::maximize);
  if (s.status == lp::Status::infeasible) return std::nullopt;
  if (!s.optimal()) throw Error(std::string("zonotope_polytope_intersection_under: LP ") + lp::to_string(s.status));
  return assemble(T, s.point.segment(lam, T.cols()), s.point.segment(c, n), options);
}

Zonotope reduce_order_inner(const Zonotope& Z, int max_generators) {
  if (Z.order() <= max_generators) return Z;
  std::vector<int> idx(Z.order());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return Z.G.col(a).norm() > Z.G.col(b).norm(); });
  idx.resize(max_generators);
  std::sort(idx.begin(), idx.end());
  Mat G(Z.dim(), max_generators);
  for (int k = 0; k < max_generators; ++k) G.col(k) = Z.G.col(idx[k]);
  return Zonotope(G, Z.c);
}

}  // namespace falsify::geom
