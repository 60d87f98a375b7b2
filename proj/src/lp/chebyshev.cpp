#include "falsify/lp.hpp"

#include <cmath>

namespace falsify::lp {

namespace {

bool is_bounded(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.cols());
  for (int k = 0; k < n; ++k) {
    for (double sgn : {1.0, -1.0}) {
      LinearProgram rec;
      rec.sense = Sense::maximize;
      rec.objective = Eigen::VectorXd::Zero(n);
      rec.objective(k) = sgn;
      rec.A_ineq = A;
      rec.b_ineq = Eigen::VectorXd::Zero(A.rows());
      rec.lower = Eigen::VectorXd::Constant(n, -1.0);
      rec.upper = Eigen::VectorXd::Constant(n, 1.0);
      const Solution s = solve(rec);
      if (!s.optimal() || s.objective_value > 1e-9) return false;
    }
  }
  return true;
}

// Max-radius LP on a full list of rows; radius is tied to row 2-norms.
Solution max_ball(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(A.cols());
  LinearProgram lp;
  lp.sense = Sense::maximize;
  lp.objective = Eigen::VectorXd::Zero(n + 1);
  lp.objective(n) = 1.0;
  lp.A_ineq.resize(A.rows(), n + 1);
  lp.A_ineq.leftCols(n) = A;
  lp.A_ineq.col(n) = A.rowwise().norm();
  lp.b_ineq = b;
  lp.lower = Eigen::VectorXd::Constant(n + 1, -kInf);
  lp.upper = Eigen::VectorXd::Constant(n + 1, kInf);
  lp.lower(n) = 0.0;
  return solve(lp);
}

double max_slack(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int row) {
  LinearProgram lp;
  lp.sense = Sense::minimize;
  lp.objective = A.row(row).transpose();
  lp.A_ineq = A;
  lp.b_ineq = b;
  const Solution s = solve(lp);
  if (s.status == Status::unbounded) return kInf;
  if (!s.optimal()) return 0.0;
  return b(row) - s.objective_value;
}

}  // namespace

std::vector<int> implicit_equalities(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Builder builder;
  const int x = builder.add_variables(n);
  const int s = builder.add_variables(m, 0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    std::vector<Builder::Term> terms;
    for (int j = 0; j < n; ++j) {
      if (A(i, j) != 0.0) terms.push_back({x + j, A(i, j)});
    }
    terms.push_back({s + i, 1.0});
    builder.add_le(terms, b(i));
    builder.set_objective(s + i, 1.0);
  }
  const Solution sol = builder.solve(Sense::maximize);
  if (!sol.optimal()) throw EmptySetError("implicit_equalities: set is empty");
  std::vector<int> eq;
  for (int i = 0; i < m; ++i) {
    if (sol.point(s + i) > 1e-9) continue;
    if (max_slack(A, b, i) <= 1e-9) eq.push_back(i);
  }
  return eq;
}

ChebyshevBall chebyshev_center(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(A.cols());
  if (A.rows() == 0) throw UnboundedSetError("chebyshev_center: no constraints");
  if (!is_bounded(A)) throw UnboundedSetError("chebyshev_center: set is unbounded");

  Solution sol = max_ball(A, b);
  if (sol.status == Status::infeasible) throw EmptySetError("chebyshev_center: set is empty");
  if (!sol.optimal()) throw Error(std::string("chebyshev_center: LP ") + to_string(sol.status));
  ChebyshevBall ball{sol.point.head(n), sol.point(n)};
  if (ball.radius > 1e-9) return ball;

  // Lower-dimensional: recenter inside the affine hull.
  Eigen::VectorXd point = ball.center;
  const std::vector<int> eq = implicit_equalities(A, b);
  if (eq.empty()) return ball;
  Eigen::MatrixXd Aeq(eq.size(), n);
  std::vector<bool> is_eq(A.rows(), false);
  for (std::size_t k = 0; k < eq.size(); ++k) {
    Aeq.row(static_cast<Eigen::Index>(k)) = A.row(eq[k]);
    is_eq[eq[k]] = true;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Aeq, Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  const int rank = static_cast<int>(svd.rank());
  const int dim = n - rank;
  ball.radius = 0.0;
  if (dim == 0) {
    ball.center = point;
    return ball;
  }
  const Eigen::MatrixXd N = svd.matrixV().rightCols(dim);
  std::vector<int> rest;
  for (int i = 0; i < A.rows(); ++i) {
    if (!is_eq[i] && (A.row(i) * N).norm() > 1e-12) rest.push_back(i);
  }
  if (rest.empty()) {
    ball.center = point;
    return ball;
  }
  Eigen::MatrixXd Ar(rest.size(), dim);
  Eigen::VectorXd br(rest.size());
  for (std::size_t k = 0; k < rest.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    Ar.row(r) = A.row(rest[k]) * N;
    br(r) = b(rest[k]) - A.row(rest[k]).dot(point);
  }
  const Solution reduced = max_ball(Ar, br);
  if (reduced.optimal()) ball.center = point + N * reduced.point.head(dim);
  else ball.center = point;
  return ball;
}

}  // namespace falsify::lp
