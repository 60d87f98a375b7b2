// Fourier-Motzkin elimination with LP-based redundancy removal.

#include "falsify/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace falsify::geom {

namespace {

constexpr double kCoefTol = 1e-12;

struct Work {
  std::vector<Vec> ineq;
  std::vector<double> ineq_b;
  std::vector<Vec> eq;
  std::vector<double> eq_b;
  int nvars = 0;
};

lp::LinearProgram feasibility_program(const Work& w, int skip_row) {
  lp::LinearProgram p;
  p.sense = lp::Sense::feasibility;
  const int m = static_cast<int>(w.ineq.size()) - (skip_row >= 0 ? 1 : 0);
  p.A_ineq.resize(m, w.nvars);
  p.b_ineq.resize(m);
  int r = 0;
  for (int i = 0; i < static_cast<int>(w.ineq.size()); ++i) {
    if (i == skip_row) continue;
    p.A_ineq.row(r) = w.ineq[i].transpose();
    p.b_ineq(r++) = w.ineq_b[i];
  }
  p.A_eq.resize(static_cast<Eigen::Index>(w.eq.size()), w.nvars);
  p.b_eq.resize(static_cast<Eigen::Index>(w.eq.size()));
  for (std::size_t i = 0; i < w.eq.size(); ++i) {
    p.A_eq.row(static_cast<Eigen::Index>(i)) = w.eq[i].transpose();
    p.b_eq(static_cast<Eigen::Index>(i)) = w.eq_b[i];
  }
  return p;
}

bool feasible(const Work& w) {
  const auto s = lp::solve(feasibility_program(w, -1));
  if (s.status == lp::Status::numerical_failure) throw Error("project: LP failure in feasibility check");
  return s.status == lp::Status::optimal;
}

// Scales to unit max-norm; returns false for a zero row after noting infeasibility.
bool normalize(Vec& a, double& b, bool& infeasible) {
  for (int j = 0; j < a.size(); ++j) {
    if (std::abs(a(j)) < kCoefTol * std::max(1.0, std::abs(b))) a(j) = 0.0;
  }
  const double s = a.cwiseAbs().maxCoeff();
  if (s <= kCoefTol) {
    if (b < -1e-9) infeasible = true;
    return false;
  }
  a /= s;
  b /= s;
  return true;
}

bool tidy(Work& w) {
  bool infeasible = false;
  std::vector<std::pair<Vec, double>> rows;
  for (std::size_t i = 0; i < w.ineq.size(); ++i) {
    Vec a = w.ineq[i];
    double b = w.ineq_b[i];
    if (normalize(a, b, infeasible)) rows.emplace_back(std::move(a), b);
  }
  if (infeasible) return false;
  std::stable_sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) {
    for (int j = 0; j < l.first.size(); ++j) {
      if (l.first(j) < r.first(j) - 1e-10) return true;
      if (l.first(j) > r.first(j) + 1e-10) return false;
    }
    return l.second < r.second;
  });
  w.ineq.clear();
  w.ineq_b.clear();
  for (auto& [a, b] : rows) {
    if (!w.ineq.empty() && (w.ineq.back() - a).cwiseAbs().maxCoeff() <= 1e-10) continue;
    w.ineq.push_back(std::move(a));
    w.ineq_b.push_back(b);
  }
  std::vector<Vec> eq;
  std::vector<double> eq_b;
  for (std::size_t i = 0; i < w.eq.size(); ++i) {
    Vec a = w.eq[i];
    double b = w.eq_b[i];
    bool bad = false;
    if (normalize(a, b, bad)) {
      eq.push_back(std::move(a));
      eq_b.push_back(b);
    } else if (std::abs(w.eq_b[i]) > 1e-9) {
      return false;
    }
  }
  w.eq = std::move(eq);
  w.eq_b = std::move(eq_b);
  return true;
}

void drop_redundant(Work& w) {
  for (int i = static_cast<int>(w.ineq.size()) - 1; i >= 0; --i) {
    if (w.ineq.size() <= 1) break;
    lp::LinearProgram p = feasibility_program(w, i);
    p.sense = lp::Sense::maximize;
    p.objective = w.ineq[i];
    // Cap the objective so the program stays bounded.
    Mat A2(p.A_ineq.rows() + 1, w.nvars);
    A2 << p.A_ineq, w.ineq[i].transpose();
    Vec b2(p.b_ineq.size() + 1);
    b2 << p.b_ineq, w.ineq_b[i] + 1.0;
    p.A_ineq = std::move(A2);
    p.b_ineq = std::move(b2);
    const auto s = lp::solve(p);
    if (s.optimal() && s.objective_value <= w.ineq_b[i] + 1e-9 * std::max(1.0, std::abs(w.ineq_b[i]))) {
      w.ineq.erase(w.ineq.begin() + i);
      w.ineq_b.erase(w.ineq_b.begin() + i);
    }
  }
}

void substitute(Work& w, int var, int eq_row) {
  const Vec e = w.eq[eq_row];
  const double eb = w.eq_b[eq_row];
  const double piv = e(var);
  auto apply = [&](Vec& a, double& b) {
    const double f = a(var) / piv;
    if (f == 0.0) return;
    a -= f * e;
    b -= f * eb;
    a(var) = 0.0;
  };
  for (std::size_t i = 0; i < w.ineq.size(); ++i) apply(w.ineq[i], w.ineq_b[i]);
  for (std::size_t i = 0; i < w.eq.size(); ++i) {
    if (static_cast<int>(i) != eq_row) apply(w.eq[i], w.eq_b[i]);
  }
  w.eq.erase(w.eq.begin() + eq_row);
  w.eq_b.erase(w.eq_b.begin() + eq_row);
}

void fourier_motzkin(Work& w, int var) {
  std::vector<int> pos, neg;
  std::vector<Vec> out;
  std::vector<double> out_b;
  for (int i = 0; i < static_cast<int>(w.ineq.size()); ++i) {
    const double a = w.ineq[i](var);
    if (a > kCoefTol) pos.push_back(i);
    else if (a < -kCoefTol) neg.push_back(i);
    else {
      Vec r = w.ineq[i];
      r(var) = 0.0;
      out.push_back(std::move(r));
      out_b.push_back(w.ineq_b[i]);
    }
  }
  for (int p : pos) {
    for (int q : neg) {
      const double ap = w.ineq[p](var);
      const double aq = -w.ineq[q](var);
      Vec r = w.ineq[p] / ap + w.ineq[q] / aq;
      r(var) = 0.0;
      out.push_back(std::move(r));
      out_b.push_back(w.ineq_b[p] / ap + w.ineq_b[q] / aq);
    }
  }
  w.ineq = std::move(out);
  w.ineq_b = std::move(out_b);
}

}  // namespace

std::optional<HPolytope> project(const LinearSystem& system, const std::vector<int>& keep,
                                 const ProjectionOptions& options) {
  const int n = system.num_vars();
  if (n > options.max_total_dim) {
    throw DimensionGuardError("project: total dimension " + std::to_string(n) + " exceeds limit " +
                              std::to_string(options.max_total_dim));
  }
  Work w;
  w.nvars = n;
  for (int i = 0; i < system.A_ineq.rows(); ++i) {
    w.ineq.push_back(system.A_ineq.row(i).transpose());
    w.ineq_b.push_back(system.b_ineq(i));
  }
  for (int i = 0; i < system.A_eq.rows(); ++i) {
    w.eq.push_back(system.A_eq.row(i).transpose());
    w.eq_b.push_back(system.b_eq(i));
  }
  if (!tidy(w) || !feasible(w)) return std::nullopt;

  std::vector<bool> kept(n, false);
  for (int k : keep) kept.at(k) = true;
  std::vector<int> todo;
  for (int j = 0; j < n; ++j) {
    if (!kept[j]) todo.push_back(j);
  }

  while (!todo.empty()) {
    // Prefer substitution through an equality.
    int best_var = -1, best_eq = -1;
    double best_abs = 0.0;
    for (int v : todo) {
      for (std::size_t r = 0; r < w.eq.size(); ++r) {
        const double a = std::abs(w.eq[r](v));
        if (a > 1e-9 && a > best_abs) {
          best_abs = a;
          best_var = v;
          best_eq = static_cast<int>(r);
        }
      }
    }
    if (best_var >= 0) {
      substitute(w, best_var, best_eq);
      todo.erase(std::find(todo.begin(), todo.end(), best_var));
      if (!tidy(w)) return std::nullopt;
      continue;
    }
    long best_cost = -1;
    for (int v : todo) {
      long p = 0, q = 0;
      for (const Vec& a : w.ineq) {
        if (a(v) > kCoefTol) ++p;
        else if (a(v) < -kCoefTol) ++q;
      }
      const long cost = p * q - p - q;
      if (best_var < 0 || cost < best_cost) {
        best_cost = cost;
        best_var = v;
      }
    }
    fourier_motzkin(w, best_var);
    for (Vec& a : w.eq) a(best_var) = 0.0;
    todo.erase(std::find(todo.begin(), todo.end(), best_var));
    if (!tidy(w)) return std::nullopt;
    drop_redundant(w);
  }

  // Remaining equalities only involve kept coordinates.
  for (std::size_t r = 0; r < w.eq.size(); ++r) {
    w.ineq.push_back(w.eq[r]);
    w.ineq_b.push_back(w.eq_b[r]);
    w.ineq.push_back(-w.eq[r]);
    w.ineq_b.push_back(-w.eq_b[r]);
  }
  w.eq.clear();
  if (!tidy(w)) return std::nullopt;
  drop_redundant(w);

  const int k = static_cast<int>(keep.size());
  Mat A(static_cast<Eigen::Index>(w.ineq.size()), k);
  Vec b(static_cast<Eigen::Index>(w.ineq.size()));
  for (std::size_t i = 0; i < w.ineq.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int c = 0; c < k; ++c) A(r, c) = w.ineq[i](keep[c]);
    const double nrm = A.row(r).norm();
    A.row(r) /= nrm;
    b(r) = w.ineq_b[i] / nrm;
  }
  HPolytope P(A, b);
  if (P.is_empty()) return std::nullopt;
  return P;
}

std::optional<HPolytope> project(const HPolytope& P, const std::vector<int>& keep,
                                 const ProjectionOptions& options) {
  LinearSystem sys(P.dim());
  sys.add_ineq(P.A, P.b);
  return project(sys, keep, options);
}

HPolytope remove_redundancy(const HPolytope& P) {
  Work w;
  w.nvars = P.dim();
  for (int i = 0; i < P.rows(); ++i) {
    w.ineq.push_back(P.A.row(i).transpose());
    w.ineq_b.push_back(P.b(i));
  }
  if (!tidy(w)) return P;
  drop_redundant(w);
  Mat A(static_cast<Eigen::Index>(w.ineq.size()), P.dim());
  Vec b(static_cast<Eigen::Index>(w.ineq.size()));
  for (std::size_t i = 0; i < w.ineq.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = w.ineq[i].transpose();
    b(static_cast<Eigen::Index>(i)) = w.ineq_b[i];
  }
  return HPolytope(A, b);
}

}  // namespace falsify::geom
