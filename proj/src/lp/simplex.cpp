// Dense bounded-variable two-phase primal simplex.

#include "falsify/lp.hpp"

#include <algorithm>
#include <cmath>

namespace falsify::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

int LinearProgram::num_variables() const {
  if (objective.size() > 0) return static_cast<int>(objective.size());
  if (A_ineq.cols() > 0) return static_cast<int>(A_ineq.cols());
  if (A_eq.cols() > 0) return static_cast<int>(A_eq.cols());
  return static_cast<int>(std::max(lower.size(), upper.size()));
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kHarrisTol = 1e-9;
constexpr double kColumnTol = 1e-7;  // entering columns below this are numerically empty
constexpr int kDegenerateSwitch = 30;

enum class VarState { basic, at_lower, at_upper, free };

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolverOptions& opt) : lp_(lp), opt_(opt) {}

  Solution run();

 private:
  enum class StepResult { progressed, optimal, unbounded };

  void setup();
  StepResult iterate(bool phase_one);
  void compute_reduced_costs(const Eigen::VectorXd& cost);
  void pivot(int row, int col);
  void drive_out_artificials();
  Eigen::VectorXd recover_point();
  double max_violation(const Eigen::VectorXd& z) const;

  const LinearProgram& lp_;
  SolverOptions opt_;

  int n_ = 0;        // structural variables
  int m_ = 0;        // rows kept after dropping empty ones
  int n_slack_ = 0;
  int art_begin_ = 0;
  int ncols_ = 0;
  bool trivially_infeasible_ = false;

  Eigen::MatrixXd rows_;      // scaled constraint rows (m x n)
  Eigen::VectorXd rhs_;       // scaled right-hand sides
  std::vector<int> slack_of_row_;  // column of row's slack or -1
  std::vector<int> art_of_row_;    // column of row's artificial or -1
  std::vector<double> art_sign_;

  RowMatrix T_;
  Eigen::VectorXd beta_, lo_, hi_, value_, d_;
  std::vector<int> basis_;
  std::vector<VarState> state_;

  int iterations_ = 0;
  int cap_ = 0;
  int degenerate_streak_ = 0;
  bool bland_ = false;
};

void Simplex::setup() {
  n_ = lp_.num_variables();
  const int mi = static_cast<int>(lp_.A_ineq.rows());
  const int me = static_cast<int>(lp_.A_eq.rows());

  std::vector<int> keep_ineq, keep_eq;
  for (int i = 0; i < mi; ++i) {
    const double scale = lp_.A_ineq.row(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) {
      keep_ineq.push_back(i);
    } else if (lp_.b_ineq(i) < -opt_.feas_tol) {
      trivially_infeasible_ = true;
    }
  }
  for (int i = 0; i < me; ++i) {
    const double scale = lp_.A_eq.row(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) {
      keep_eq.push_back(i);
    } else if (std::abs(lp_.b_eq(i)) > opt_.feas_tol) {
      trivially_infeasible_ = true;
    }
  }

  n_slack_ = static_cast<int>(keep_ineq.size());
  m_ = n_slack_ + static_cast<int>(keep_eq.size());
  rows_.resize(m_, n_);
  rhs_.resize(m_);
  for (int k = 0; k < n_slack_; ++k) {
    const int i = keep_ineq[k];
    const double scale = lp_.A_ineq.row(i).cwiseAbs().maxCoeff();
    rows_.row(k) = lp_.A_ineq.row(i) / scale;
    rhs_(k) = lp_.b_ineq(i) / scale;
  }
  for (int k = 0; k < static_cast<int>(keep_eq.size()); ++k) {
    const int i = keep_eq[k];
    const double scale = lp_.A_eq.row(i).cwiseAbs().maxCoeff();
    rows_.row(n_slack_ + k) = lp_.A_eq.row(i) / scale;
    rhs_(n_slack_ + k) = lp_.b_eq(i) / scale;
  }

  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n_, kInf);
  if (lp_.lower.size() == n_) lo = lp_.lower;
  if (lp_.upper.size() == n_) hi = lp_.upper;
  for (int j = 0; j < n_; ++j) {
    if (lo(j) > hi(j) + opt_.feas_tol) trivially_infeasible_ = true;
  }

  Eigen::VectorXd x0(n_);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo(j))) x0(j) = lo(j);
    else if (std::isfinite(hi(j))) x0(j) = hi(j);
    else x0(j) = 0.0;
  }
  const Eigen::VectorXd residual = rhs_ - rows_ * x0;

  slack_of_row_.assign(m_, -1);
  art_of_row_.assign(m_, -1);
  art_sign_.assign(m_, 1.0);
  int n_art = 0;
  for (int i = 0; i < m_; ++i) {
    if (i < n_slack_) {
      slack_of_row_[i] = n_ + i;
      if (residual(i) < 0.0) {
        art_of_row_[i] = n_art++;
        art_sign_[i] = -1.0;
      }
    } else {
      art_of_row_[i] = n_art++;
      art_sign_[i] = residual(i) >= 0.0 ? 1.0 : -1.0;
    }
  }
  art_begin_ = n_ + n_slack_;
  ncols_ = art_begin_ + n_art;
  for (int i = 0; i < m_; ++i) {
    if (art_of_row_[i] >= 0) art_of_row_[i] += art_begin_;
  }

  lo_.resize(ncols_);
  hi_.resize(ncols_);
  value_ = Eigen::VectorXd::Zero(ncols_);
  lo_.head(n_) = lo;
  hi_.head(n_) = hi;
  value_.head(n_) = x0;
  for (int c = n_; c < ncols_; ++c) {
    lo_(c) = 0.0;
    hi_(c) = kInf;
  }

  state_.assign(ncols_, VarState::at_lower);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo(j))) state_[j] = VarState::at_lower;
    else if (std::isfinite(hi(j))) state_[j] = VarState::at_upper;
    else state_[j] = VarState::free;
  }

  T_ = RowMatrix::Zero(m_, ncols_);
  beta_.resize(m_);
  basis_.assign(m_, -1);
  for (int i = 0; i < m_; ++i) {
    int basic;
    double sign;
    if (art_of_row_[i] >= 0) {
      basic = art_of_row_[i];
      sign = art_sign_[i];
    } else {
      basic = slack_of_row_[i];
      sign = 1.0;
    }
    // The basic column is sign * e_i, so its inverse row scaling is sign.
    T_.block(i, 0, 1, n_) = sign * rows_.row(i);
    if (slack_of_row_[i] >= 0) T_(i, slack_of_row_[i]) = sign;
    if (art_of_row_[i] >= 0) T_(i, art_of_row_[i]) = sign * art_sign_[i];
    basis_[i] = basic;
    state_[basic] = VarState::basic;
    beta_(i) = sign * residual(i);
  }

  cap_ = opt_.cap_factor * (n_ + m_ + 1);
}

void Simplex::compute_reduced_costs(const Eigen::VectorXd& cost) {
  d_ = cost;
  for (int i = 0; i < m_; ++i) {
    const double cb = cost(basis_[i]);
    if (cb != 0.0) d_.noalias() -= cb * T_.row(i).transpose();
  }
}

void Simplex::pivot(int row, int col) {
  const double piv = T_(row, col);
  Eigen::RowVectorXd prow = T_.row(row) / piv;
  Eigen::VectorXd column = T_.col(col);
  column(row) = 0.0;
  T_.noalias() -= column * prow;
  T_.row(row) = prow;
  const double dj = d_(col);
  if (dj != 0.0) d_.noalias() -= dj * prow.transpose();
  d_(col) = 0.0;
}

Simplex::StepResult Simplex::iterate(bool phase_one) {
  // Pricing.
  int enter = -1;
  double dir = 0.0;
  double best = 0.0;
  for (int j = 0; j < ncols_; ++j) {
    const VarState st = state_[j];
    if (st == VarState::basic) continue;
    if (!phase_one && j >= art_begin_) continue;
    if (lo_(j) == hi_(j)) continue;
    const double dj = d_(j);
    double cand_dir = 0.0;
    if (st == VarState::at_lower && dj < -kDualTol) cand_dir = 1.0;
    else if (st == VarState::at_upper && dj > kDualTol) cand_dir = -1.0;
    else if (st == VarState::free && std::abs(dj) > kDualTol) cand_dir = dj < 0.0 ? 1.0 : -1.0;
    if (cand_dir == 0.0) continue;
    if (!std::isfinite(hi_(j) - lo_(j)) && m_ > 0 && (bland_ || std::abs(dj) > best) &&
        T_.col(j).cwiseAbs().maxCoeff() < kColumnTol) {
      continue;
    }
    if (bland_) {
      enter = j;
      dir = cand_dir;
      break;
    }
    if (std::abs(dj) > best) {
      best = std::abs(dj);
      enter = j;
      dir = cand_dir;
    }
  }
  if (enter < 0) return StepResult::optimal;

  // Ratio test.
  const double own_range = hi_(enter) - lo_(enter);
  double tmax = std::isfinite(own_range) ? own_range : kInf;
  if (!bland_) {
    for (int i = 0; i < m_; ++i) {
      const double alpha = T_(i, enter);
      if (std::abs(alpha) <= kPivotTol) continue;
      const double delta = -dir * alpha;
      const int b = basis_[i];
      double lim = kInf;
      if (delta < 0.0 && std::isfinite(lo_(b))) lim = (beta_(i) - lo_(b) + kHarrisTol) / -delta;
      else if (delta > 0.0 && std::isfinite(hi_(b))) lim = (hi_(b) - beta_(i) + kHarrisTol) / delta;
      tmax = std::min(tmax, lim);
    }
  }

  int leave = -1;
  double step = kInf;
  double best_alpha = 0.0;
  for (int i = 0; i < m_; ++i) {
    const double alpha = T_(i, enter);
    if (std::abs(alpha) <= kPivotTol) continue;
    const double delta = -dir * alpha;
    const int b = basis_[i];
    double ratio = kInf;
    if (delta < 0.0 && std::isfinite(lo_(b))) ratio = (beta_(i) - lo_(b)) / -delta;
    else if (delta > 0.0 && std::isfinite(hi_(b))) ratio = (hi_(b) - beta_(i)) / delta;
    if (!std::isfinite(ratio)) continue;
    ratio = std::max(ratio, 0.0);
    if (bland_) {
      if (leave < 0 || ratio < step - 1e-12 ||
          (ratio <= step + 1e-12 && basis_[i] < basis_[leave])) {
        leave = i;
        step = ratio;
      }
    } else if (ratio <= tmax && std::abs(alpha) > best_alpha) {
      best_alpha = std::abs(alpha);
      leave = i;
      step = ratio;
    }
  }

  const bool flip = std::isfinite(own_range) && (leave < 0 || own_range <= step);
  if (flip) step = own_range;
  if (!std::isfinite(step)) {
    if (phase_one) return StepResult::optimal;  // cannot happen with bounded phase-one cost
    return StepResult::unbounded;
  }

  if (step <= 1e-12) {
    if (++degenerate_streak_ >= kDegenerateSwitch) bland_ = true;
  } else {
    degenerate_streak_ = 0;
    bland_ = false;
  }

  const double moved = dir * step;
  if (step != 0.0) beta_.noalias() -= moved * T_.col(enter);
  const double new_value = value_(enter) + moved;

  if (flip) {
    value_(enter) = dir > 0.0 ? hi_(enter) : lo_(enter);
    state_[enter] = dir > 0.0 ? VarState::at_upper : VarState::at_lower;
    return StepResult::progressed;
  }

  const int out = basis_[leave];
  const double delta = -dir * T_(leave, enter);
  if (delta < 0.0) {
    value_(out) = lo_(out);
    state_[out] = VarState::at_lower;
  } else {
    value_(out) = hi_(out);
    state_[out] = VarState::at_upper;
  }
  pivot(leave, enter);
  basis_[leave] = enter;
  state_[enter] = VarState::basic;
  beta_(leave) = new_value;
  value_(enter) = new_value;
  return StepResult::progressed;
}

void Simplex::drive_out_artificials() {
  for (int i = 0; i < m_; ++i) {
    const int b = basis_[i];
    if (b < art_begin_) continue;
    int best = -1;
    double best_abs = 1e-7;
    for (int j = 0; j < art_begin_; ++j) {
      if (state_[j] == VarState::basic) continue;
      const double a = std::abs(T_(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) continue;  // redundant row; the artificial stays fixed at zero
    value_(b) = 0.0;
    state_[b] = VarState::at_lower;
    pivot(i, best);
    basis_[i] = best;
    state_[best] = VarState::basic;
    beta_(i) = value_(best);
  }
}

Eigen::VectorXd Simplex::recover_point() {
  // Refactorize the final basis against the scaled original rows.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
  Eigen::VectorXd rhs = rhs_;
  auto column_of = [&](int c) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m_);
    if (c < n_) {
      col = rows_.col(c);
    } else if (c < art_begin_) {
      col(c - n_) = 1.0;
    } else {
      for (int i = 0; i < m_; ++i) {
        if (art_of_row_[i] == c) col(i) = art_sign_[i];
      }
    }
    return col;
  };
  for (int c = 0; c < ncols_; ++c) {
    if (state_[c] == VarState::basic) continue;
    if (value_(c) != 0.0) rhs -= column_of(c) * value_(c);
  }
  for (int i = 0; i < m_; ++i) B.col(i) = column_of(basis_[i]);

  Eigen::VectorXd xb = beta_;
  if (m_ > 0) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Eigen::VectorXd refined = lu.solve(rhs);
    if (refined.allFinite() && (B * refined - rhs).cwiseAbs().maxCoeff() < 1e-9 &&
        (refined - beta_).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + beta_.cwiseAbs().maxCoeff())) {
      xb = refined;
    }
  }
  Eigen::VectorXd full = value_;
  for (int i = 0; i < m_; ++i) full(basis_[i]) = xb(i);
  Eigen::VectorXd z = full.head(n_);
  // Snap bound-adjacent values onto the bound.
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo_(j)) && z(j) < lo_(j)) z(j) = lo_(j);
    if (std::isfinite(hi_(j)) && z(j) > hi_(j)) z(j) = hi_(j);
  }
  return z;
}

double Simplex::max_violation(const Eigen::VectorXd& z) const {
  double worst = 0.0;
  if (lp_.A_ineq.rows() > 0) {
    const Eigen::VectorXd r = lp_.A_ineq * z - lp_.b_ineq;
    worst = std::max(worst, r.maxCoeff());
  }
  if (lp_.A_eq.rows() > 0) {
    const Eigen::VectorXd r = lp_.A_eq * z - lp_.b_eq;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

Solution Simplex::run() {
  Solution sol;
  setup();
  if (trivially_infeasible_) {
    sol.status = Status::infeasible;
    return sol;
  }

  Eigen::VectorXd phase_one = Eigen::VectorXd::Zero(ncols_);
  for (int c = art_begin_; c < ncols_; ++c) phase_one(c) = 1.0;
  compute_reduced_costs(phase_one);

  auto loop = [&](bool p1) -> StepResult {
    while (true) {
      if (++iterations_ > cap_) return StepResult::progressed;
      const StepResult r = iterate(p1);
      if (r != StepResult::progressed) return r;
    }
  };

  if (ncols_ > art_begin_) {
    const StepResult r = loop(true);
    if (r == StepResult::progressed) {
      sol.status = Status::numerical_failure;
      sol.iterations = iterations_;
      return sol;
    }
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= art_begin_) infeas += std::max(0.0, beta_(i));
    }
    const double scale = 1.0 + (m_ > 0 ? rhs_.cwiseAbs().maxCoeff() : 0.0);
    if (infeas > 1e-9 * scale) {
      sol.status = Status::infeasible;
      sol.iterations = iterations_;
      return sol;
    }
    for (int c = art_begin_; c < ncols_; ++c) hi_(c) = 0.0;
    drive_out_artificials();
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(ncols_);
  if (lp_.sense != Sense::feasibility && lp_.objective.size() == n_) {
    cost.head(n_) = lp_.sense == Sense::maximize ? Eigen::VectorXd(-lp_.objective) : lp_.objective;
  }
  bland_ = false;
  degenerate_streak_ = 0;
  if (lp_.sense != Sense::feasibility) {
    compute_reduced_costs(cost);
    const StepResult r = loop(false);
    sol.iterations = iterations_;
    if (r == StepResult::progressed) {
      sol.status = Status::numerical_failure;
      return sol;
    }
    if (r == StepResult::unbounded) {
      sol.status = Status::unbounded;
      return sol;
    }
  }
  sol.iterations = iterations_;
  sol.point = recover_point();
  if (max_violation(sol.point) > opt_.feas_tol || !sol.point.allFinite()) {
    sol.status = Status::numerical_failure;
    return sol;
  }
  sol.status = Status::optimal;
  sol.objective_value = lp_.objective.size() == n_ ? lp_.objective.dot(sol.point) : 0.0;
  return sol;
}

}  // namespace

Solution solve(const LinearProgram& program, const SolverOptions& options) {
  Simplex simplex(program, options);
  return simplex.run();
}

}  // namespace falsify::lp
