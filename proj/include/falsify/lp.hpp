#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace falsify {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasTol = 1e-7;
inline constexpr double kObjTol = 1e-6;

enum class Sense { minimize, maximize, feasibility };

enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

// min/max c'z  s.t.  A_ineq z <= b_ineq,  A_eq z == b_eq,  lower <= z <= upper.
// Empty bound vectors mean the variable is free.
struct LinearProgram {
  Sense sense = Sense::minimize;
  Eigen::VectorXd objective;
  Eigen::MatrixXd A_ineq;
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_variables() const;
};

struct Solution {
  Status status = Status::numerical_failure;
  Eigen::VectorXd point;
  double objective_value = 0.0;
  int iterations = 0;

  bool optimal() const { return status == Status::optimal; }
};

struct SolverOptions {
  double feas_tol = kFeasTol;
  double obj_tol = kObjTol;
  // Iteration cap is cap_factor * (variables + constraints).
  int cap_factor = 50;
};

Solution solve(const LinearProgram& program, const SolverOptions& options = {});

// Incremental construction of sparse-ish programs by variable blocks.
class Builder {
 public:
  struct Term {
    int var;
    double coef;
  };

  int add_variables(int count, double lower = -kInf, double upper = kInf);
  int num_variables() const { return static_cast<int>(lower_.size()); }
  void set_bounds(int var, double lower, double upper);

  void add_le(const std::vector<Term>& terms, double rhs);
  void add_eq(const std::vector<Term>& terms, double rhs);

  // rows: sum_k blocks[k].second * z[blocks[k].first : ...] (<= or ==) rhs
  using Block = std::pair<int, Eigen::MatrixXd>;
  void add_le_block(const std::vector<Block>& blocks, const Eigen::VectorXd& rhs);
  void add_eq_block(const std::vector<Block>& blocks, const Eigen::VectorXd& rhs);

  void set_objective(int var, double coef);
  void add_objective(int var, double coef);

  LinearProgram build(Sense sense) const;
  Solution solve(Sense sense, const SolverOptions& options = {}) const;

 private:
  struct Row {
    std::vector<Term> terms;
    double rhs;
  };
  void add_block_rows(std::vector<Row>& into, const std::vector<Block>& blocks,
                      const Eigen::VectorXd& rhs);

  std::vector<double> lower_, upper_;
  std::vector<Row> le_, eq_;
  std::vector<double> objective_;
};

using Block = Builder::Block;

struct ChebyshevBall {
  Eigen::VectorXd center;
  double radius = 0.0;
};

class EmptySetError : public Error {
 public:
  using Error::Error;
};

class UnboundedSetError : public Error {
 public:
  using Error::Error;
};

// Largest inscribed ball of {x | A x <= b}. Lower-dimensional sets are
// handled inside their affine hull, so the point is a relative-interior
// center and the reported radius is 0.
ChebyshevBall chebyshev_center(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Rows of {x | A x <= b} that hold with equality everywhere on the set.
std::vector<int> implicit_equalities(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace lp
}  // namespace falsify
