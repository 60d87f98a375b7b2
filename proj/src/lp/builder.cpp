#include "falsify/lp.hpp"

namespace falsify::lp {

int Builder::add_variables(int count, double lower, double upper) {
  const int first = num_variables();
  lower_.insert(lower_.end(), count, lower);
  upper_.insert(upper_.end(), count, upper);
  objective_.insert(objective_.end(), count, 0.0);
  return first;
}

void Builder::set_bounds(int var, double lower, double upper) {
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

void Builder::add_le(const std::vector<Term>& terms, double rhs) { le_.push_back({terms, rhs}); }

void Builder::add_eq(const std::vector<Term>& terms, double rhs) { eq_.push_back({terms, rhs}); }

void Builder::add_block_rows(std::vector<Row>& into, const std::vector<Block>& blocks,
                             const Eigen::VectorXd& rhs) {
  for (const auto& [offset, M] : blocks) {
    if (M.rows() != rhs.size()) throw Error("lp builder: block row count mismatch");
  }
  for (Eigen::Index r = 0; r < rhs.size(); ++r) {
    Row row{{}, rhs(r)};
    for (const auto& [offset, M] : blocks) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        if (M(r, c) != 0.0) row.terms.push_back({offset + static_cast<int>(c), M(r, c)});
      }
    }
    into.push_back(std::move(row));
  }
}

void Builder::add_le_block(const std::vector<Block>& blocks, const Eigen::VectorXd& rhs) {
  add_block_rows(le_, blocks, rhs);
}

void Builder::add_eq_block(const std::vector<Block>& blocks, const Eigen::VectorXd& rhs) {
  add_block_rows(eq_, blocks, rhs);
}

void Builder::set_objective(int var, double coef) { objective_.at(var) = coef; }

void Builder::add_objective(int var, double coef) { objective_.at(var) += coef; }

LinearProgram Builder::build(Sense sense) const {
  const int n = num_variables();
  LinearProgram lp;
  lp.sense = sense;
  lp.objective = Eigen::Map<const Eigen::VectorXd>(objective_.data(), n);
  lp.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  lp.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  auto fill = [n](const std::vector<Row>& rows, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
    A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n);
    b.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (const Term& t : rows[r].terms) A(static_cast<Eigen::Index>(r), t.var) += t.coef;
      b(static_cast<Eigen::Index>(r)) = rows[r].rhs;
    }
  };
  fill(le_, lp.A_ineq, lp.b_ineq);
  fill(eq_, lp.A_eq, lp.b_eq);
  return lp;
}

Solution Builder::solve(Sense sense, const SolverOptions& options) const {
  return lp::solve(build(sense), options);
}

}  // namespace falsify::lp
