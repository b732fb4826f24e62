#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bceid/constraint_system.hpp"

namespace bceid::lp {

/// Feasibility tolerance used for every status decision and reported with
/// every identified set.
inline constexpr double kFeasibilityTolerance = 1e-8;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { less_equal, equal, greater_equal };
enum class Sense { minimize, maximize, feasibility };
enum class Status { optimal, infeasible, unbounded };

std::string to_string(Status status);

struct Term {
  std::size_t var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Relation relation;
  double rhs;
  std::string label;
};

class LinearProgram {
 public:
  std::size_t add_variable(double lower = 0.0, double upper = kInfinity,
                           std::string name = {});
  /// Adds `count` variables; returns the index of the first.
  std::size_t add_variables(std::size_t count, double lower = 0.0,
                            double upper = kInfinity);

  std::size_t add_row(std::vector<Term> terms, Relation relation, double rhs,
                      std::string label = {});

  /// Sum-to-one row over nonnegative variables.
  std::size_t add_simplex_block(const std::vector<std::size_t>& vars,
                                std::string label = {});

  void set_objective(std::vector<double> coefficients, Sense sense);
  void set_objective_coefficient(std::size_t var, double coef);
  void set_sense(Sense sense) { sense_ = sense; }
  void set_variable_bounds(std::size_t var, double lower, double upper);

  std::size_t num_variables() const { return lower_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<double>& objective() const { return objective_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::vector<std::size_t>>& simplex_blocks() const {
    return blocks_;
  }
  Sense sense() const { return sense_; }
  std::size_t num_nonzeros() const;

  /// Throws DomainError on dangling variable references, inverted bounds or
  /// non-finite coefficients.
  void validate() const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::string> names_;
  std::vector<double> objective_;
  std::vector<Row> rows_;
  std::vector<std::vector<std::size_t>> blocks_;
  Sense sense_ = Sense::feasibility;
};

struct LpSolution {
  Status status = Status::infeasible;
  std::vector<double> primal;
  /// Objective in the caller's sense (0 for feasibility problems).
  double objective = 0.0;
  /// Largest violation of rows and bounds at `primal`, recomputed from the
  /// original data.
  double max_violation = 0.0;
  /// Lagrangian bound on the optimum from the final row duals, in the
  /// caller's sense. Equals `objective` up to the duality gap.
  double dual_bound = 0.0;
  std::vector<double> row_duals;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double feasibility_tolerance = kFeasibilityTolerance;
  /// 0 selects a limit proportional to the problem size.
  std::size_t max_iterations = 0;
  std::size_t refactor_interval = 150;
};

/// Bounded-variable revised simplex over an explicit dense basis inverse.
/// The basis survives changes of bounds, right-hand sides and costs, so a
/// sequence of related problems is re-solved from the previous optimum.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, SolverOptions options = {});

  void set_objective(std::span<const double> coefficients, Sense sense);
  void set_row_bounds(std::size_t row, double lower, double upper);
  void set_variable_bounds(std::size_t var, double lower, double upper);

  LpSolution solve();

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  enum class VarState : unsigned char { basic, at_lower, at_upper, at_zero };

  void crash_basis();
  void reinvert();
  void place_nonbasic(std::size_t j);
  void recompute_basics();
  double column_dot(std::size_t j, const Eigen::VectorXd& y) const;
  void column_into(std::size_t j, Eigen::VectorXd& out) const;
  double max_primal_infeasibility() const;
  void perturb_costs();
  bool dual_iterate(bool& done);
  bool iterate(bool& phase_one, bool& done, Status& status);
  LpSolution extract(Status status) const;

  SolverOptions options_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  Sense sense_ = Sense::feasibility;

  std::vector<std::size_t> col_start_;
  std::vector<std::size_t> col_row_;
  std::vector<double> col_val_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> row_col_;
  std::vector<double> row_val_;
  std::vector<double> col_weight_;

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> cost_;
  std::vector<double> x_;
  std::vector<VarState> state_;
  std::vector<std::size_t> head_;

  Eigen::MatrixXd binv_;
  bool factored_ = false;
  std::size_t updates_since_refactor_ = 0;
  std::size_t degenerate_run_ = 0;
  bool bland_ = false;
  bool force_bland_ = false;
  bool shifted_ = false;
  bool allow_shift_ = true;
  std::size_t iterations_ = 0;

  Eigen::VectorXd y_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd work_;
};

LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {});

/// Writes the program in the CPLEX "LP file" text format.
void write_lp_format(const LinearProgram& lp, std::ostream& out);

/// Result of min_x max_j F_j(x).
struct MinimaxResult {
  double value = 0.0;
  std::vector<double> point;
  std::size_t iterations = 0;
};

/// Epigraph LP min t s.t. F_j(x) <= t, kept warm across changes of the form
/// constants (the only place a pinned parameter enters).
class MinimaxSolver {
 public:
  explicit MinimaxSolver(const ConstraintSystem& system,
                         SolverOptions options = {});

  void set_constant(std::size_t form, double constant);
  MinimaxResult solve();

  const ConstraintSystem& system() const { return system_; }

 private:
  void refresh_floor();

  ConstraintSystem system_;
  std::vector<std::ptrdiff_t> form_row_;
  std::size_t t_var_ = 0;
  LinearProgram lp_;
  SimplexSolver solver_;
};

/// min_x max_j F_j(x) over the blocks and equalities of `system`; this is
/// the smallest uniform tolerance that makes the system feasible.
MinimaxResult minimax_value(const ConstraintSystem& system);

/// The system as an LP with every relaxable form required to be <= tolerance.
LinearProgram to_linear_program(const ConstraintSystem& system,
                                double tolerance);

}  // namespace bceid::lp
