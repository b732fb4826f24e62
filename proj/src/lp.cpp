#include "bceid/lp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bceid/error.hpp"

namespace bceid::lp {
namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr std::size_t kDegenerateLimit = 50;
constexpr double kPerturbation = 1e-7;
constexpr std::size_t kStallWindow = 200;
constexpr std::size_t kMaxRestores = 3;
constexpr double kCrashTol = 1e-12;
constexpr std::size_t kDualCleanupLimit = 5000;

bool finite(double x) { return std::isfinite(x); }

}  // namespace

std::string to_string(Status status) {
  switch (status) {
    case Status::optimal:
      return "optimal";
    case Status::infeasible:
      return "infeasible";
    case Status::unbounded:
      return "unbounded";
  }
  return "unknown";
}

std::size_t LinearProgram::add_variable(double lower, double upper,
                                        std::string name) {
  if (std::isnan(lower) || std::isnan(upper) || lower > upper ||
      lower == kInfinity || upper == -kInfinity) {
    throw DomainError("invalid variable bounds");
  }
  lower_.push_back(lower);
  upper_.push_back(upper);
  names_.push_back(std::move(name));
  objective_.push_back(0.0);
  return lower_.size() - 1;
}

std::size_t LinearProgram::add_variables(std::size_t count, double lower,
                                         double upper) {
  const std::size_t first = lower_.size();
  for (std::size_t k = 0; k < count; ++k) add_variable(lower, upper);
  return first;
}

std::size_t LinearProgram::add_row(std::vector<Term> terms, Relation relation,
                                   double rhs, std::string label) {
  if (!finite(rhs)) throw DomainError("row right-hand side is not finite");
  for (const auto& t : terms) {
    if (!finite(t.coef)) throw DomainError("row coefficient is not finite");
  }
  rows_.push_back(Row{std::move(terms), relation, rhs, std::move(label)});
  return rows_.size() - 1;
}

std::size_t LinearProgram::add_simplex_block(
    const std::vector<std::size_t>& vars, std::string label) {
  if (vars.empty()) throw DomainError("simplex block is empty");
  std::vector<Term> terms;
  terms.reserve(vars.size());
  for (auto j : vars) {
    if (j >= lower_.size()) throw DomainError("simplex block variable missing");
    lower_[j] = std::max(lower_[j], 0.0);
    terms.push_back({j, 1.0});
  }
  blocks_.push_back(vars);
  return add_row(std::move(terms), Relation::equal, 1.0, std::move(label));
}

void LinearProgram::set_objective(std::vector<double> coefficients,
                                  Sense sense) {
  if (coefficients.size() != lower_.size()) {
    throw DomainError("objective length does not match the variable count");
  }
  for (double c : coefficients) {
    if (!finite(c)) throw DomainError("objective coefficient is not finite");
  }
  objective_ = std::move(coefficients);
  sense_ = sense;
}

void LinearProgram::set_variable_bounds(std::size_t var, double lower,
                                        double upper) {
  if (var >= lower_.size()) throw DomainError("variable index out of range");
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
    throw DomainError("invalid variable bounds");
  }
  lower_[var] = lower;
  upper_[var] = upper;
}

void LinearProgram::set_objective_coefficient(std::size_t var, double coef) {
  if (var >= objective_.size()) throw DomainError("objective variable missing");
  if (!finite(coef)) throw DomainError("objective coefficient is not finite");
  objective_[var] = coef;
}

std::size_t LinearProgram::num_nonzeros() const {
  std::size_t total = 0;
  for (const auto& r : rows_) total += r.terms.size();
  return total;
}

void LinearProgram::validate() const {
  for (const auto& r : rows_) {
    for (const auto& t : r.terms) {
      if (t.var >= lower_.size()) {
        throw DomainError("row '" + r.label + "' references a missing variable");
      }
    }
  }
}

SimplexSolver::SimplexSolver(const LinearProgram& lp, SolverOptions options)
    : options_(options), m_(lp.num_rows()), n_(lp.num_variables()) {
  lp.validate();
  struct Entry {
    std::size_t col;
    std::size_t row;
    double val;
  };
  std::vector<Entry> entries;
  entries.reserve(lp.num_nonzeros());
  for (std::size_t r = 0; r < m_; ++r) {
    for (const auto& t : lp.rows()[r].terms) entries.push_back({t.var, r, t.coef});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  std::vector<Entry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().col == e.col && merged.back().row == e.row) {
      merged.back().val += e.val;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const Entry& e) { return e.val == 0.0; });

  col_start_.assign(n_ + 1, 0);
  for (const auto& e : merged) ++col_start_[e.col + 1];
  std::partial_sum(col_start_.begin(), col_start_.end(), col_start_.begin());
  col_row_.resize(merged.size());
  col_val_.resize(merged.size());
  row_start_.assign(m_ + 1, 0);
  for (const auto& e : merged) ++row_start_[e.row + 1];
  std::partial_sum(row_start_.begin(), row_start_.end(), row_start_.begin());
  row_col_.resize(merged.size());
  row_val_.resize(merged.size());
  std::vector<std::size_t> row_fill(row_start_.begin(), row_start_.end() - 1);
  for (std::size_t k = 0; k < merged.size(); ++k) {
    col_row_[k] = merged[k].row;
    col_val_[k] = merged[k].val;
    const std::size_t slot = row_fill[merged[k].row]++;
    row_col_[slot] = merged[k].col;
    row_val_[slot] = merged[k].val;
  }
  col_weight_.assign(n_ + m_, 2.0);
  for (std::size_t j = 0; j < n_; ++j) {
    double w = 1.0;
    for (std::size_t k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      w += col_val_[k] * col_val_[k];
    }
    col_weight_[j] = w;
  }

  lower_.resize(n_ + m_);
  upper_.resize(n_ + m_);
  for (std::size_t j = 0; j < n_; ++j) {
    lower_[j] = lp.lower()[j];
    upper_[j] = lp.upper()[j];
  }
  for (std::size_t r = 0; r < m_; ++r) {
    const auto& row = lp.rows()[r];
    switch (row.relation) {
      case Relation::less_equal:
        lower_[n_ + r] = -kInfinity;
        upper_[n_ + r] = row.rhs;
        break;
      case Relation::greater_equal:
        lower_[n_ + r] = row.rhs;
        upper_[n_ + r] = kInfinity;
        break;
      case Relation::equal:
        lower_[n_ + r] = row.rhs;
        upper_[n_ + r] = row.rhs;
        break;
    }
  }
  cost_.assign(n_ + m_, 0.0);
  set_objective(lp.objective(), lp.sense());
  x_.assign(n_ + m_, 0.0);
  state_.assign(n_ + m_, VarState::at_lower);
  head_.resize(m_);
  if (options_.max_iterations == 0) {
    options_.max_iterations = 50 * (n_ + m_) + 10000;
  }
}

void SimplexSolver::set_objective(std::span<const double> coefficients,
                                  Sense sense) {
  if (coefficients.size() != n_) {
    throw DomainError("objective length does not match the variable count");
  }
  sense_ = sense;
  const double sign = sense == Sense::maximize ? -1.0 : 1.0;
  for (std::size_t j = 0; j < n_; ++j) {
    if (!finite(coefficients[j])) {
      throw DomainError("objective coefficient is not finite");
    }
    cost_[j] = sense == Sense::feasibility ? 0.0 : sign * coefficients[j];
  }
}

void SimplexSolver::set_row_bounds(std::size_t row, double lower, double upper) {
  if (row >= m_) throw DomainError("row index out of range");
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
    throw DomainError("invalid row bounds");
  }
  lower_[n_ + row] = lower;
  upper_[n_ + row] = upper;
}

void SimplexSolver::set_variable_bounds(std::size_t var, double lower,
                                        double upper) {
  if (var >= n_) throw DomainError("variable index out of range");
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
    throw DomainError("invalid variable bounds");
  }
  lower_[var] = lower;
  upper_[var] = upper;
}

void SimplexSolver::place_nonbasic(std::size_t j) {
  if (state_[j] == VarState::basic) return;
  if (state_[j] == VarState::at_upper && finite(upper_[j])) {
    x_[j] = upper_[j];
  } else if (finite(lower_[j])) {
    state_[j] = VarState::at_lower;
    x_[j] = lower_[j];
  } else if (finite(upper_[j])) {
    state_[j] = VarState::at_upper;
    x_[j] = upper_[j];
  } else {
    state_[j] = VarState::at_zero;
    x_[j] = 0.0;
  }
}

void SimplexSolver::crash_basis() {
  for (std::size_t j = 0; j < n_; ++j) {
    state_[j] = VarState::at_lower;
    place_nonbasic(j);
  }
  for (std::size_t r = 0; r < m_; ++r) {
    head_[r] = n_ + r;
    state_[n_ + r] = VarState::basic;
  }
  // Lower-triangular crash: each equality row takes a structural column that
  // has no entries in rows crashed before it, preferring the column whose
  // implied value adds the least violation of the inequality rows.
  std::vector<char> crashed(m_, 0);
  std::vector<double> activity(m_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (x_[j] == 0.0) continue;
    for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
      activity[col_row_[c]] += col_val_[c] * x_[j];
    }
  }
  auto violation = [&](std::size_t row, double a) {
    return std::max(0.0, lower_[n_ + row] - a) + std::max(0.0, a - upper_[n_ + row]);
  };
  for (std::size_t r = 0; r < m_; ++r) {
    if (lower_[n_ + r] != upper_[n_ + r]) continue;
    double row_max = 0.0;
    for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) {
      row_max = std::max(row_max, std::abs(row_val_[k]));
    }
    std::size_t pick = n_;
    double pick_value = 0.0;
    double best = std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) {
      const std::size_t j = row_col_[k];
      if (state_[j] == VarState::basic || lower_[j] == upper_[j]) continue;
      if (std::abs(row_val_[k]) < 0.1 * row_max) continue;
      bool clean = true;
      for (std::size_t c = col_start_[j]; c < col_start_[j + 1] && clean; ++c) {
        clean = !crashed[col_row_[c]];
      }
      if (!clean) continue;
      const double value = x_[j] + (lower_[n_ + r] - activity[r]) / row_val_[k];
      double added = std::max(0.0, lower_[j] - value) + std::max(0.0, value - upper_[j]);
      const double step = value - x_[j];
      for (std::size_t c = col_start_[j]; c < col_start_[j + 1] && added <= best + kCrashTol; ++c) {
        const std::size_t row = col_row_[c];
        if (lower_[n_ + row] == upper_[n_ + row]) continue;
        const double a = activity[row];
        added += violation(row, a + step * col_val_[c]) - violation(row, a);
      }
      const double gain = cost_[j] * (value - x_[j]);
      if (added < best - kCrashTol || (added <= best + kCrashTol && gain < best_gain)) {
        best = added;
        best_gain = gain;
        pick = j;
        pick_value = value;
      }
    }
    if (pick == n_) continue;
    const double step = pick_value - x_[pick];
    for (std::size_t c = col_start_[pick]; c < col_start_[pick + 1]; ++c) {
      activity[col_row_[c]] += step * col_val_[c];
    }
    head_[r] = pick;
    state_[pick] = VarState::basic;
    x_[pick] = pick_value;
    state_[n_ + r] = VarState::at_lower;
    x_[n_ + r] = lower_[n_ + r];
    crashed[r] = 1;
  }
}

void SimplexSolver::reinvert() {
  // With logical columns -e_r, the basis is block triangular:
  //   B = [A11 0; A21 -I],  B^-1 = [A11^-1 0; A21 A11^-1 -I]
  // where the rows of A11 are those whose logical is nonbasic.
  for (int attempt = 0; attempt < 3; ++attempt) {
    std::vector<std::size_t> structural_pos;
    std::vector<std::ptrdiff_t> logical_slot(m_, -1);
    std::vector<std::size_t> logical_rows;
    for (std::size_t p = 0; p < m_; ++p) {
      if (head_[p] < n_) {
        structural_pos.push_back(p);
      } else {
        const std::size_t r = head_[p] - n_;
        logical_slot[r] = static_cast<std::ptrdiff_t>(logical_rows.size());
        logical_rows.push_back(r);
      }
    }
    std::vector<std::size_t> open_rows;
    std::vector<std::ptrdiff_t> open_slot(m_, -1);
    for (std::size_t r = 0; r < m_; ++r) {
      if (logical_slot[r] < 0) {
        open_slot[r] = static_cast<std::ptrdiff_t>(open_rows.size());
        open_rows.push_back(r);
      }
    }
    const std::size_t k = structural_pos.size();
    if (open_rows.size() != k) throw SolverError("basis has an invalid shape");

    Eigen::MatrixXd a11 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                static_cast<Eigen::Index>(k));
    Eigen::MatrixXd a21 = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(logical_rows.size()), static_cast<Eigen::Index>(k));
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t j = head_[structural_pos[s]];
      for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
        const std::size_t r = col_row_[c];
        const auto si = static_cast<Eigen::Index>(s);
        if (open_slot[r] >= 0) {
          a11(open_slot[r], si) = col_val_[c];
        } else {
          a21(logical_slot[r], si) = col_val_[c];
        }
      }
    }

    Eigen::MatrixXd inv11;
    bool singular = false;
    if (k > 0) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(a11);
      const auto diag = lu.matrixLU().diagonal().cwiseAbs();
      singular = diag.minCoeff() <= 1e-11 * std::max(1.0, diag.maxCoeff());
      if (!singular) inv11 = lu.inverse();
    }
    if (singular) {
      // Keep a maximal independent set of structural columns and give the
      // uncovered rows back to their logicals.
      Eigen::FullPivLU<Eigen::MatrixXd> full(a11);
      full.setThreshold(1e-10);
      const auto rank = full.rank();
      std::vector<std::size_t> keep_cols;
      for (Eigen::Index i = 0; i < rank; ++i) {
        keep_cols.push_back(
            static_cast<std::size_t>(full.permutationQ().indices()(i)));
      }
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(k), rank);
      for (Eigen::Index i = 0; i < rank; ++i) {
        sub.col(i) = a11.col(static_cast<Eigen::Index>(keep_cols[static_cast<std::size_t>(i)]));
      }
      Eigen::FullPivLU<Eigen::MatrixXd> rows_lu(sub.transpose());
      rows_lu.setThreshold(1e-10);
      std::vector<char> row_kept(k, 0);
      for (Eigen::Index i = 0; i < rows_lu.rank(); ++i) {
        row_kept[static_cast<std::size_t>(rows_lu.permutationQ().indices()(i))] = 1;
      }
      std::vector<char> col_kept(k, 0);
      for (auto c : keep_cols) col_kept[c] = 1;
      std::vector<std::size_t> freed_rows;
      for (std::size_t i = 0; i < k; ++i) {
        if (!row_kept[i]) freed_rows.push_back(open_rows[i]);
      }
      std::size_t next = 0;
      for (std::size_t s = 0; s < k; ++s) {
        if (col_kept[s]) continue;
        if (next >= freed_rows.size()) throw SolverError("basis repair failed");
        const std::size_t p = structural_pos[s];
        const std::size_t j = head_[p];
        state_[j] = x_[j] >= upper_[j] ? VarState::at_upper : VarState::at_lower;
        place_nonbasic(j);
        const std::size_t logical = n_ + freed_rows[next++];
        head_[p] = logical;
        state_[logical] = VarState::basic;
      }
      continue;
    }

    binv_.setZero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t s = 0; s < k; ++s) {
      const auto p = static_cast<Eigen::Index>(structural_pos[s]);
      for (std::size_t c = 0; c < k; ++c) {
        binv_(p, static_cast<Eigen::Index>(open_rows[c])) =
            inv11(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c));
      }
    }
    Eigen::MatrixXd mixed;
    if (k > 0 && !logical_rows.empty()) mixed = a21 * inv11;
    for (std::size_t p = 0; p < m_; ++p) {
      if (head_[p] < n_) continue;
      const std::size_t r = head_[p] - n_;
      const auto pi = static_cast<Eigen::Index>(p);
      if (k > 0) {
        const auto l = logical_slot[r];
        for (std::size_t c = 0; c < k; ++c) {
          binv_(pi, static_cast<Eigen::Index>(open_rows[c])) =
              mixed(l, static_cast<Eigen::Index>(c));
        }
      }
      binv_(pi, static_cast<Eigen::Index>(r)) = -1.0;
    }
    updates_since_refactor_ = 0;
    return;
  }
  throw SolverError("basis matrix is singular");
}

void SimplexSolver::recompute_basics() {
  work_.setZero(static_cast<Eigen::Index>(m_));
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    if (state_[j] == VarState::basic || x_[j] == 0.0) continue;
    if (j < n_) {
      for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
        work_(static_cast<Eigen::Index>(col_row_[c])) -= col_val_[c] * x_[j];
      }
    } else {
      work_(static_cast<Eigen::Index>(j - n_)) += x_[j];
    }
  }
  if (m_ == 0) return;
  Eigen::VectorXd xb = binv_ * work_;
  for (std::size_t p = 0; p < m_; ++p) {
    x_[head_[p]] = xb(static_cast<Eigen::Index>(p));
  }
}

double SimplexSolver::column_dot(std::size_t j, const Eigen::VectorXd& y) const {
  if (j >= n_) return -y(static_cast<Eigen::Index>(j - n_));
  double total = 0.0;
  for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
    total += col_val_[c] * y(static_cast<Eigen::Index>(col_row_[c]));
  }
  return total;
}

void SimplexSolver::column_into(std::size_t j, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(m_));
  if (j >= n_) {
    out = -binv_.col(static_cast<Eigen::Index>(j - n_));
    return;
  }
  for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
    out.noalias() += col_val_[c] * binv_.col(static_cast<Eigen::Index>(col_row_[c]));
  }
}

double SimplexSolver::max_primal_infeasibility() const {
  double worst = 0.0;
  for (std::size_t p = 0; p < m_; ++p) {
    const std::size_t j = head_[p];
    worst = std::max({worst, lower_[j] - x_[j], x_[j] - upper_[j]});
  }
  return worst;
}

bool SimplexSolver::iterate(bool& phase_one, bool& done, Status& status) {
  const double ptol = options_.feasibility_tolerance;
  const auto mi = static_cast<Eigen::Index>(m_);
  Eigen::VectorXd cb = Eigen::VectorXd::Zero(mi);
  phase_one = false;
  for (std::size_t p = 0; p < m_; ++p) {
    const std::size_t j = head_[p];
    if (x_[j] < lower_[j] - ptol) {
      cb(static_cast<Eigen::Index>(p)) = -1.0;
      phase_one = true;
    } else if (x_[j] > upper_[j] + ptol) {
      cb(static_cast<Eigen::Index>(p)) = 1.0;
      phase_one = true;
    }
  }
  if (!phase_one) {
    for (std::size_t p = 0; p < m_; ++p) cb(static_cast<Eigen::Index>(p)) = cost_[head_[p]];
  }
  std::size_t nz = 0;
  for (Eigen::Index p = 0; p < mi; ++p) nz += cb(p) != 0.0;
  y_.setZero(mi);
  if (nz * 8 > m_) {
    y_.noalias() = binv_.transpose() * cb;
  } else {
    for (Eigen::Index p = 0; p < mi; ++p) {
      if (cb(p) != 0.0) y_.noalias() += cb(p) * binv_.row(p).transpose();
    }
  }

  // Pricing.
  std::size_t q = n_ + m_;
  double dq = 0.0;
  double best = 0.0;
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    const VarState s = state_[j];
    if (s == VarState::basic || lower_[j] == upper_[j]) continue;
    const double c = phase_one ? 0.0 : cost_[j];
    const double d = c - column_dot(j, y_);
    bool eligible = false;
    if (s == VarState::at_lower) {
      eligible = d < -kDualTol;
    } else if (s == VarState::at_upper) {
      eligible = d > kDualTol;
    } else {
      eligible = std::abs(d) > kDualTol;
    }
    if (!eligible) continue;
    if (bland_) {
      q = j;
      dq = d;
      break;
    }
    const double score = d * d / col_weight_[j];
    if (score > best) {
      best = score;
      q = j;
      dq = d;
    }
  }
  if (q == n_ + m_) {
    done = true;
    status = phase_one ? Status::infeasible : Status::optimal;
    return false;
  }
  const double dir = dq < 0.0 ? 1.0 : -1.0;
  column_into(q, alpha_);
  const double flip = (finite(lower_[q]) && finite(upper_[q]))
                          ? upper_[q] - lower_[q]
                          : kInfinity;

  std::ptrdiff_t leave = -1;
  double target = 0.0;
  double theta = kInfinity;

  if (phase_one) {
    struct Breakpoint {
      double t;
      std::size_t p;
      double slope;
      double target;
    };
    std::vector<Breakpoint> bps;
    for (std::size_t p = 0; p < m_; ++p) {
      const double a = alpha_(static_cast<Eigen::Index>(p));
      if (std::abs(a) < kPivotTol) continue;
      const double rate = -dir * a;
      const std::size_t j = head_[p];
      const double x = x_[j];
      const double lo = lower_[j];
      const double hi = upper_[j];
      if (rate > 0.0) {
        if (x < lo - ptol) {
          bps.push_back({(lo - x) / rate, p, rate, lo});
          if (finite(hi)) bps.push_back({(hi - x) / rate, p, rate, hi});
        } else if (x <= hi + ptol && finite(hi)) {
          bps.push_back({std::max(0.0, (hi - x) / rate), p, rate, hi});
        }
      } else {
        const double r = -rate;
        if (x > hi + ptol) {
          bps.push_back({(x - hi) / r, p, r, hi});
          if (finite(lo)) bps.push_back({(x - lo) / r, p, r, lo});
        } else if (x >= lo - ptol && finite(lo)) {
          bps.push_back({std::max(0.0, (x - lo) / r), p, r, lo});
        }
      }
    }
    std::sort(bps.begin(), bps.end(),
              [](const Breakpoint& a, const Breakpoint& b) { return a.t < b.t; });
    double slope = -std::abs(dq);
    std::ptrdiff_t stop = -1;
    for (std::size_t b = 0; b < bps.size(); ++b) {
      if (bps[b].t >= flip) break;
      slope += bps[b].slope;
      if (slope >= -kDualTol) {
        stop = static_cast<std::ptrdiff_t>(b);
        break;
      }
    }
    if (stop < 0 && !finite(flip) && !bps.empty()) {
      stop = static_cast<std::ptrdiff_t>(bps.size()) - 1;
    }
    if (stop >= 0) {
      const double t_stop = bps[static_cast<std::size_t>(stop)].t;
      std::size_t pick = static_cast<std::size_t>(stop);
      double best_abs = 0.0;
      for (std::size_t b = 0; b < bps.size(); ++b) {
        if (bps[b].t > t_stop + ptol / bps[b].slope) break;
        const double a = std::abs(alpha_(static_cast<Eigen::Index>(bps[b].p)));
        if (a > best_abs * (1.0 + 1e-12)) {
          best_abs = a;
          pick = b;
        }
      }
      if (bland_) pick = static_cast<std::size_t>(stop);
      theta = bps[pick].t;
      leave = static_cast<std::ptrdiff_t>(bps[pick].p);
      target = bps[pick].target;
    } else if (finite(flip)) {
      theta = flip;
    } else {
      throw SolverError("phase one ratio test found no breakpoint");
    }
  } else {
    double theta_max = kInfinity;
    for (std::size_t p = 0; p < m_; ++p) {
      const double a = alpha_(static_cast<Eigen::Index>(p));
      if (std::abs(a) < kPivotTol) continue;
      const double rate = -dir * a;
      const std::size_t j = head_[p];
      if (rate > 0.0 && finite(upper_[j])) {
        theta_max = std::min(theta_max, (upper_[j] + ptol - x_[j]) / rate);
      } else if (rate < 0.0 && finite(lower_[j])) {
        theta_max = std::min(theta_max, (x_[j] - lower_[j] + ptol) / -rate);
      }
    }
    if (!finite(theta_max) && !finite(flip)) {
      done = true;
      status = Status::unbounded;
      return false;
    }
    if (flip <= theta_max) {
      theta = flip;
    } else {
      double best_abs = 0.0;
      double best_ratio = kInfinity;
      for (std::size_t p = 0; p < m_; ++p) {
        const double a = alpha_(static_cast<Eigen::Index>(p));
        if (std::abs(a) < kPivotTol) continue;
        const double rate = -dir * a;
        const std::size_t j = head_[p];
        double ratio = kInfinity;
        double bound = 0.0;
        if (rate > 0.0 && finite(upper_[j])) {
          ratio = (upper_[j] - x_[j]) / rate;
          bound = upper_[j];
        } else if (rate < 0.0 && finite(lower_[j])) {
          ratio = (x_[j] - lower_[j]) / -rate;
          bound = lower_[j];
        } else {
          continue;
        }
        bool take = false;
        if (bland_) {
          take = ratio < best_ratio - 1e-12 ||
                 (ratio <= best_ratio + 1e-12 && leave >= 0 &&
                  j < head_[static_cast<std::size_t>(leave)]);
        } else {
          take = ratio <= theta_max && std::abs(a) > best_abs;
        }
        if (take) {
          best_abs = std::abs(a);
          best_ratio = std::min(best_ratio, ratio);
          leave = static_cast<std::ptrdiff_t>(p);
          target = bound;
          theta = std::max(0.0, ratio);
        }
      }
      if (leave < 0) throw SolverError("ratio test found no leaving variable");
      if (bland_ && flip <= theta) {
        leave = -1;
        theta = flip;
      }
    }
  }

  if (theta <= 1e-12) {
    if (++degenerate_run_ > kDegenerateLimit) bland_ = true;
  } else {
    degenerate_run_ = 0;
    bland_ = force_bland_;
  }

  if (theta > 0.0) {
    x_[q] += dir * theta;
    for (std::size_t p = 0; p < m_; ++p) {
      const double a = alpha_(static_cast<Eigen::Index>(p));
      if (a != 0.0) x_[head_[p]] -= dir * theta * a;
    }
  }
  ++iterations_;
  if (leave < 0) {
    state_[q] = dir > 0.0 ? VarState::at_upper : VarState::at_lower;
    x_[q] = dir > 0.0 ? upper_[q] : lower_[q];
    return true;
  }
  const auto p = static_cast<std::size_t>(leave);
  const auto pi = static_cast<Eigen::Index>(p);
  const std::size_t out = head_[p];
  const bool to_upper = target == upper_[out] && lower_[out] != upper_[out];
  const double drift = x_[out] - target;
  if (allow_shift_ && drift != 0.0 && std::abs(drift) <= 10.0 * ptol) {
    // Move the bound to the computed value instead of snapping the variable.
    if (to_upper) {
      upper_[out] = x_[out];
      lower_[out] = std::min(lower_[out], x_[out]);
    } else {
      lower_[out] = x_[out];
      upper_[out] = std::max(upper_[out], x_[out]);
    }
    shifted_ = true;
  } else {
    x_[out] = target;
  }
  state_[out] = to_upper ? VarState::at_upper : VarState::at_lower;
  head_[p] = q;
  state_[q] = VarState::basic;

  Eigen::RowVectorXd pivot_row = binv_.row(pi) / alpha_(pi);
  alpha_(pi) -= 1.0;
  binv_.noalias() -= alpha_ * pivot_row;
  ++updates_since_refactor_;
  return true;
}

void SimplexSolver::perturb_costs() {
  const auto mi = static_cast<Eigen::Index>(m_);
  Eigen::VectorXd cb(mi);
  for (std::size_t p = 0; p < m_; ++p) cb(static_cast<Eigen::Index>(p)) = cost_[head_[p]];
  y_.noalias() = binv_.transpose() * cb;
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    const VarState st = state_[j];
    if (st == VarState::basic || st == VarState::at_zero || lower_[j] == upper_[j]) continue;
    const double d = cost_[j] - column_dot(j, y_);
    const double xi = kPerturbation *
                      (1.0 + static_cast<double>((j * 2246822519u) % 1024) / 1024.0) *
                      (1.0 + std::abs(cost_[j]));
    if (st == VarState::at_lower) {
      cost_[j] += xi + std::max(0.0, -d);
    } else {
      cost_[j] -= xi + std::max(0.0, d);
    }
  }
}

bool SimplexSolver::dual_iterate(bool& done) {
  const double ptol = options_.feasibility_tolerance;
  const auto mi = static_cast<Eigen::Index>(m_);
  done = false;
  std::ptrdiff_t leave = -1;
  double worst = ptol;
  double target = 0.0;
  for (std::size_t p = 0; p < m_; ++p) {
    const std::size_t j = head_[p];
    if (lower_[j] - x_[j] > worst) {
      worst = lower_[j] - x_[j];
      leave = static_cast<std::ptrdiff_t>(p);
      target = lower_[j];
    } else if (x_[j] - upper_[j] > worst) {
      worst = x_[j] - upper_[j];
      leave = static_cast<std::ptrdiff_t>(p);
      target = upper_[j];
    }
  }
  if (leave < 0) {
    done = true;
    return true;
  }
  const auto pl = static_cast<std::size_t>(leave);
  const std::size_t out = head_[pl];
  const bool increase = x_[out] < target;

  Eigen::VectorXd cb(mi);
  for (std::size_t p = 0; p < m_; ++p) cb(static_cast<Eigen::Index>(p)) = cost_[head_[p]];
  y_.noalias() = binv_.transpose() * cb;
  work_ = binv_.row(leave).transpose();

  // Harris two-pass dual ratio test.
  struct Candidate {
    std::size_t j;
    double d;
    double a;
  };
  std::vector<Candidate> cands;
  double bound = kInfinity;
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    const VarState st = state_[j];
    if (st == VarState::basic || lower_[j] == upper_[j]) continue;
    const double a = column_dot(j, work_);
    if (std::abs(a) < kPivotTol) continue;
    // Basic value moves by -a per unit increase of x_j.
    const bool up_ok = st != VarState::at_upper;
    const bool down_ok = st != VarState::at_lower;
    const bool moves_up = increase ? a < 0.0 : a > 0.0;
    if (moves_up ? !up_ok : !down_ok) continue;
    const double d = cost_[j] - column_dot(j, y_);
    const double slack = moves_up ? d : -d;
    cands.push_back({j, slack, a});
    bound = std::min(bound, (std::max(slack, 0.0) + kDualTol) / std::abs(a));
  }
  if (cands.empty()) return false;
  std::size_t q = n_ + m_;
  double best_abs = 0.0;
  for (const auto& c : cands) {
    if (std::max(c.d, 0.0) / std::abs(c.a) <= bound && std::abs(c.a) > best_abs) {
      best_abs = std::abs(c.a);
      q = c.j;
    }
  }
  if (q == n_ + m_) return false;

  column_into(q, alpha_);
  const double a_pivot = alpha_(leave);
  if (std::abs(a_pivot) < kPivotTol) return false;
  const double t = (x_[out] - target) / a_pivot;
  x_[q] += t;
  for (std::size_t p = 0; p < m_; ++p) {
    const double a = alpha_(static_cast<Eigen::Index>(p));
    if (a != 0.0) x_[head_[p]] -= t * a;
  }
  ++iterations_;
  x_[out] = target;
  state_[out] = target == upper_[out] && lower_[out] != upper_[out] ? VarState::at_upper
                                                                    : VarState::at_lower;
  head_[pl] = q;
  state_[q] = VarState::basic;
  Eigen::RowVectorXd pivot_row = binv_.row(leave) / a_pivot;
  alpha_(leave) -= 1.0;
  binv_.noalias() -= alpha_ * pivot_row;
  ++updates_since_refactor_;
  return true;
}

LpSolution SimplexSolver::solve() {
  if (!factored_) {
    crash_basis();
    reinvert();
    factored_ = true;
  } else {
    for (std::size_t j = 0; j < n_ + m_; ++j) place_nonbasic(j);
  }
  recompute_basics();
  bland_ = false;
  force_bland_ = false;
  shifted_ = false;
  allow_shift_ = true;
  degenerate_run_ = 0;
  const std::size_t start = iterations_;
  Status status = Status::optimal;
  // Bounds may be shifted to absorb round-off or widened on stalling; the
  // originals are restored once the modified problem is solved and the
  // remaining iterations clean up.
  const std::vector<double> saved_lower = lower_;
  const std::vector<double> saved_upper = upper_;
  auto restore = [&] {
    lower_ = saved_lower;
    upper_ = saved_upper;
    shifted_ = false;
  };
  bool perturbed = false;
  bool perturb_used = false;
  std::size_t restores = 0;
  double last_measure = std::numeric_limits<double>::infinity();
  bool last_phase_one = true;
  std::size_t next_check = start + kStallWindow;
  double scale = kPerturbation;
  auto perturb = [&] {
    perturb_used = true;
    perturbed = true;
    for (std::size_t p = 0; p < m_; ++p) {
      const std::size_t j = head_[p];
      const double xi =
          scale * (1.0 + static_cast<double>((j * 2654435761u) % 1024) / 1024.0);
      if (finite(lower_[j])) lower_[j] -= xi * (1.0 + std::abs(lower_[j]));
      if (finite(upper_[j])) upper_[j] += xi * (1.0 + std::abs(upper_[j]));
    }
    bland_ = false;
    degenerate_run_ = 0;
  };
  while (true) {
    bool phase_one = false;
    bool done = false;
    iterate(phase_one, done, status);
    if (!done && bland_ && !perturb_used) perturb();
    if (!done && iterations_ >= next_check) {
      next_check = iterations_ + kStallWindow;
      double measure = 0.0;
      if (phase_one) {
        for (std::size_t p = 0; p < m_; ++p) {
          const std::size_t j = head_[p];
          measure += std::max(0.0, lower_[j] - x_[j]) + std::max(0.0, x_[j] - upper_[j]);
        }
      } else {
        for (std::size_t j = 0; j < n_; ++j) measure += cost_[j] * x_[j];
      }
      const bool stalled = phase_one == last_phase_one &&
                           measure > last_measure - 1e-9 * (1.0 + std::abs(last_measure));
      last_measure = measure;
      last_phase_one = phase_one;
      if (stalled) {
        if (!perturb_used) {
          perturb();
        } else {
          force_bland_ = true;
          bland_ = true;
        }
      }
    }
    if (done) {
      if (perturbed || shifted_) {
        restore();
        if (perturbed && scale > kPerturbation * 1e-4) {
          perturb_used = false;
          scale *= 0.01;
        }
        perturbed = false;
        if (++restores >= kMaxRestores) allow_shift_ = false;
        for (std::size_t j = 0; j < n_ + m_; ++j) place_nonbasic(j);
        recompute_basics();
        if (max_primal_infeasibility() > options_.feasibility_tolerance) {
          reinvert();
          recompute_basics();
          // The basis is still dual feasible; dual steps on randomly perturbed
          // costs restore primal feasibility before primal iterations resume.
          const std::vector<double> saved_cost = cost_;
          perturb_costs();
          for (std::size_t k = 0; k < kDualCleanupLimit; ++k) {
            bool clean = false;
            if (!dual_iterate(clean) || clean) break;
            if (updates_since_refactor_ >= options_.refactor_interval) {
              reinvert();
              recompute_basics();
            }
          }
          cost_ = saved_cost;
        }
        bland_ = force_bland_;
        degenerate_run_ = 0;
        continue;
      }
      if (updates_since_refactor_ == 0) break;
      reinvert();
      recompute_basics();
      continue;
    }
    if (updates_since_refactor_ >= options_.refactor_interval) {
      reinvert();
      recompute_basics();
    }
    if (iterations_ - start > options_.max_iterations) {
      restore();
      throw SolverError("simplex iteration limit reached");
    }
  }
  LpSolution sol = extract(status);
  sol.iterations = iterations_ - start;
  return sol;
}

LpSolution SimplexSolver::extract(Status status) const {
  LpSolution sol;
  sol.status = status;
  sol.primal.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));

  std::vector<double> activity(m_, 0.0);
  double viol = 0.0;
  for (std::size_t j = 0; j < n_; ++j) {
    viol = std::max({viol, lower_[j] - x_[j], x_[j] - upper_[j]});
    for (std::size_t c = col_start_[j]; c < col_start_[j + 1]; ++c) {
      activity[col_row_[c]] += col_val_[c] * x_[j];
    }
  }
  for (std::size_t r = 0; r < m_; ++r) {
    viol = std::max({viol, lower_[n_ + r] - activity[r], activity[r] - upper_[n_ + r]});
  }
  sol.max_violation = viol;

  const double sign = sense_ == Sense::maximize ? -1.0 : 1.0;
  if (status != Status::optimal) {
    sol.objective = std::numeric_limits<double>::quiet_NaN();
    sol.dual_bound = std::numeric_limits<double>::quiet_NaN();
    if (status == Status::unbounded) sol.objective = -sign * kInfinity;
    return sol;
  }
  double obj = 0.0;
  for (std::size_t j = 0; j < n_; ++j) obj += cost_[j] * x_[j];
  sol.objective = sign * obj;

  const auto mi = static_cast<Eigen::Index>(m_);
  Eigen::VectorXd cb(mi);
  for (std::size_t p = 0; p < m_; ++p) cb(static_cast<Eigen::Index>(p)) = cost_[head_[p]];
  Eigen::VectorXd y = m_ > 0 ? Eigen::VectorXd(binv_.transpose() * cb)
                             : Eigen::VectorXd();
  sol.row_duals.resize(m_);
  for (std::size_t r = 0; r < m_; ++r) sol.row_duals[r] = sign * y(static_cast<Eigen::Index>(r));

  double bound = 0.0;
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    const double d = cost_[j] - column_dot(j, y);
    if (std::abs(d) <= 1e-12) continue;
    const double z = d > 0.0 ? lower_[j] : upper_[j];
    if (!finite(z)) {
      bound = -kInfinity;
      break;
    }
    bound += d * z;
  }
  sol.dual_bound = sign * bound;
  return sol;
}

LpSolution solve(const LinearProgram& lp, const SolverOptions& options) {
  SimplexSolver solver(lp, options);
  return solver.solve();
}

namespace {

std::string clean_name(const std::string& raw, const std::string& fallback) {
  if (raw.empty()) return fallback;
  std::string out;
  for (char c : raw) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                    c == '.' || c == '[' || c == ']';
    out += ok ? c : '_';
  }
  if (std::isdigit(static_cast<unsigned char>(out.front())) || out.front() == '.') {
    out.insert(out.begin(), '_');
  }
  return out;
}

void write_terms(std::ostream& out, const std::vector<Term>& terms,
                 const std::vector<std::string>& names) {
  if (terms.empty()) {
    out << " 0 " << names.front();
    return;
  }
  for (const auto& t : terms) {
    out << (t.coef < 0 ? " - " : " + ") << std::abs(t.coef) << ' ' << names[t.var];
  }
}

}  // namespace

void write_lp_format(const LinearProgram& lp, std::ostream& out) {
  lp.validate();
  std::vector<std::string> names(lp.num_variables());
  for (std::size_t j = 0; j < names.size(); ++j) {
    names[j] = clean_name(lp.names()[j], "x" + std::to_string(j));
  }
  if (names.empty()) names.push_back("x0");
  const auto old_precision = out.precision(17);
  out << (lp.sense() == Sense::maximize ? "Maximize\n" : "Minimize\n") << " obj:";
  std::vector<Term> obj;
  if (lp.sense() != Sense::feasibility) {
    for (std::size_t j = 0; j < lp.objective().size(); ++j) {
      if (lp.objective()[j] != 0.0) obj.push_back({j, lp.objective()[j]});
    }
  }
  write_terms(out, obj, names);
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < lp.num_rows(); ++r) {
    const auto& row = lp.rows()[r];
    out << ' ' << clean_name(row.label, "c" + std::to_string(r)) << ':';
    write_terms(out, row.terms, names);
    switch (row.relation) {
      case Relation::less_equal:
        out << " <= ";
        break;
      case Relation::greater_equal:
        out << " >= ";
        break;
      case Relation::equal:
        out << " = ";
        break;
    }
    out << row.rhs << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const double lo = lp.lower()[j];
    const double hi = lp.upper()[j];
    if (!finite(lo) && !finite(hi)) {
      out << ' ' << names[j] << " free\n";
    } else if (lo == hi) {
      out << ' ' << names[j] << " = " << lo << '\n';
    } else {
      out << ' ' << (finite(lo) ? std::to_string(lo) : std::string("-inf"))
          << " <= " << names[j];
      if (finite(hi)) out << " <= " << hi;
      out << '\n';
    }
  }
  out << "End\n";
  out.precision(old_precision);
}

namespace {

LinearProgram build_epigraph(const ConstraintSystem& system,
                             std::vector<std::ptrdiff_t>& form_row,
                             std::size_t& t_var) {
  system.validate();
  if (system.forms.empty()) {
    throw DomainError("minimax needs at least one relaxable form");
  }
  LinearProgram lp;
  for (std::size_t j = 0; j < system.num_vars; ++j) {
    lp.add_variable(system.lower[j], system.upper[j]);
  }
  t_var = lp.add_variable(-kInfinity, kInfinity, "t");
  form_row.assign(system.forms.size(), -1);
  double floor = -kInfinity;
  for (std::size_t f = 0; f < system.forms.size(); ++f) {
    const auto& form = system.forms[f];
    if (form.empty()) {
      floor = std::max(floor, form.constant);
      continue;
    }
    std::vector<Term> terms;
    terms.reserve(form.terms.size() + 1);
    for (const auto& t : form.terms) terms.push_back({t.var, t.coef});
    terms.push_back({t_var, -1.0});
    form_row[f] = static_cast<std::ptrdiff_t>(
        lp.add_row(std::move(terms), Relation::less_equal, -form.constant, form.label));
  }
  for (const auto& g : system.equalities) {
    std::vector<Term> terms;
    for (const auto& t : g.terms) terms.push_back({t.var, t.coef});
    lp.add_row(std::move(terms), Relation::equal, -g.constant, g.label);
  }
  for (const auto& block : system.blocks) lp.add_simplex_block(block);
  std::vector<double> c(lp.num_variables(), 0.0);
  c[t_var] = 1.0;
  lp.set_objective(std::move(c), Sense::minimize);
  lp.set_variable_bounds(t_var, floor, kInfinity);
  return lp;
}

}  // namespace

MinimaxSolver::MinimaxSolver(const ConstraintSystem& system,
                             SolverOptions options)
    : system_(system),
      lp_(build_epigraph(system_, form_row_, t_var_)),
      solver_(lp_, options) {}

void MinimaxSolver::set_constant(std::size_t form, double constant) {
  if (form >= system_.forms.size()) throw DomainError("form index out of range");
  if (!finite(constant)) throw DomainError("form constant is not finite");
  system_.forms[form].constant = constant;
  if (form_row_[form] >= 0) {
    solver_.set_row_bounds(static_cast<std::size_t>(form_row_[form]), -kInfinity,
                           -constant);
  } else {
    refresh_floor();
  }
}

void MinimaxSolver::refresh_floor() {
  double floor = -kInfinity;
  for (std::size_t f = 0; f < system_.forms.size(); ++f) {
    if (form_row_[f] < 0) floor = std::max(floor, system_.forms[f].constant);
  }
  solver_.set_variable_bounds(t_var_, floor, kInfinity);
}

MinimaxResult MinimaxSolver::solve() {
  const LpSolution sol = solver_.solve();
  MinimaxResult out;
  out.iterations = sol.iterations;
  if (sol.status == Status::infeasible) {
    out.value = kInfinity;
    return out;
  }
  if (sol.status == Status::unbounded) {
    out.value = -kInfinity;
    return out;
  }
  out.point.assign(sol.primal.begin(),
                   sol.primal.begin() + static_cast<std::ptrdiff_t>(system_.num_vars));
  out.value = sol.primal[t_var_];
  return out;
}

MinimaxResult minimax_value(const ConstraintSystem& system) {
  MinimaxSolver solver(system);
  return solver.solve();
}

LinearProgram to_linear_program(const ConstraintSystem& system,
                                double tolerance) {
  system.validate();
  LinearProgram lp;
  for (std::size_t j = 0; j < system.num_vars; ++j) {
    lp.add_variable(system.lower[j], system.upper[j]);
  }
  for (const auto& form : system.forms) {
    std::vector<Term> terms;
    terms.reserve(form.terms.size());
    for (const auto& t : form.terms) terms.push_back({t.var, t.coef});
    lp.add_row(std::move(terms), Relation::less_equal, tolerance - form.constant,
               form.label);
  }
  for (const auto& g : system.equalities) {
    std::vector<Term> terms;
    for (const auto& t : g.terms) terms.push_back({t.var, t.coef});
    lp.add_row(std::move(terms), Relation::equal, -g.constant, g.label);
  }
  for (const auto& block : system.blocks) lp.add_simplex_block(block);
  return lp;
}

}  // namespace bceid::lp
