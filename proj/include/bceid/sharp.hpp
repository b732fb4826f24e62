#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bceid/constraint_system.hpp"
#include "bceid/lp.hpp"
#include "bceid/model.hpp"

namespace bceid {

enum class Origin { exact, empirical };

/// Probability mass function over bid profiles, stored on its support with
/// profiles sorted lexicographically.
class BidDistribution {
 public:
  /// Duplicated profiles are merged and zero-mass entries dropped. The mass
  /// must be nonnegative and sum to one within 1e-12.
  BidDistribution(std::vector<BidProfile> profiles, std::vector<double> probs,
                  Origin origin = Origin::exact, std::size_t sample_size = 0);

  /// Rescales nonnegative weights to unit mass before construction.
  static BidDistribution normalized(std::vector<BidProfile> profiles,
                                    std::vector<double> weights,
                                    Origin origin = Origin::exact,
                                    std::size_t sample_size = 0);

  static BidDistribution point_mass(BidProfile profile);

  const std::vector<BidProfile>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }
  Origin origin() const { return origin_; }
  std::size_t sample_size() const { return sample_size_; }
  std::size_t players() const { return support_.front().size(); }

  /// Support index of `profile`, or -1.
  std::ptrdiff_t find(const BidProfile& profile) const;
  double prob(const BidProfile& profile) const;

  /// Throws DomainError unless every profile lies on `grid`.
  void check_grid(const SupportGrid& grid) const;

 private:
  std::vector<BidProfile> support_;
  std::vector<double> probs_;
  Origin origin_;
  std::size_t sample_size_;
};

/// Mass over V (common values), V^n (private values) or one marginal over V.
using ValueDistribution = std::vector<double>;

/// Throws DomainError unless `pi` has `size` nonnegative entries summing to 1.
void check_value_distribution(const ValueDistribution& pi, std::size_t size);

enum class KernelLayout { cv, pv, ipv, general, joint };

/// A constraint system together with the layout of its kernel variables.
/// The leading `best_response_rows` forms are the obedience rows.
struct BceSystem {
  ConstraintSystem system;
  KernelLayout layout = KernelLayout::cv;
  /// Number of states in each probability block.
  std::size_t block_size = 0;
  std::size_t best_response_rows = 0;
  /// Index of the first density form, or the form count when unpinned.
  std::size_t density_begin = 0;
};

/// Interval result; `empty` marks an infeasible system.
struct Interval {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool empty = true;
  double tolerance = 0.0;
  double feasibility_tolerance = lp::kFeasibilityTolerance;
  std::string diagnostic;

  bool contains(double x, double slack = 0.0) const {
    return !empty && x >= lower - slack && x <= upper + slack;
  }
};

struct MembershipResult {
  bool member = false;
  /// Smallest uniform relaxation making the system feasible.
  double minimax = 0.0;
  double tolerance = 0.0;
  /// Kernel attaining `minimax` (a feasibility certificate when member).
  std::vector<double> kernel;
};

/// Membership mask over a supplied parameter grid.
struct IdentifiedSet {
  std::vector<char> mask;
  std::vector<double> minimax;
  double tolerance = 0.0;
  double feasibility_tolerance = lp::kFeasibilityTolerance;
  std::string method;
  /// True when points outside the mask were excluded without a certificate.
  bool exclusion_heuristic = false;
  /// Optional per-point witness kernels and their penalized values.
  std::vector<std::vector<double>> witnesses;
  std::vector<double> witness_values;

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  /// Every point of this set is also in `other`.
  bool subset_of(const IdentifiedSet& other) const;
};

/// Obedience system of the general model: states are (theta, t) with theta
/// ranging over the grid values and t over the product of per-player signal
/// spaces; actions are bids. Rows are indexed by (i, t_i, a_i*, a_i').
BceSystem build_bce_general(const BidDistribution& phi, const SupportGrid& grid,
                            const UtilityKernel& u);

/// Common-value system with kernel x(v|b), variable index s*|V| + v for
/// support profile s. Rows are indexed by (i, b_i*, b_i').
BceSystem build_bce_cv(const BidDistribution& phi, const SupportGrid& grid,
                       const UtilityKernel& u);

/// Private-value system with kernel x(v|b) over value vectors (player 0 most
/// significant). Rows are indexed by (i, v_i*, b_i*, b_i').
BceSystem build_bce_pv(const BidDistribution& phi, const SupportGrid& grid,
                       const UtilityKernel& u);

/// Independent-private-value system with one marginal kernel x_i(v_i|b) per
/// player; variable index (i*|S| + s)*|V| + v. `marginals` holds rho_i(v) at
/// index i*|V| + v.
BceSystem build_bce_ipv(const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u);

/// Joint common-value system over psi(v, b) for every b in `profiles`
/// (all of B^n when empty); variable index p*|V| + v; a single block.
BceSystem build_bce_joint(const SupportGrid& grid, const UtilityKernel& u,
                          const std::vector<BidProfile>& profiles = {});

/// Adds the relaxed density pair for every state: pi(k) - m_k(x) <= 0 and
/// m_k(x) - pi(k) <= 0, where m_k is the k-th marginal. Returns the index of
/// the first added form.
std::size_t pin_marginals(BceSystem& bce, const ValueDistribution& pi);

/// Overwrites the constants of pinned density forms in a warm solver.
void update_pinned_marginals(lp::MinimaxSolver& solver, const BceSystem& bce,
                             const ValueDistribution& pi);

/// Recovers the state distribution from a kernel.
ValueDistribution recover_marginal(const BceSystem& bce,
                                   const std::vector<double>& kernel);

/// Min and max of sum_k f(k) * m_k(x) with every form relaxed to <= tolerance.
Interval moment_bounds(const BceSystem& bce, const std::vector<double>& f,
                       double tolerance = 0.0);

MembershipResult membership_cv(const ValueDistribution& pi,
                               const BidDistribution& phi,
                               const SupportGrid& grid, const UtilityKernel& u,
                               double tolerance = lp::kFeasibilityTolerance);

Interval moment_bounds_cv(const std::vector<double>& f,
                          const BidDistribution& phi, const SupportGrid& grid,
                          const UtilityKernel& u, double tolerance = 0.0);

/// h(z) = max of z . pi over the identified set.
double support_function(const std::vector<double>& z,
                        const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u);

MembershipResult membership_pv(const ValueDistribution& pi,
                               const BidDistribution& phi,
                               const SupportGrid& grid, const UtilityKernel& u,
                               double tolerance = lp::kFeasibilityTolerance);

/// `rho` holds one marginal per player.
MembershipResult membership_ipv(const std::vector<ValueDistribution>& rho,
                                const BidDistribution& phi,
                                const SupportGrid& grid, const UtilityKernel& u,
                                double tolerance = lp::kFeasibilityTolerance);

/// Bounds on sum_v f(v) rho(v) under rho_i = rho for every player; empty
/// when symmetric independent private values are refuted.
Interval ipv_symmetric_moment_bounds(const std::vector<double>& f,
                                     const BidDistribution& phi,
                                     const SupportGrid& grid,
                                     const UtilityKernel& u,
                                     double tolerance = 0.0);

enum class SymmetryVerdict { consistent, refuted };

SymmetryVerdict ipv_symmetry_test(const BidDistribution& phi,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u,
                                  double tolerance = 0.0);

/// One covariate cell: covariate vector x0 and the bid distribution given x0.
struct CovariateCell {
  std::vector<double> covariates;
  BidDistribution phi;
};

/// Membership of beta in the set of linear mean models x0' beta = E[v|x0].
MembershipResult covariate_beta_membership(
    const std::vector<double>& beta, const std::vector<CovariateCell>& cells,
    const SupportGrid& grid, const UtilityKernel& u,
    double tolerance = lp::kFeasibilityTolerance);

/// Joint system restricted by the winning-bid cdf: for every x in B,
/// sum over v and {b : max_i b_i <= x} of psi(v, b) equals F_win(x).
BceSystem winning_bid_constraints(const std::vector<double>& cdf,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u,
                                  const std::vector<BidProfile>& profiles = {});

Interval winning_bid_moment_bounds(const std::vector<double>& f,
                                   const std::vector<double>& cdf,
                                   const SupportGrid& grid,
                                   const UtilityKernel& u,
                                   double tolerance = 0.0);

/// Sharp bounds on E[W] in the alternative auction `alternative` over all
/// common-value distributions consistent with phi under `current`.
Interval counterfactual_bounds(const BidDistribution& phi,
                               const MetricFn& metric,
                               const UtilityKernel& current,
                               const UtilityKernel& alternative,
                               const SupportGrid& grid,
                               double tolerance = 0.0);

}  // namespace bceid
