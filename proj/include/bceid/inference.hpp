#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bceid/model.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

namespace bceid {

/// N observed bid profiles omega_1..omega_N.
struct BidSample {
  std::vector<BidProfile> draws;
  std::uint64_t seed = 0;
  std::string provenance;

  std::size_t size() const { return draws.size(); }
  /// Throws DomainError when empty or when a draw leaves the grid.
  void validate(const SupportGrid& grid) const;
};

/// phi_N(b) = (1/N) #{t : omega_t = b}.
BidDistribution empirical_distribution(const BidSample& sample);

enum class ToleranceMode { nonparam_moment, parametric, bernstein };

struct ToleranceSchedule {
  ToleranceMode mode = ToleranceMode::nonparam_moment;
  /// Row relaxation.
  double sigma = 0.0;
  /// Objective slack (nonparametric moments only).
  double epsilon = 0.0;
  /// Variance multiplier (Bernstein only).
  double lambda = 0.0;
  double delta = 0.0;
  double H = 0.0;
  std::size_t players = 0;
  std::size_t num_bids = 0;
  std::size_t num_values = 0;
  std::size_t num_thetas = 0;
  /// Number of constraint classes n|B|^2 (+|V| for parametric modes).
  std::size_t num_constraints = 0;
  std::size_t sample_size = 0;
};

/// nonparam_moment: sigma = 2H sqrt(log(4 n |B|^2 / delta) / N),
///                  epsilon = 2H sqrt(log(4 / delta) / N).
/// parametric:      sigma = 2H sqrt(log(|Theta| (n |B|^2 + |V|) / delta) / N).
ToleranceSchedule hoeffding_tolerances(double H, std::size_t players,
                                       std::size_t num_bids,
                                       std::size_t num_values,
                                       std::size_t num_thetas, double delta,
                                       std::size_t N, ToleranceMode mode);

/// lambda = sqrt(2 log(2 |Theta| |M| / delta)),
/// sigma = 14 H log(2 |Theta| |M| / delta) / (3 (N - 1)), |M| = n|B|^2 + |V|.
ToleranceSchedule bernstein_tolerances(double H, std::size_t players,
                                       std::size_t num_bids,
                                       std::size_t num_values,
                                       std::size_t num_thetas, double delta,
                                       std::size_t N);

/// Unbiased variance, equal to (1 / (N (N - 1))) sum_{t < t'} (X_t - X_t')^2.
double sample_variance(const std::vector<double>& values);

/// [L(sigma) - epsilon, U(sigma) + epsilon] against phi_N for m: V -> [-H, H].
/// `sigma_override` replaces the theorem tolerance (epsilon is kept).
Interval nonparam_moment_interval(const BidSample& sample,
                                  const std::vector<double>& m,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u, double delta,
                                  std::optional<double> sigma_override = {});

/// {theta : Q_N(theta) <= sigma} with the parametric Hoeffding sigma.
IdentifiedSet parametric_hoeffding_set(const BidSample& sample,
                                       const SupportGrid& grid,
                                       const UtilityKernel& u,
                                       const Family& family,
                                       const ThetaGrid& thetas, double delta);

enum class CandidateStrategy { plain, reweighted, alternating };

std::string to_string(CandidateStrategy s);
CandidateStrategy candidate_strategy_from_string(const std::string& name);

struct BernsteinOptions {
  CandidateStrategy strategy = CandidateStrategy::reweighted;
  /// Penalty multipliers used to shift the rows when generating candidates.
  /// They do not depend on delta, so the set is monotone in delta.
  std::vector<double> shift_ladder{1.0, 2.0, 4.0, 8.0};
  /// Refinement passes per ladder step for the alternating strategy.
  std::size_t alternating_rounds = 4;
  std::optional<double> sigma_override;
};

/// Penalized value max_j (F_j(x) - lambda sqrt(Var_N(f_j(x; omega)) / N)) of
/// a kernel against the empirical distribution the system was built from.
/// Rows are evaluated from the per-profile coefficients of the system.
double penalized_value(const BceSystem& bce, const BidDistribution& phi_n,
                       std::size_t N, const std::vector<double>& x,
                       double lambda);

/// theta is kept when a candidate kernel has penalized value <= sigma.
/// Inclusion carries the witness kernel; exclusion is heuristic.
IdentifiedSet bernstein_set(const BidSample& sample, const SupportGrid& grid,
                            const UtilityKernel& u, const Family& family,
                            const ThetaGrid& thetas, double delta,
                            const BernsteinOptions& options = {});

struct SubsampleStat {
  std::size_t draws = 0;
  std::size_t subsample_size = 0;
  double alpha = 0.0;
  std::size_t refine_rounds = 0;
  /// sqrt(s) * sup over the current theta-hat of the subsample minimax.
  std::vector<double> statistics;
  /// max(quantile_{1-alpha}(statistics), 0) / sqrt(N).
  double cutoff = 0.0;
  /// Theta-hat used for the final statistics.
  std::vector<char> theta_hat;
  std::vector<std::string> warnings;
};

struct SubsampleOptions {
  std::size_t draws = 50;
  /// Subsample size; 0 means N / 4.
  std::size_t subsample_size = 0;
  double alpha = 0.05;
  /// Cap on the rounds of each refinement phase; 0 keeps the initial theta-hat.
  std::size_t refine_rounds = 10;
  std::uint64_t seed = 0;
};

/// Order statistic ceil((1 - alpha) k) of the k values (1-based).
double empirical_quantile(std::vector<double> values, double level);

/// Subsampling cutoff starting from `theta_hat`. Refinement uses level sets
/// {theta : Q_N(theta) <= tau} together with the argmin of Q_N: tau is inflated by a quarter
/// until the cutoff of its level set falls to at most tau, then the cutoff
/// map is iterated downward to its largest fixed point below that level.
/// Subsamples are shared across rounds. `full_values` holds Q_N over `thetas`.
SubsampleStat subsample_cutoff(const BidSample& sample, const SupportGrid& grid,
                               const UtilityKernel& u, const Family& family,
                               const ThetaGrid& thetas,
                               const std::vector<double>& full_values,
                               std::vector<char> theta_hat,
                               const SubsampleOptions& options);

struct SubsamplingResult {
  IdentifiedSet set;
  SubsampleStat stat;
};

/// {theta : Q_N(theta) <= cutoff}, starting theta-hat at the argmin of Q_N.
SubsamplingResult subsampling_confidence_set(const BidSample& sample,
                                             const SupportGrid& grid,
                                             const UtilityKernel& u,
                                             const Family& family,
                                             const ThetaGrid& thetas,
                                             const SubsampleOptions& options);

/// Normalized standard exponential weights, one per observation.
std::vector<double> bootstrap_weights(std::size_t N, std::mt19937_64& rng);

/// Reweighted distribution sum_t w_t 1{omega_t = b} / sum_t w_t.
BidDistribution weighted_distribution(const BidSample& sample,
                                      const std::vector<double>& weights);

/// One parametric set per Bayesian bootstrap draw at `tolerance`.
std::vector<IdentifiedSet> bayesian_bootstrap_sets(
    const BidSample& sample, const SupportGrid& grid, const UtilityKernel& u,
    const Family& family, const ThetaGrid& thetas, double tolerance,
    std::size_t draws, std::uint64_t seed);

/// One moment interval per Bayesian bootstrap draw at `tolerance`.
std::vector<Interval> bayesian_bootstrap_intervals(
    const BidSample& sample, const std::vector<double>& m,
    const SupportGrid& grid, const UtilityKernel& u, double tolerance,
    std::size_t draws, std::uint64_t seed);

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// CSV with '# key=value' metadata lines, then one row per theta:
/// parameter coordinates, minimax, tolerance, included.
void write_set_csv(std::ostream& out, const Family& family,
                   const ThetaGrid& thetas, const IdentifiedSet& set,
                   const Metadata& meta);

void write_interval_csv(std::ostream& out, const std::vector<Interval>& rows,
                        const Metadata& meta);

}  // namespace bceid
