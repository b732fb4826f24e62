#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bceid/inference.hpp"
#include "bceid/model.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

namespace bceid {

enum class SelectorKind { max_revenue, min_revenue, random_objective, max_entropy_surrogate };

std::string to_string(SelectorKind kind);
SelectorKind selector_kind_from_string(const std::string& name);

/// Which BCE vertex the generator returns. The entropy surrogate averages
/// `surrogate_vertices` random-objective vertices.
struct Selector {
  SelectorKind kind = SelectorKind::max_revenue;
  std::uint64_t seed = 0;
  std::size_t surrogate_vertices = 8;
};

/// Joint BCE psi(v, b) with value marginal pi chosen by `selector`.
struct GeneratedBce {
  BidDistribution phi;
  /// psi at index profile_code * |V| + v, over all of B^n.
  std::vector<double> psi;
  double objective = 0.0;
};

GeneratedBce generate_bce_joint(const ValueDistribution& pi, const SupportGrid& grid,
                                const UtilityKernel& u, const Selector& selector = {});

/// Bid marginal of the selected BCE; masses below 1e-13 are dropped.
BidDistribution generate_bce(const ValueDistribution& pi, const SupportGrid& grid,
                             const UtilityKernel& u, const Selector& selector = {});

/// N i.i.d. draws by inverse cdf over the ordered support.
BidSample sample_bids(const BidDistribution& phi, std::size_t N, std::uint64_t seed);

/// Expected revenue sum_b phi(b) R(b).
double expected_revenue(const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u);

/// Mean interval and the superset
/// E2_min - E_max^2 <= Var <= E2_max - E_min^2 (floored at 0).
struct VarianceSuperset {
  Interval mean;
  Interval second_moment;
  double var_lower = 0.0;
  double var_upper = 0.0;
  bool empty = true;
};

VarianceSuperset conservative_variance_bounds(const Interval& mean,
                                              const Interval& second_moment);

/// Superset for the population identified set of phi.
VarianceSuperset population_variance_superset(const BidDistribution& phi,
                                              const SupportGrid& grid,
                                              const UtilityKernel& u);

/// Superset from Hoeffding moment intervals; the second moment is taken of
/// v^2 / H so that it maps into [0, H].
VarianceSuperset sample_variance_superset(const BidSample& sample,
                                          const SupportGrid& grid,
                                          const UtilityKernel& u, double delta);

struct ExperimentConfig {
  FamilyKind family = FamilyKind::truncated_normal;
  Theta theta0;  // empty: family default
  int grid = 20;
  std::size_t players = 2;
  AuctionKind auction = AuctionKind::first_price;
  std::vector<std::size_t> N_list{1000, 10000, 100000};
  Selector selector;
  std::uint64_t seed = 1;
  double delta = 0.1;
  double alpha = 0.05;
  std::size_t k = 50;
  double s_fraction = 0.25;
  std::vector<std::string> methods{"hoeffding", "subsampling", "bernstein"};
};

/// Default parameter for a family at grid top H: mu = 4, sigma = 1,
/// lambda = 4, p = 0.2.
Theta default_theta0(FamilyKind kind);

/// Plain key=value lines; '#' starts a comment. Lists are comma separated.
ExperimentConfig parse_experiment_config(std::istream& in);
void write_experiment_config(std::ostream& out, const ExperimentConfig& config);

struct ExperimentRow {
  std::size_t N = 0;
  std::string method;
  double tolerance = 0.0;
  std::size_t set_size = 0;
  /// |estimate xor population| / |Theta|.
  double difference_mass = 0.0;
  bool contains_theta0 = false;
  bool contains_population = false;
  VarianceSuperset moments;
};

struct ExperimentReport {
  ExperimentConfig config;
  BidDistribution phi;
  ThetaGrid thetas;
  IdentifiedSet population;
  VarianceSuperset population_moments;
  bool theta0_in_population = false;
  std::vector<ExperimentRow> rows;
  std::vector<std::pair<std::string, IdentifiedSet>> sets;
};

/// Generates phi from theta0, samples each N and computes the configured
/// sets. Writes CSV grids and summary.csv into `out_dir` when nonempty.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::string& out_dir = "");

void write_summary_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace bceid
