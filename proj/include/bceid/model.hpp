#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bceid {

/// Bid indices into SupportGrid::bids(), one entry per player.
using BidProfile = std::vector<std::size_t>;

/// Discrete auction environment: n players, value support V and bid
/// support B. Both supports are strictly increasing and lie in [0, H]
/// with H = max(V) > 0.
class SupportGrid {
 public:
  SupportGrid(std::size_t players, std::vector<double> values,
              std::vector<double> bids,
              std::vector<std::size_t> signal_counts = {});

  /// V = {0, 1, ..., value_max}, B = {0, 1, ..., bid_max}.
  static SupportGrid integer(std::size_t players, int value_max, int bid_max);

  /// V = B = {0, step, 2 step, ..., H}; H must be a multiple of step.
  static SupportGrid uniform(std::size_t players, double H, double step);

  std::size_t players() const { return players_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& bids() const { return bids_; }
  std::size_t num_values() const { return values_.size(); }
  std::size_t num_bids() const { return bids_.size(); }
  double H() const { return values_.back(); }

  /// Size of the minimal-signal space of player i (1 unless configured).
  std::size_t signals(std::size_t player) const;

  /// |B|^n.
  std::size_t num_profiles() const { return num_profiles_; }

  /// Smallest gap between consecutive bids (0 for a single bid).
  double bid_step() const;

  std::size_t value_index(double v) const;
  std::size_t bid_index(double b) const;

  /// Mixed-radix code of a profile: player 0 is the most significant digit.
  std::size_t encode(std::span<const std::size_t> profile) const;
  BidProfile decode(std::size_t code) const;

  BidProfile to_profile(std::span<const double> bid_amounts) const;
  std::vector<double> amounts(std::span<const std::size_t> profile) const;

  /// Checks that `profile` has n entries, each a valid bid index.
  void check_profile(std::span<const std::size_t> profile) const;

 private:
  std::size_t players_;
  std::vector<double> values_;
  std::vector<double> bids_;
  std::vector<std::size_t> signal_counts_;
  std::size_t num_profiles_ = 0;
};

/// Probability that player i is allocated the item under profile b when
/// ties among the k highest bidders are broken uniformly (1/k each).
double win_share(std::span<const std::size_t> profile, std::size_t player);

/// Highest bid index among the opponents of `player`.
std::size_t highest_opposing(std::span<const std::size_t> profile,
                             std::size_t player);

enum class AuctionKind { first_price, second_price, custom_table };

std::string to_string(AuctionKind kind);
AuctionKind auction_kind_from_string(const std::string& name);

/// Payoff accessor u_i(b; v). For common values v is the common value; for
/// private values it is player i's own value. Values and bids are passed as
/// grid indices.
class UtilityKernel {
 public:
  static UtilityKernel first_price();
  static UtilityKernel second_price();

  /// Dense table of u_i(b; v) laid out as
  /// table[(i * |B|^n + encode(b)) * |V| + value_index].
  static UtilityKernel custom_table(const SupportGrid& grid,
                                    std::vector<double> table);

  AuctionKind kind() const { return kind_; }

  double payoff(const SupportGrid& grid, std::size_t player,
                std::span<const std::size_t> profile,
                std::size_t value_index) const;

  /// Expected payment of `player` (allocation-weighted). Not defined for
  /// custom tables.
  double payment(const SupportGrid& grid, std::size_t player,
                 std::span<const std::size_t> profile) const;

  /// Sum of expected payments.
  double revenue(const SupportGrid& grid,
                 std::span<const std::size_t> profile) const;

 private:
  explicit UtilityKernel(AuctionKind kind) : kind_(kind) {}

  AuctionKind kind_;
  std::size_t table_players_ = 0;
  std::size_t table_profiles_ = 0;
  std::size_t table_values_ = 0;
  std::vector<double> table_;
};

/// First-price payoff (v - b_i) * share_i(b) for bid amounts and a value
/// that must lie on the grid. Players are 0-based.
double first_price_utility(const SupportGrid& grid, std::size_t player,
                           std::span<const double> bids, double value);

/// Second-price payoff: the winner pays the highest opposing bid.
double second_price_utility(const SupportGrid& grid, std::size_t player,
                            std::span<const double> bids, double value);

/// Counterfactual metric W(v, b) over common value index and bid profile.
class MetricFn {
 public:
  using Evaluator =
      std::function<double(std::size_t value_index,
                           std::span<const std::size_t> profile)>;

  MetricFn(Evaluator fn, double bound, std::string name = "custom");

  static MetricFn constant(double c);
  /// Realized revenue of `kernel` at the bid profile.
  static MetricFn revenue(const SupportGrid& grid, const UtilityKernel& kernel);
  /// Common-value welfare: the item is always allocated, so W = v.
  static MetricFn welfare(const SupportGrid& grid);

  double operator()(std::size_t value_index,
                    std::span<const std::size_t> profile) const;
  double bound() const { return bound_; }
  const std::string& name() const { return name_; }

 private:
  Evaluator fn_;
  double bound_;
  std::string name_;
};

}  // namespace bceid
