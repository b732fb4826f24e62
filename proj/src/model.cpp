#include "bceid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bceid/error.hpp"

namespace bceid {
namespace {

void check_support(const std::vector<double>& pts, const char* what) {
  if (pts.empty()) {
    throw DomainError(std::string(what) + " support is empty");
  }
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (!std::isfinite(pts[k])) {
      throw DomainError(std::string(what) + " support has a non-finite point");
    }
    if (k > 0 && !(pts[k] > pts[k - 1])) {
      throw DomainError(std::string(what) +
                        " support must be strictly increasing");
    }
  }
}

std::size_t lookup(const std::vector<double>& pts, double x, const char* what) {
  auto it = std::lower_bound(pts.begin(), pts.end(), x);
  const double tol = 1e-9 * std::max(1.0, std::abs(x));
  if (it != pts.end() && std::abs(*it - x) <= tol) {
    return static_cast<std::size_t>(it - pts.begin());
  }
  if (it != pts.begin() && std::abs(*(it - 1) - x) <= tol) {
    return static_cast<std::size_t>(it - pts.begin() - 1);
  }
  std::ostringstream msg;
  msg << what << " " << x << " is not on the grid";
  throw DomainError(msg.str());
}

}  // namespace

SupportGrid::SupportGrid(std::size_t players, std::vector<double> values,
                         std::vector<double> bids,
                         std::vector<std::size_t> signal_counts)
    : players_(players),
      values_(std::move(values)),
      bids_(std::move(bids)),
      signal_counts_(std::move(signal_counts)) {
  if (players_ < 1) {
    throw DomainError("at least one player is required");
  }
  check_support(values_, "value");
  check_support(bids_, "bid");
  if (!(values_.back() > 0.0)) {
    throw DomainError("H = max(values) must be positive");
  }
  if (values_.front() < 0.0) {
    throw DomainError("values must be nonnegative");
  }
  if (bids_.front() < 0.0 || bids_.back() > H() * (1.0 + 1e-12)) {
    throw DomainError("bids must lie in [0, H]");
  }
  if (!signal_counts_.empty() && signal_counts_.size() != players_) {
    throw DomainError("signal_counts must have one entry per player");
  }
  for (auto c : signal_counts_) {
    if (c == 0) throw DomainError("signal spaces must be nonempty");
  }
  num_profiles_ = 1;
  for (std::size_t i = 0; i < players_; ++i) {
    if (num_profiles_ > std::numeric_limits<std::size_t>::max() / bids_.size()) {
      throw DomainError("bid profile space is too large to index");
    }
    num_profiles_ *= bids_.size();
  }
}

SupportGrid SupportGrid::integer(std::size_t players, int value_max,
                                 int bid_max) {
  std::vector<double> v(static_cast<std::size_t>(value_max) + 1);
  std::vector<double> b(static_cast<std::size_t>(bid_max) + 1);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = static_cast<double>(k);
  return SupportGrid(players, std::move(v), std::move(b));
}

SupportGrid SupportGrid::uniform(std::size_t players, double H, double step) {
  if (!(step > 0.0) || !(H > 0.0)) {
    throw DomainError("uniform grid needs H > 0 and step > 0");
  }
  const double count = H / step;
  const auto k = static_cast<long>(std::llround(count));
  if (std::abs(count - static_cast<double>(k)) > 1e-9 * std::max(1.0, count)) {
    throw DomainError("H must be a multiple of the grid step");
  }
  std::vector<double> pts(static_cast<std::size_t>(k) + 1);
  for (long j = 0; j <= k; ++j) {
    pts[static_cast<std::size_t>(j)] = static_cast<double>(j) * step;
  }
  pts.back() = H;
  return SupportGrid(players, pts, pts);
}

std::size_t SupportGrid::signals(std::size_t player) const {
  if (player >= players_) throw DomainError("player index out of range");
  return signal_counts_.empty() ? 1 : signal_counts_[player];
}

double SupportGrid::bid_step() const {
  double step = 0.0;
  for (std::size_t k = 1; k < bids_.size(); ++k) {
    const double gap = bids_[k] - bids_[k - 1];
    step = (k == 1) ? gap : std::min(step, gap);
  }
  return step;
}

std::size_t SupportGrid::value_index(double v) const {
  return lookup(values_, v, "value");
}

std::size_t SupportGrid::bid_index(double b) const {
  return lookup(bids_, b, "bid");
}

std::size_t SupportGrid::encode(std::span<const std::size_t> profile) const {
  check_profile(profile);
  std::size_t code = 0;
  for (auto b : profile) code = code * bids_.size() + b;
  return code;
}

BidProfile SupportGrid::decode(std::size_t code) const {
  if (code >= num_profiles_) throw DomainError("profile code out of range");
  BidProfile p(players_);
  for (std::size_t i = players_; i-- > 0;) {
    p[i] = code % bids_.size();
    code /= bids_.size();
  }
  return p;
}

BidProfile SupportGrid::to_profile(std::span<const double> bid_amounts) const {
  if (bid_amounts.size() != players_) {
    throw DomainError("bid profile must have one bid per player");
  }
  BidProfile p(players_);
  for (std::size_t i = 0; i < players_; ++i) p[i] = bid_index(bid_amounts[i]);
  return p;
}

std::vector<double> SupportGrid::amounts(
    std::span<const std::size_t> profile) const {
  check_profile(profile);
  std::vector<double> out(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) out[i] = bids_[profile[i]];
  return out;
}

void SupportGrid::check_profile(std::span<const std::size_t> profile) const {
  if (profile.size() != players_) {
    throw DomainError("bid profile must have one bid per player");
  }
  for (auto b : profile) {
    if (b >= bids_.size()) throw DomainError("bid index out of range");
  }
}

double win_share(std::span<const std::size_t> profile, std::size_t player) {
  const auto top = *std::max_element(profile.begin(), profile.end());
  if (profile[player] != top) return 0.0;
  const auto ties = std::count(profile.begin(), profile.end(), top);
  return 1.0 / static_cast<double>(ties);
}

std::size_t highest_opposing(std::span<const std::size_t> profile,
                             std::size_t player) {
  std::size_t best = 0;
  bool any = false;
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (j == player) continue;
    best = any ? std::max(best, profile[j]) : profile[j];
    any = true;
  }
  return best;
}

std::string to_string(AuctionKind kind) {
  switch (kind) {
    case AuctionKind::first_price:
      return "first_price";
    case AuctionKind::second_price:
      return "second_price";
    case AuctionKind::custom_table:
      return "custom_table";
  }
  return "unknown";
}

AuctionKind auction_kind_from_string(const std::string& name) {
  if (name == "first_price" || name == "first-price" || name == "fp") {
    return AuctionKind::first_price;
  }
  if (name == "second_price" || name == "second-price" || name == "sp") {
    return AuctionKind::second_price;
  }
  if (name == "custom_table") return AuctionKind::custom_table;
  throw DomainError("unknown auction kind '" + name + "'");
}

UtilityKernel UtilityKernel::first_price() {
  return UtilityKernel(AuctionKind::first_price);
}

UtilityKernel UtilityKernel::second_price() {
  return UtilityKernel(AuctionKind::second_price);
}

UtilityKernel UtilityKernel::custom_table(const SupportGrid& grid,
                                          std::vector<double> table) {
  const std::size_t expected =
      grid.players() * grid.num_profiles() * grid.num_values();
  if (table.size() != expected) {
    throw DomainError("custom utility table has the wrong size");
  }
  for (double u : table) {
    if (!std::isfinite(u)) throw DomainError("custom utility is not finite");
  }
  UtilityKernel k(AuctionKind::custom_table);
  k.table_players_ = grid.players();
  k.table_profiles_ = grid.num_profiles();
  k.table_values_ = grid.num_values();
  k.table_ = std::move(table);
  return k;
}

double UtilityKernel::payoff(const SupportGrid& grid, std::size_t player,
                             std::span<const std::size_t> profile,
                             std::size_t value_index) const {
  const double v = grid.values()[value_index];
  switch (kind_) {
    case AuctionKind::first_price: {
      const double share = win_share(profile, player);
      return share == 0.0 ? 0.0 : (v - grid.bids()[profile[player]]) * share;
    }
    case AuctionKind::second_price: {
      const double share = win_share(profile, player);
      if (share == 0.0) return 0.0;
      const double price = grid.bids()[highest_opposing(profile, player)];
      return (v - price) * share;
    }
    case AuctionKind::custom_table: {
      if (table_players_ != grid.players() ||
          table_profiles_ != grid.num_profiles() ||
          table_values_ != grid.num_values()) {
        throw DomainError("custom utility table does not match the grid");
      }
      const std::size_t code = grid.encode(profile);
      return table_[(player * table_profiles_ + code) * table_values_ +
                    value_index];
    }
  }
  return 0.0;
}

double UtilityKernel::payment(const SupportGrid& grid, std::size_t player,
                              std::span<const std::size_t> profile) const {
  const double share = win_share(profile, player);
  if (share == 0.0) return 0.0;
  switch (kind_) {
    case AuctionKind::first_price:
      return share * grid.bids()[profile[player]];
    case AuctionKind::second_price:
      return share * grid.bids()[highest_opposing(profile, player)];
    case AuctionKind::custom_table:
      break;
  }
  throw DomainError("payments are not defined for custom utility tables");
}

double UtilityKernel::revenue(const SupportGrid& grid,
                              std::span<const std::size_t> profile) const {
  double total = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    total += payment(grid, i, profile);
  }
  return total;
}

namespace {

double checked_utility(const SupportGrid& grid, const UtilityKernel& kernel,
                       std::size_t player, std::span<const double> bids,
                       double value) {
  if (player >= grid.players()) throw DomainError("player index out of range");
  const BidProfile profile = grid.to_profile(bids);
  return kernel.payoff(grid, player, profile, grid.value_index(value));
}

}  // namespace

double first_price_utility(const SupportGrid& grid, std::size_t player,
                           std::span<const double> bids, double value) {
  return checked_utility(grid, UtilityKernel::first_price(), player, bids,
                         value);
}

double second_price_utility(const SupportGrid& grid, std::size_t player,
                            std::span<const double> bids, double value) {
  return checked_utility(grid, UtilityKernel::second_price(), player, bids,
                         value);
}

MetricFn::MetricFn(Evaluator fn, double bound, std::string name)
    : fn_(std::move(fn)), bound_(bound), name_(std::move(name)) {
  if (!fn_) throw DomainError("metric evaluator is empty");
  if (!(bound_ >= 0.0) || !std::isfinite(bound_)) {
    throw DomainError("metric bound must be finite and nonnegative");
  }
}

MetricFn MetricFn::constant(double c) {
  return MetricFn([c](std::size_t, std::span<const std::size_t>) { return c; },
                  std::abs(c), "constant");
}

MetricFn MetricFn::revenue(const SupportGrid& grid,
                           const UtilityKernel& kernel) {
  return MetricFn(
      [grid, kernel](std::size_t, std::span<const std::size_t> profile) {
        return kernel.revenue(grid, profile);
      },
      grid.H(), "revenue");
}

MetricFn MetricFn::welfare(const SupportGrid& grid) {
  return MetricFn(
      [grid](std::size_t v, std::span<const std::size_t>) {
        return grid.values()[v];
      },
      grid.H(), "welfare");
}

double MetricFn::operator()(std::size_t value_index,
                            std::span<const std::size_t> profile) const {
  const double w = fn_(value_index, profile);
  if (!std::isfinite(w)) throw DomainError("metric returned a non-finite value");
  return w;
}

}  // namespace bceid
