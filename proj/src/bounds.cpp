#include "bceid/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "bceid/error.hpp"

namespace bceid {

namespace {

constexpr double kEdgeTol = 1e-12;
constexpr double kMassTol = 1e-9;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

QuantileFn::QuantileFn(std::vector<double> breakpoints, std::vector<double> values,
                       double H)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)), H_(H) {
  if (!(H_ > 0.0)) throw DomainError("quantile function needs H > 0");
  if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
    throw DomainError("quantile function needs matching nonempty breakpoints and values");
  }
  double prev_q = 0.0;
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k] > prev_q)) {
      throw DomainError("quantile breakpoints must increase strictly within (0, 1]");
    }
    prev_q = breakpoints_[k];
    if (values_[k] < -kEdgeTol || values_[k] > H_ + kEdgeTol) {
      throw DomainError("quantile values must lie in [0, H]");
    }
    if (k > 0 && values_[k] < values_[k - 1]) {
      throw DomainError("quantile function is not monotone");
    }
  }
  if (std::abs(breakpoints_.back() - 1.0) > kMassTol) {
    throw DomainError("last quantile breakpoint must be 1");
  }
  breakpoints_.back() = 1.0;
}

QuantileFn QuantileFn::from_distribution(const std::vector<double>& support,
                                         const std::vector<double>& probs, double H) {
  if (support.size() != probs.size() || support.empty()) {
    throw DomainError("distribution needs matching nonempty support and masses");
  }
  std::map<double, double> mass;
  double total = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (probs[k] < 0.0) throw DomainError("negative probability mass");
    total += probs[k];
    if (probs[k] > 0.0) mass[support[k]] += probs[k];
  }
  if (std::abs(total - 1.0) > kMassTol) throw DomainError("masses must sum to 1");
  std::vector<double> q;
  std::vector<double> v;
  double cumulative = 0.0;
  for (const auto& [x, p] : mass) {
    cumulative += p;
    q.push_back(cumulative);
    v.push_back(x);
  }
  q.back() = 1.0;
  return QuantileFn(std::move(q), std::move(v), H);
}

QuantileFn QuantileFn::constant(double c, double H) { return QuantileFn({1.0}, {c}, H); }

QuantileFn QuantileFn::max_bid(const BidDistribution& phi, const SupportGrid& grid) {
  phi.check_grid(grid);
  std::vector<double> support;
  support.reserve(phi.size());
  for (const auto& b : phi.support()) {
    support.push_back(grid.bids()[*std::max_element(b.begin(), b.end())]);
  }
  return from_distribution(support, phi.probs(), grid.H());
}

double QuantileFn::operator()(double q) const {
  if (!(q > 0.0) || q > 1.0 + kEdgeTol) throw DomainError("quantile level must lie in (0, 1]");
  const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), q - kEdgeTol);
  const auto k = static_cast<std::size_t>(it - breakpoints_.begin());
  return values_[std::min(k, values_.size() - 1)];
}

double QuantileFn::weighted_average(double q, double a) const {
  if (!(q > 0.0) || q > 1.0 + kEdgeTol) throw DomainError("quantile level must lie in (0, 1]");
  if (!(a > 0.0)) throw DomainError("weight exponent must be positive");
  q = std::min(q, 1.0);
  double total = 0.0;
  double lo = 0.0;
  for (std::size_t k = 0; k < breakpoints_.size() && lo < q; ++k) {
    const double hi = std::min(breakpoints_[k], q);
    total += values_[k] * (std::pow(hi, a) - std::pow(lo, a));
    lo = breakpoints_[k];
  }
  return total / std::pow(q, a);
}

double QuantileFn::mean() const {
  double total = 0.0;
  double lo = 0.0;
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
    total += values_[k] * (breakpoints_[k] - lo);
    lo = breakpoints_[k];
  }
  return total;
}

BbmCheck bbm_constraint_check(const QuantileFn& v, const QuantileFn& B, std::size_t n,
                              const std::vector<double>& q_grid, double tolerance) {
  if (n < 2) throw DomainError("at least two bidders are required");
  const double a = static_cast<double>(n - 1) / static_cast<double>(n);
  BbmCheck out;
  out.max_excess = -std::numeric_limits<double>::infinity();
  for (double q : q_grid) {
    const double excess = v.weighted_average(q, a) - B(q);
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > tolerance) {
      out.holds = false;
      out.violated_at.push_back(q);
    }
  }
  if (q_grid.empty()) out.max_excess = 0.0;
  return out;
}

double bbm_mean_upper(double R, double H, std::size_t n, BbmVariant variant,
                      double lipschitz) {
  if (!(H > 0.0)) throw DomainError("H must be positive");
  if (R < -kEdgeTol || R > H + kEdgeTol) throw DomainError("revenue must lie in [0, H]");
  if (n < 2) throw DomainError("at least two bidders are required");
  R = std::clamp(R, 0.0, H);
  const double nn = static_cast<double>(n);
  switch (variant) {
    case BbmVariant::general:
      return std::sqrt(2.0 * nn / (nn - 1.0) * H * R);
    case BbmVariant::two_bidder:
      if (n != 2) throw DomainError("the two-bidder bound needs n = 2");
      return 2.0 * std::sqrt(R * H) - R;
    case BbmVariant::lipschitz:
      if (!(lipschitz > 0.0)) throw DomainError("Lipschitz constant must be positive");
      return R * std::sqrt(2.0 / (nn - 1.0)) + std::sqrt(2.0 * nn / (nn - 1.0) * lipschitz * R);
  }
  throw DomainError("unknown bound variant");
}

BbmComparison bbm_vs_sharp_report(const BidDistribution& phi, const SupportGrid& grid,
                                  const UtilityKernel& u) {
  phi.check_grid(grid);
  BbmComparison c;
  c.sharp = moment_bounds_cv(grid.values(), phi, grid, u);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const auto& b = phi.support()[k];
    c.revenue += phi.probs()[k] * grid.bids()[*std::max_element(b.begin(), b.end())];
  }
  const double H = grid.H();
  const std::size_t n = grid.players();
  c.revenue = std::clamp(c.revenue, 0.0, H);
  c.bbm_general = bbm_mean_upper(c.revenue, H, n, BbmVariant::general);
  c.bbm_two_bidder = n == 2 ? bbm_mean_upper(c.revenue, H, n, BbmVariant::two_bidder) : nan();
  c.two_point_mean = 2.0 * c.revenue - c.revenue * c.revenue / H;
  const bool positive = !c.sharp.empty && c.sharp.upper > 0.0;
  c.two_point_ratio = positive ? c.two_point_mean / c.sharp.upper : nan();
  c.general_ratio = positive ? c.bbm_general / c.sharp.upper : nan();
  c.step = grid.bid_step();
  c.dominated = c.sharp.empty || c.sharp.upper <= c.bbm_general + 2.0 * c.step + 1e-9;
  return c;
}

void write_bbm_csv(std::ostream& out, const BbmComparison& c) {
  out << "# closed-form bounds assume continuous quantiles; grid values are approximate\n";
  out << "# feasibility_tolerance=" << c.sharp.feasibility_tolerance << '\n';
  out << "sharp_lower,sharp_upper,revenue,bbm_general,bbm_two_bidder,two_point_mean,"
         "two_point_ratio,general_ratio,step,dominated\n";
  out << std::setprecision(12) << c.sharp.lower << ',' << c.sharp.upper << ',' << c.revenue
      << ',' << c.bbm_general << ',' << c.bbm_two_bidder << ',' << c.two_point_mean << ','
      << c.two_point_ratio << ',' << c.general_ratio << ',' << c.step << ','
      << (c.dominated ? 1 : 0) << '\n';
}

double ipv_invert(double b, const std::function<double(double)>& G,
                  const std::function<double(double)>& g) {
  const double density = g(b);
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw DomainError("conditional density of the highest opposing bid must be positive");
  }
  return b + G(b) / density;
}

}  // namespace bceid
