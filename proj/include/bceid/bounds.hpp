#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "bceid/model.hpp"
#include "bceid/sharp.hpp"

namespace bceid {

/// Left-continuous step function on (0, 1]: value_k on (q_{k-1}, q_k] with
/// q_0 = 0 and q_K = 1. Breakpoints are strictly increasing and values are
/// nondecreasing within [0, H].
class QuantileFn {
 public:
  QuantileFn(std::vector<double> breakpoints, std::vector<double> values, double H);

  /// Quantile function of a discrete distribution on `support` (any order).
  static QuantileFn from_distribution(const std::vector<double>& support,
                                      const std::vector<double>& probs, double H);

  /// Constant function c on (0, 1].
  static QuantileFn constant(double c, double H);

  /// Quantile function of the maximum bid under phi.
  static QuantileFn max_bid(const BidDistribution& phi, const SupportGrid& grid);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  double H() const { return H_; }

  double operator()(double q) const;

  /// (1 / q^a) * integral_0^q a y^(a-1) v(y) dy, integrated exactly per piece.
  double weighted_average(double q, double a) const;

  /// Integral of v over (0, 1].
  double mean() const;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
  double H_;
};

struct BbmCheck {
  bool holds = true;
  /// Grid points where the averaged quantile exceeds B(q).
  std::vector<double> violated_at;
  /// max_q (average(q) - B(q)); nonpositive when the constraint holds.
  double max_excess = 0.0;
};

/// Checks (1/q^a) int_0^q a y^(a-1) v(y) dy <= B(q), a = (n-1)/n, at every q
/// in `q_grid` (points in (0, 1]); `tolerance` absorbs round-off.
BbmCheck bbm_constraint_check(const QuantileFn& v, const QuantileFn& B, std::size_t n,
                              const std::vector<double>& q_grid,
                              double tolerance = 1e-12);

enum class BbmVariant { general, two_bidder, lipschitz };

/// Closed-form upper bound on the mean value given revenue R.
double bbm_mean_upper(double R, double H, std::size_t n, BbmVariant variant,
                      double lipschitz = 0.0);

struct BbmComparison {
  Interval sharp;
  /// Expected maximum bid under phi.
  double revenue = 0.0;
  double bbm_general = 0.0;
  /// NaN unless n = 2.
  double bbm_two_bidder = 0.0;
  /// Mean of the two-point value law {0, H} that meets the constraint with
  /// equality against a degenerate maximum bid at R: 2R - R^2 / H.
  double two_point_mean = 0.0;
  /// two_point_mean / sharp upper (NaN when the upper bound is 0).
  double two_point_ratio = 0.0;
  /// bbm_general / sharp upper (NaN when the upper bound is 0).
  double general_ratio = 0.0;
  /// Grid step used as the discretization slack.
  double step = 0.0;
  /// sharp.upper <= bbm_general + 2 step.
  bool dominated = true;
};

/// Sharp common-value mean interval against the closed-form uppers. The
/// closed forms assume continuous quantiles, so on a grid they are an
/// approximation; `dominated` allows for twice the grid step.
BbmComparison bbm_vs_sharp_report(const BidDistribution& phi, const SupportGrid& grid,
                                  const UtilityKernel& u = UtilityKernel::first_price());

void write_bbm_csv(std::ostream& out, const BbmComparison& c);

/// v = b + G(b|b) / g(b|b) for the conditional cdf G and density g of the
/// highest opposing bid.
double ipv_invert(double b, const std::function<double(double)>& G,
                  const std::function<double(double)>& g);

}  // namespace bceid
