#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bceid/lp.hpp"
#include "bceid/model.hpp"
#include "bceid/sharp.hpp"

namespace bceid {

enum class FamilyKind {
  truncated_normal,
  truncated_poisson,
  binomial,
  truncated_geometric
};

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

using Theta = std::vector<double>;

/// Parametric value family on V with a box of admissible parameters.
/// truncated_normal: theta = (mu, sigma), mass proportional to
///   exp(-(v - mu)^2 / sigma^2);
/// truncated_poisson: theta = (lambda), lambda^v e^-lambda / v!;
/// binomial: theta = (p), C(H, v) p^v (1 - p)^(H - v) with H trials;
/// truncated_geometric: theta = (p), p (1 - p)^v.
struct Family {
  FamilyKind kind = FamilyKind::truncated_normal;
  double H = 0.0;
  Theta lower;
  Theta upper;
  /// Whether each bound of the box is attainable.
  std::vector<char> lower_open;
  std::vector<char> upper_open;

  /// Default box for a grid top H: mu in [0, H], sigma in (0, H/2],
  /// lambda in (0, H], p in (0, 1).
  static Family make(FamilyKind kind, double H);

  std::size_t dims() const { return lower.size(); }
  std::vector<std::string> parameter_names() const;
  bool contains(const Theta& theta) const;
};

struct ThetaGrid {
  std::vector<Theta> points;

  std::size_t size() const { return points.size(); }

  /// Cartesian product of axes, first axis slowest.
  static ThetaGrid product(const std::vector<std::vector<double>>& axes);

  /// mu step 0.5 over [0, H], sigma step 0.5 over (0, H/2], lambda step 0.5
  /// over (0, H], p step 0.01 over (0, 1).
  static ThetaGrid default_for(const Family& family);

  /// Index of the point equal to `theta` (within 1e-9), or -1.
  std::ptrdiff_t find(const Theta& theta) const;
};

/// Normalized mass of the family on `values`. Throws DomainError outside
/// the box.
ValueDistribution density(const Family& family, const Theta& theta,
                          const std::vector<double>& values);

struct MomentSummary {
  double mean = 0.0;
  double sd = 0.0;
};

MomentSummary moment_summary(const Family& family, const Theta& theta,
                             const std::vector<double>& values);

/// Minimax values Q(theta) of the common-value system pinned to the family
/// density. One warm solver is reused across parameters.
class ParametricEvaluator {
 public:
  ParametricEvaluator(const BidDistribution& phi, const SupportGrid& grid,
                      const UtilityKernel& u, Family family);

  double minimax(const Theta& theta);
  lp::MinimaxResult solve(const Theta& theta);

  const BceSystem& system() const { return bce_; }
  const Family& family() const { return family_; }

 private:
  SupportGrid grid_;
  Family family_;
  BceSystem bce_;
  std::unique_ptr<lp::MinimaxSolver> solver_;
};

/// Mask of {theta : Q(theta) <= tolerance} with the raw Q per point.
IdentifiedSet parametric_identified_set(const BidDistribution& phi,
                                        const SupportGrid& grid,
                                        const UtilityKernel& u,
                                        const Family& family,
                                        const ThetaGrid& thetas,
                                        double tolerance);

/// Raw Q(theta) over the grid, computed in parallel chunks.
std::vector<double> parametric_minimax_values(const BidDistribution& phi,
                                              const SupportGrid& grid,
                                              const UtilityKernel& u,
                                              const Family& family,
                                              const ThetaGrid& thetas);

/// Mask of {theta : values[k] <= tolerance}.
IdentifiedSet threshold_set(const std::vector<double>& values, double tolerance,
                            std::string method);

}  // namespace bceid
