#include "bceid/parametric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bceid/error.hpp"
#include "bceid/parallel.hpp"

namespace bceid {

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::truncated_normal:
      return "truncated_normal";
    case FamilyKind::truncated_poisson:
      return "truncated_poisson";
    case FamilyKind::binomial:
      return "binomial";
    case FamilyKind::truncated_geometric:
      return "truncated_geometric";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "truncated_normal" || name == "normal" || name == "gaussian") {
    return FamilyKind::truncated_normal;
  }
  if (name == "truncated_poisson" || name == "poisson") {
    return FamilyKind::truncated_poisson;
  }
  if (name == "binomial") return FamilyKind::binomial;
  if (name == "truncated_geometric" || name == "geometric") {
    return FamilyKind::truncated_geometric;
  }
  throw DomainError("unknown family '" + name + "'");
}

Family Family::make(FamilyKind kind, double H) {
  if (!(H > 0.0) || !std::isfinite(H)) throw DomainError("family needs H > 0");
  Family f;
  f.kind = kind;
  f.H = H;
  switch (kind) {
    case FamilyKind::truncated_normal:
      f.lower = {0.0, 0.0};
      f.upper = {H, H / 2.0};
      f.lower_open = {0, 1};
      f.upper_open = {0, 0};
      break;
    case FamilyKind::truncated_poisson:
      f.lower = {0.0};
      f.upper = {H};
      f.lower_open = {1};
      f.upper_open = {0};
      break;
    case FamilyKind::binomial:
    case FamilyKind::truncated_geometric:
      f.lower = {0.0};
      f.upper = {1.0};
      f.lower_open = {1};
      f.upper_open = {1};
      break;
  }
  return f;
}

std::vector<std::string> Family::parameter_names() const {
  switch (kind) {
    case FamilyKind::truncated_normal:
      return {"mu", "sigma"};
    case FamilyKind::truncated_poisson:
      return {"lambda"};
    case FamilyKind::binomial:
    case FamilyKind::truncated_geometric:
      return {"p"};
  }
  return {};
}

bool Family::contains(const Theta& theta) const {
  if (theta.size() != dims()) return false;
  constexpr double eps = 1e-12;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double x = theta[k];
    if (!std::isfinite(x)) return false;
    if (lower_open[k] ? x <= lower[k] : x < lower[k] - eps) return false;
    if (upper_open[k] ? x >= upper[k] : x > upper[k] + eps) return false;
  }
  return true;
}

ThetaGrid ThetaGrid::product(const std::vector<std::vector<double>>& axes) {
  ThetaGrid grid;
  if (axes.empty()) return grid;
  grid.points.push_back({});
  for (const auto& axis : axes) {
    if (axis.empty()) throw DomainError("theta axis is empty");
    std::vector<Theta> next;
    next.reserve(grid.points.size() * axis.size());
    for (const auto& prefix : grid.points) {
      for (double x : axis) {
        Theta t = prefix;
        t.push_back(x);
        next.push_back(std::move(t));
      }
    }
    grid.points = std::move(next);
  }
  return grid;
}

ThetaGrid ThetaGrid::default_for(const Family& family) {
  const double H = family.H;
  const auto halves = [](long first, long last) {
    std::vector<double> out;
    for (long k = first; k <= last; ++k) out.push_back(0.5 * static_cast<double>(k));
    return out;
  };
  const long top = static_cast<long>(std::floor(2.0 * H + 1e-9));
  std::vector<double> probs;
  for (int i = 1; i <= 99; ++i) probs.push_back(i / 100.0);
  switch (family.kind) {
    case FamilyKind::truncated_normal:
      return product({halves(0, top), halves(1, static_cast<long>(std::floor(H + 1e-9)))});
    case FamilyKind::truncated_poisson:
      return product({halves(1, top)});
    case FamilyKind::binomial:
    case FamilyKind::truncated_geometric:
      return product({probs});
  }
  return {};
}

std::ptrdiff_t ThetaGrid::find(const Theta& theta) const {
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != theta.size()) continue;
    bool same = true;
    for (std::size_t d = 0; d < theta.size() && same; ++d) {
      same = std::abs(points[k][d] - theta[d]) <= 1e-9;
    }
    if (same) return static_cast<std::ptrdiff_t>(k);
  }
  return -1;
}

ValueDistribution density(const Family& family, const Theta& theta,
                          const std::vector<double>& values) {
  if (!family.contains(theta)) {
    std::ostringstream msg;
    msg << "parameter outside the " << to_string(family.kind) << " box";
    throw DomainError(msg.str());
  }
  if (values.empty()) throw DomainError("value support is empty");
  std::vector<double> logw(values.size());
  const double H = family.H;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    switch (family.kind) {
      case FamilyKind::truncated_normal: {
        const double z = (v - theta[0]) / theta[1];
        logw[k] = -z * z;
        break;
      }
      case FamilyKind::truncated_poisson:
        if (v < 0.0) throw DomainError("poisson support must be nonnegative");
        logw[k] = v * std::log(theta[0]) - theta[0] - std::lgamma(v + 1.0);
        break;
      case FamilyKind::binomial:
        if (v < 0.0 || v > H + 1e-9) {
          throw DomainError("binomial support must lie in [0, H]");
        }
        logw[k] = std::lgamma(H + 1.0) - std::lgamma(v + 1.0) -
                  std::lgamma(H - v + 1.0) + v * std::log(theta[0]) +
                  (H - v) * std::log1p(-theta[0]);
        break;
      case FamilyKind::truncated_geometric:
        if (v < 0.0) throw DomainError("geometric support must be nonnegative");
        logw[k] = std::log(theta[0]) + v * std::log1p(-theta[0]);
        break;
    }
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  ValueDistribution out(values.size());
  double total = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::exp(logw[k] - top);
    total += out[k];
  }
  for (double& p : out) p /= total;
  return out;
}

MomentSummary moment_summary(const Family& family, const Theta& theta,
                             const std::vector<double>& values) {
  const auto pi = density(family, theta, values);
  MomentSummary out;
  for (std::size_t k = 0; k < pi.size(); ++k) out.mean += pi[k] * values[k];
  double var = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    const double d = values[k] - out.mean;
    var += pi[k] * d * d;
  }
  out.sd = std::sqrt(var);
  return out;
}

ParametricEvaluator::ParametricEvaluator(const BidDistribution& phi,
                                         const SupportGrid& grid,
                                         const UtilityKernel& u, Family family)
    : grid_(grid), family_(std::move(family)), bce_(build_bce_cv(phi, grid, u)) {
  if (family_.H != grid.H()) {
    throw DomainError("family and grid disagree on H");
  }
  ValueDistribution uniform(grid.num_values(), 1.0 / static_cast<double>(grid.num_values()));
  pin_marginals(bce_, uniform);
  solver_ = std::make_unique<lp::MinimaxSolver>(bce_.system);
}

lp::MinimaxResult ParametricEvaluator::solve(const Theta& theta) {
  update_pinned_marginals(*solver_, bce_, density(family_, theta, grid_.values()));
  return solver_->solve();
}

double ParametricEvaluator::minimax(const Theta& theta) {
  return solve(theta).value;
}

std::vector<double> parametric_minimax_values(const BidDistribution& phi,
                                              const SupportGrid& grid,
                                              const UtilityKernel& u,
                                              const Family& family,
                                              const ThetaGrid& thetas) {
  for (const auto& t : thetas.points) {
    if (!family.contains(t)) throw DomainError("theta grid leaves the family box");
  }
  std::vector<double> values(thetas.size());
  parallel_for(thetas.size(), [&](std::size_t begin, std::size_t end) {
    ParametricEvaluator eval(phi, grid, u, family);
    for (std::size_t k = begin; k < end; ++k) values[k] = eval.minimax(thetas.points[k]);
  });
  return values;
}

IdentifiedSet threshold_set(const std::vector<double>& values, double tolerance,
                            std::string method) {
  if (std::isnan(tolerance)) throw DomainError("tolerance is NaN");
  IdentifiedSet out;
  out.minimax = values;
  out.tolerance = tolerance;
  out.method = std::move(method);
  out.mask.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    out.mask[k] = values[k] <= tolerance ? 1 : 0;
  }
  return out;
}

IdentifiedSet parametric_identified_set(const BidDistribution& phi,
                                        const SupportGrid& grid,
                                        const UtilityKernel& u,
                                        const Family& family,
                                        const ThetaGrid& thetas,
                                        double tolerance) {
  return threshold_set(parametric_minimax_values(phi, grid, u, family, thetas),
                       tolerance, "parametric");
}

}  // namespace bceid
