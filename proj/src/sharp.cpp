#include "bceid/sharp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bceid/error.hpp"

namespace bceid {

BidDistribution::BidDistribution(std::vector<BidProfile> profiles,
                                 std::vector<double> probs, Origin origin,
                                 std::size_t sample_size)
    : origin_(origin), sample_size_(sample_size) {
  if (profiles.size() != probs.size()) {
    throw DomainError("bid distribution needs one probability per profile");
  }
  if (profiles.empty()) throw DomainError("bid distribution support is empty");
  const std::size_t n = profiles.front().size();
  if (n == 0) throw DomainError("bid profiles must be nonempty");
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (profiles[k].size() != n) {
      throw DomainError("bid profiles have inconsistent lengths");
    }
    if (!std::isfinite(probs[k]) || probs[k] < 0.0) {
      throw DomainError("bid probabilities must be finite and nonnegative");
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profiles[a] < profiles[b];
  });
  double total = 0.0;
  for (auto k : order) {
    total += probs[k];
    if (probs[k] == 0.0) continue;
    if (!support_.empty() && support_.back() == profiles[k]) {
      probs_.back() += probs[k];
    } else {
      support_.push_back(std::move(profiles[k]));
      probs_.push_back(probs[k]);
    }
  }
  if (support_.empty()) throw DomainError("bid distribution has no mass");
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "bid probabilities sum to " << total << ", not 1";
    throw DomainError(msg.str());
  }
}

BidDistribution BidDistribution::normalized(std::vector<BidProfile> profiles,
                                            std::vector<double> weights,
                                            Origin origin,
                                            std::size_t sample_size) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw DomainError("weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("weights have no mass");
  if (profiles.size() != weights.size()) {
    throw DomainError("bid distribution needs one weight per profile");
  }
  // Merge duplicates before scaling so long samples do not accumulate
  // rounding in the unit-mass check.
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profiles[a] < profiles[b];
  });
  std::vector<BidProfile> merged;
  std::vector<double> mass;
  for (auto k : order) {
    if (!merged.empty() && merged.back() == profiles[k]) {
      mass.back() += weights[k];
    } else {
      merged.push_back(std::move(profiles[k]));
      mass.push_back(weights[k]);
    }
  }
  double sum = 0.0;
  for (double w : mass) sum += w;
  for (double& w : mass) w /= sum;
  double check = 0.0;
  for (double w : mass) check += w;
  if (std::abs(check - 1.0) > 1e-12) {
    for (double& w : mass) w /= check;
  }
  return BidDistribution(std::move(merged), std::move(mass), origin,
                         sample_size);
}

BidDistribution BidDistribution::point_mass(BidProfile profile) {
  return BidDistribution({std::move(profile)}, {1.0});
}

std::ptrdiff_t BidDistribution::find(const BidProfile& profile) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), profile);
  if (it == support_.end() || *it != profile) return -1;
  return it - support_.begin();
}

double BidDistribution::prob(const BidProfile& profile) const {
  const auto k = find(profile);
  return k < 0 ? 0.0 : probs_[static_cast<std::size_t>(k)];
}

void BidDistribution::check_grid(const SupportGrid& grid) const {
  if (players() != grid.players()) {
    throw DomainError("bid distribution and grid disagree on the player count");
  }
  for (const auto& p : support_) grid.check_profile(p);
}

void check_value_distribution(const ValueDistribution& pi, std::size_t size) {
  if (pi.size() != size) {
    std::ostringstream msg;
    msg << "value distribution has " << pi.size() << " entries, expected " << size;
    throw DomainError(msg.str());
  }
  double total = 0.0;
  for (double p : pi) {
    if (!std::isfinite(p) || p < 0.0) {
      throw DomainError("value probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("value probabilities must sum to one");
  }
}

std::size_t IdentifiedSet::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

bool IdentifiedSet::subset_of(const IdentifiedSet& other) const {
  if (mask.size() != other.mask.size()) {
    throw DomainError("identified sets live on different grids");
  }
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k] && !other.mask[k]) return false;
  }
  return true;
}

namespace {

std::string br_label(std::size_t i, std::ptrdiff_t t, std::size_t a,
                     std::size_t dev) {
  std::ostringstream out;
  out << "br[" << i;
  if (t >= 0) out << ',' << t;
  out << ',' << a << ',' << dev << ']';
  return out.str();
}

std::string pv_label(std::size_t i, std::size_t v, std::size_t a,
                     std::size_t dev) {
  std::ostringstream out;
  out << "br[" << i << ",v" << v << ',' << a << ',' << dev << ']';
  return out.str();
}

// Payoff difference u_i(b; v) - u_i(b', b_-i; v) for every value index.
std::vector<double> payoff_gain(const SupportGrid& grid, const UtilityKernel& u,
                                std::size_t player, const BidProfile& profile,
                                std::size_t deviation) {
  BidProfile dev = profile;
  dev[player] = deviation;
  std::vector<double> out(grid.num_values());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = u.payoff(grid, player, profile, v) - u.payoff(grid, player, dev, v);
  }
  return out;
}

void add_blocks(ConstraintSystem& sys, std::size_t first, std::size_t count,
                std::size_t block_size) {
  for (std::size_t b = 0; b < count; ++b) {
    std::vector<std::size_t> vars(block_size);
    std::iota(vars.begin(), vars.end(), first + b * block_size);
    sys.add_block(std::move(vars));
  }
}

// Appends `src` to `dst`, shifting its variables; returns the offset.
std::size_t append_shifted(ConstraintSystem& dst, const ConstraintSystem& src) {
  const std::size_t offset = dst.add_variables(src.num_vars);
  for (std::size_t j = 0; j < src.num_vars; ++j) {
    dst.lower[offset + j] = src.lower[j];
    dst.upper[offset + j] = src.upper[j];
  }
  auto shift = [offset](LinearForm f) {
    for (auto& t : f.terms) t.var += offset;
    return f;
  };
  for (const auto& b : src.blocks) {
    std::vector<std::size_t> vars = b;
    for (auto& j : vars) j += offset;
    dst.blocks.push_back(std::move(vars));
  }
  for (const auto& f : src.forms) dst.forms.push_back(shift(f));
  for (const auto& f : src.equalities) dst.equalities.push_back(shift(f));
  for (const auto& f : src.marginals) dst.marginals.push_back(shift(f));
  return offset;
}

Interval solve_bounds(lp::LinearProgram program, const std::vector<double>& obj,
                      double tolerance) {
  Interval out;
  out.tolerance = tolerance;
  program.set_objective(obj, lp::Sense::minimize);
  lp::SimplexSolver solver(program);
  const auto lo = solver.solve();
  if (lo.status != lp::Status::optimal) {
    out.diagnostic = "constraint system is " + lp::to_string(lo.status);
    return out;
  }
  solver.set_objective(obj, lp::Sense::maximize);
  const auto hi = solver.solve();
  if (hi.status != lp::Status::optimal) {
    out.diagnostic = "maximization is " + lp::to_string(hi.status);
    return out;
  }
  out.lower = lo.objective;
  out.upper = std::max(hi.objective, lo.objective);
  out.empty = false;
  return out;
}

MembershipResult minimax_membership(const ConstraintSystem& sys,
                                    double tolerance) {
  const auto res = lp::minimax_value(sys);
  MembershipResult out;
  out.minimax = res.value;
  out.tolerance = tolerance;
  out.member = res.value <= tolerance;
  out.kernel = res.point;
  return out;
}

}  // namespace

BceSystem build_bce_general(const BidDistribution& phi, const SupportGrid& grid,
                            const UtilityKernel& u) {
  phi.check_grid(grid);
  const std::size_t n = grid.players();
  const std::size_t nV = grid.num_values();
  const std::size_t nB = grid.num_bids();
  std::size_t nT = 1;
  std::vector<std::size_t> radix(n);
  for (std::size_t i = n; i-- > 0;) {
    radix[i] = nT;
    nT *= grid.signals(i);
  }
  const std::size_t states = nV * nT;

  BceSystem out;
  out.layout = KernelLayout::general;
  out.block_size = states;
  auto& sys = out.system;
  sys.add_variables(phi.size() * states);
  add_blocks(sys, 0, phi.size(), states);

  std::vector<std::size_t> row_offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    row_offset[i + 1] = row_offset[i] + grid.signals(i) * nB * nB;
  }
  sys.forms.resize(row_offset[n]);
  for (std::size_t i = 0; i < n; ++i) {
    const bool singleton = grid.signals(i) == 1;
    for (std::size_t t = 0; t < grid.signals(i); ++t) {
      for (std::size_t a = 0; a < nB; ++a) {
        for (std::size_t d = 0; d < nB; ++d) {
          sys.forms[row_offset[i] + (t * nB + a) * nB + d].label =
              br_label(i, singleton ? -1 : static_cast<std::ptrdiff_t>(t), a, d);
        }
      }
    }
  }
  for (std::size_t s = 0; s < phi.size(); ++s) {
    const auto& prof = phi.support()[s];
    const double w = phi.probs()[s];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = prof[i];
      for (std::size_t d = 0; d < nB; ++d) {
        if (d == a) continue;
        const auto gain = payoff_gain(grid, u, i, prof, d);
        for (std::size_t k = 0; k < states; ++k) {
          const double raw = -gain[k / nT];
          if (raw == 0.0) continue;
          const std::size_t t = (k % nT) / radix[i] % grid.signals(i);
          sys.forms[row_offset[i] + (t * nB + a) * nB + d].terms.push_back(
              {s * states + k, w * raw, static_cast<std::int64_t>(s), raw});
        }
      }
    }
  }
  out.best_response_rows = sys.forms.size();
  out.density_begin = sys.forms.size();
  sys.marginals.resize(states);
  for (std::size_t k = 0; k < states; ++k) {
    auto& m = sys.marginals[k];
    m.label = "state[" + std::to_string(k) + "]";
    for (std::size_t s = 0; s < phi.size(); ++s) {
      m.terms.push_back({s * states + k, phi.probs()[s], static_cast<std::int64_t>(s), 1.0});
    }
  }
  return out;
}

BceSystem build_bce_cv(const BidDistribution& phi, const SupportGrid& grid,
                       const UtilityKernel& u) {
  phi.check_grid(grid);
  const std::size_t n = grid.players();
  const std::size_t nV = grid.num_values();
  const std::size_t nB = grid.num_bids();

  BceSystem out;
  out.layout = KernelLayout::cv;
  out.block_size = nV;
  auto& sys = out.system;
  sys.add_variables(phi.size() * nV);
  add_blocks(sys, 0, phi.size(), nV);
  sys.forms.resize(n * nB * nB);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < nB; ++a) {
      for (std::size_t d = 0; d < nB; ++d) {
        sys.forms[(i * nB + a) * nB + d].label = br_label(i, -1, a, d);
      }
    }
  }
  for (std::size_t s = 0; s < phi.size(); ++s) {
    const auto& prof = phi.support()[s];
    const double w = phi.probs()[s];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = prof[i];
      for (std::size_t d = 0; d < nB; ++d) {
        if (d == a) continue;
        const auto gain = payoff_gain(grid, u, i, prof, d);
        auto& form = sys.forms[(i * nB + a) * nB + d];
        for (std::size_t v = 0; v < nV; ++v) {
          if (gain[v] == 0.0) continue;
          const double raw = -gain[v];
          form.terms.push_back({s * nV + v, w * raw, static_cast<std::int64_t>(s), raw});
        }
      }
    }
  }
  out.best_response_rows = sys.forms.size();
  out.density_begin = sys.forms.size();
  sys.marginals.resize(nV);
  for (std::size_t v = 0; v < nV; ++v) {
    auto& m = sys.marginals[v];
    m.label = "state[" + std::to_string(v) + "]";
    for (std::size_t s = 0; s < phi.size(); ++s) {
      m.terms.push_back({s * nV + v, phi.probs()[s], static_cast<std::int64_t>(s), 1.0});
    }
  }
  return out;
}

BceSystem build_bce_pv(const BidDistribution& phi, const SupportGrid& grid,
                       const UtilityKernel& u) {
  phi.check_grid(grid);
  const std::size_t n = grid.players();
  const std::size_t nV = grid.num_values();
  const std::size_t nB = grid.num_bids();
  std::size_t states = 1;
  std::vector<std::size_t> radix(n);
  for (std::size_t i = n; i-- > 0;) {
    radix[i] = states;
    states *= nV;
  }

  BceSystem out;
  out.layout = KernelLayout::pv;
  out.block_size = states;
  auto& sys = out.system;
  sys.add_variables(phi.size() * states);
  add_blocks(sys, 0, phi.size(), states);
  sys.forms.resize(n * nV * nB * nB);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < nV; ++v) {
      for (std::size_t a = 0; a < nB; ++a) {
        for (std::size_t d = 0; d < nB; ++d) {
          sys.forms[((i * nV + v) * nB + a) * nB + d].label = pv_label(i, v, a, d);
        }
      }
    }
  }
  for (std::size_t s = 0; s < phi.size(); ++s) {
    const auto& prof = phi.support()[s];
    const double w = phi.probs()[s];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = prof[i];
      for (std::size_t d = 0; d < nB; ++d) {
        if (d == a) continue;
        const auto gain = payoff_gain(grid, u, i, prof, d);
        for (std::size_t k = 0; k < states; ++k) {
          const std::size_t vi = k / radix[i] % nV;
          if (gain[vi] == 0.0) continue;
          const double raw = -gain[vi];
          sys.forms[((i * nV + vi) * nB + a) * nB + d].terms.push_back(
              {s * states + k, w * raw, static_cast<std::int64_t>(s), raw});
        }
      }
    }
  }
  out.best_response_rows = sys.forms.size();
  out.density_begin = sys.forms.size();
  sys.marginals.resize(states);
  for (std::size_t k = 0; k < states; ++k) {
    auto& m = sys.marginals[k];
    m.label = "state[" + std::to_string(k) + "]";
    for (std::size_t s = 0; s < phi.size(); ++s) {
      m.terms.push_back({s * states + k, phi.probs()[s], static_cast<std::int64_t>(s), 1.0});
    }
  }
  return out;
}

BceSystem build_bce_ipv(const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u) {
  phi.check_grid(grid);
  const std::size_t n = grid.players();
  const std::size_t nV = grid.num_values();
  const std::size_t nB = grid.num_bids();
  const std::size_t S = phi.size();

  BceSystem out;
  out.layout = KernelLayout::ipv;
  out.block_size = nV;
  auto& sys = out.system;
  sys.add_variables(n * S * nV);
  add_blocks(sys, 0, n * S, nV);
  sys.forms.resize(n * nV * nB * nB);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < nV; ++v) {
      for (std::size_t a = 0; a < nB; ++a) {
        for (std::size_t d = 0; d < nB; ++d) {
          sys.forms[((i * nV + v) * nB + a) * nB + d].label = pv_label(i, v, a, d);
        }
      }
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    const auto& prof = phi.support()[s];
    const double w = phi.probs()[s];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = prof[i];
      for (std::size_t d = 0; d < nB; ++d) {
        if (d == a) continue;
        const auto gain = payoff_gain(grid, u, i, prof, d);
        for (std::size_t v = 0; v < nV; ++v) {
          if (gain[v] == 0.0) continue;
          const double raw = -gain[v];
          sys.forms[((i * nV + v) * nB + a) * nB + d].terms.push_back(
              {(i * S + s) * nV + v, w * raw, static_cast<std::int64_t>(s), raw});
        }
      }
    }
  }
  out.best_response_rows = sys.forms.size();
  out.density_begin = sys.forms.size();
  sys.marginals.resize(n * nV);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < nV; ++v) {
      auto& m = sys.marginals[i * nV + v];
      m.label = "rho[" + std::to_string(i) + "," + std::to_string(v) + "]";
      for (std::size_t s = 0; s < S; ++s) {
        m.terms.push_back({(i * S + s) * nV + v, phi.probs()[s],
                           static_cast<std::int64_t>(s), 1.0});
      }
    }
  }
  return out;
}

BceSystem build_bce_joint(const SupportGrid& grid, const UtilityKernel& u,
                          const std::vector<BidProfile>& profiles) {
  const std::size_t n = grid.players();
  const std::size_t nV = grid.num_values();
  const std::size_t nB = grid.num_bids();
  std::vector<BidProfile> cells = profiles;
  if (cells.empty()) {
    cells.reserve(grid.num_profiles());
    for (std::size_t c = 0; c < grid.num_profiles(); ++c) cells.push_back(grid.decode(c));
  }
  for (const auto& p : cells) grid.check_profile(p);

  BceSystem out;
  out.layout = KernelLayout::joint;
  out.block_size = nV * cells.size();
  auto& sys = out.system;
  sys.add_variables(cells.size() * nV);
  add_blocks(sys, 0, 1, cells.size() * nV);
  sys.forms.resize(n * nB * nB);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < nB; ++a) {
      for (std::size_t d = 0; d < nB; ++d) {
        sys.forms[(i * nB + a) * nB + d].label = br_label(i, -1, a, d);
      }
    }
  }
  for (std::size_t p = 0; p < cells.size(); ++p) {
    const auto& prof = cells[p];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = prof[i];
      for (std::size_t d = 0; d < nB; ++d) {
        if (d == a) continue;
        const auto gain = payoff_gain(grid, u, i, prof, d);
        auto& form = sys.forms[(i * nB + a) * nB + d];
        for (std::size_t v = 0; v < nV; ++v) {
          if (gain[v] == 0.0) continue;
          form.terms.push_back({p * nV + v, -gain[v], static_cast<std::int64_t>(p), -gain[v]});
        }
      }
    }
  }
  out.best_response_rows = sys.forms.size();
  out.density_begin = sys.forms.size();
  sys.marginals.resize(nV);
  for (std::size_t v = 0; v < nV; ++v) {
    auto& m = sys.marginals[v];
    m.label = "state[" + std::to_string(v) + "]";
    for (std::size_t p = 0; p < cells.size(); ++p) {
      m.terms.push_back({p * nV + v, 1.0, static_cast<std::int64_t>(p), 1.0});
    }
  }
  return out;
}

std::size_t pin_marginals(BceSystem& bce, const ValueDistribution& pi) {
  auto& sys = bce.system;
  check_value_distribution(pi, sys.marginals.size());
  const std::size_t first = sys.forms.size();
  for (std::size_t k = 0; k < pi.size(); ++k) {
    LinearForm f;
    f.constant = pi[k];
    f.label = "density[" + std::to_string(k) + "]";
    for (const auto& t : sys.marginals[k].terms) {
      f.terms.push_back({t.var, -t.coef, t.profile, -t.raw});
    }
    sys.add_relaxed_equality(f);
  }
  bce.density_begin = first;
  return first;
}

void update_pinned_marginals(lp::MinimaxSolver& solver, const BceSystem& bce,
                             const ValueDistribution& pi) {
  check_value_distribution(pi, bce.system.marginals.size());
  if (bce.density_begin + 2 * pi.size() > solver.system().forms.size()) {
    throw DomainError("system has no pinned marginals");
  }
  for (std::size_t k = 0; k < pi.size(); ++k) {
    solver.set_constant(bce.density_begin + 2 * k, pi[k]);
    solver.set_constant(bce.density_begin + 2 * k + 1, -pi[k]);
  }
}

ValueDistribution recover_marginal(const BceSystem& bce,
                                   const std::vector<double>& kernel) {
  if (kernel.size() < bce.system.num_vars) {
    throw DomainError("kernel is shorter than the variable count");
  }
  ValueDistribution out(bce.system.marginals.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = bce.system.marginals[k].evaluate(kernel);
  }
  return out;
}

Interval moment_bounds(const BceSystem& bce, const std::vector<double>& f,
                       double tolerance) {
  const auto& sys = bce.system;
  if (f.size() != sys.marginals.size()) {
    throw DomainError("moment function must have one entry per state");
  }
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
  for (double c : f) {
    if (!std::isfinite(c)) throw DomainError("moment function is not finite");
  }
  std::vector<double> obj(sys.num_vars, 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f[k] == 0.0) continue;
    for (const auto& t : sys.marginals[k].terms) obj[t.var] += f[k] * t.coef;
  }
  if (!std::isfinite(tolerance)) {
    ConstraintSystem loose = sys;
    loose.forms.clear();
    return solve_bounds(lp::to_linear_program(loose, 0.0), obj, tolerance);
  }
  return solve_bounds(lp::to_linear_program(sys, tolerance), obj, tolerance);
}

MembershipResult membership_cv(const ValueDistribution& pi,
                               const BidDistribution& phi,
                               const SupportGrid& grid, const UtilityKernel& u,
                               double tolerance) {
  auto bce = build_bce_cv(phi, grid, u);
  pin_marginals(bce, pi);
  return minimax_membership(bce.system, tolerance);
}

Interval moment_bounds_cv(const std::vector<double>& f,
                          const BidDistribution& phi, const SupportGrid& grid,
                          const UtilityKernel& u, double tolerance) {
  return moment_bounds(build_bce_cv(phi, grid, u), f, tolerance);
}

double support_function(const std::vector<double>& z,
                        const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u) {
  const auto iv = moment_bounds_cv(z, phi, grid, u);
  return iv.empty ? -std::numeric_limits<double>::infinity() : iv.upper;
}

MembershipResult membership_pv(const ValueDistribution& pi,
                               const BidDistribution& phi,
                               const SupportGrid& grid, const UtilityKernel& u,
                               double tolerance) {
  auto bce = build_bce_pv(phi, grid, u);
  pin_marginals(bce, pi);
  return minimax_membership(bce.system, tolerance);
}

MembershipResult membership_ipv(const std::vector<ValueDistribution>& rho,
                                const BidDistribution& phi,
                                const SupportGrid& grid, const UtilityKernel& u,
                                double tolerance) {
  if (rho.size() != grid.players()) {
    throw DomainError("one value marginal per player is required");
  }
  ValueDistribution stacked;
  for (const auto& r : rho) {
    check_value_distribution(r, grid.num_values());
    stacked.insert(stacked.end(), r.begin(), r.end());
  }
  auto bce = build_bce_ipv(phi, grid, u);
  auto& sys = bce.system;
  const std::size_t first = sys.forms.size();
  for (std::size_t k = 0; k < stacked.size(); ++k) {
    LinearForm f;
    f.constant = stacked[k];
    f.label = "density[" + std::to_string(k) + "]";
    for (const auto& t : sys.marginals[k].terms) {
      f.terms.push_back({t.var, -t.coef, t.profile, -t.raw});
    }
    sys.add_relaxed_equality(f);
  }
  bce.density_begin = first;
  return minimax_membership(sys, tolerance);
}

Interval ipv_symmetric_moment_bounds(const std::vector<double>& f,
                                     const BidDistribution& phi,
                                     const SupportGrid& grid,
                                     const UtilityKernel& u, double tolerance) {
  const std::size_t nV = grid.num_values();
  if (f.size() != nV) throw DomainError("moment function must have one entry per value");
  auto bce = build_bce_ipv(phi, grid, u);
  auto& sys = bce.system;
  const std::size_t rho = sys.add_variables(nV);
  add_blocks(sys, rho, 1, nV);
  for (std::size_t i = 0; i < grid.players(); ++i) {
    for (std::size_t v = 0; v < nV; ++v) {
      LinearForm g = sys.marginals[i * nV + v];
      g.label = "sym[" + std::to_string(i) + "," + std::to_string(v) + "]";
      g.terms.push_back({rho + v, -1.0, -1, 0.0});
      sys.equalities.push_back(std::move(g));
    }
  }
  std::vector<double> obj(sys.num_vars, 0.0);
  for (std::size_t v = 0; v < nV; ++v) obj[rho + v] = f[v];
  auto iv = solve_bounds(lp::to_linear_program(sys, tolerance), obj, tolerance);
  if (iv.empty) iv.diagnostic = "symmetric independent private values refuted";
  return iv;
}

SymmetryVerdict ipv_symmetry_test(const BidDistribution& phi,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u, double tolerance) {
  const std::vector<double> zero(grid.num_values(), 0.0);
  return ipv_symmetric_moment_bounds(zero, phi, grid, u, tolerance).empty
             ? SymmetryVerdict::refuted
             : SymmetryVerdict::consistent;
}

MembershipResult covariate_beta_membership(
    const std::vector<double>& beta, const std::vector<CovariateCell>& cells,
    const SupportGrid& grid, const UtilityKernel& u, double tolerance) {
  if (cells.empty()) throw DomainError("at least one covariate cell is required");
  ConstraintSystem sys;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    if (cell.covariates.size() != beta.size()) {
      throw DomainError("beta and covariate vectors differ in dimension");
    }
    const auto bce = build_bce_cv(cell.phi, grid, u);
    const std::size_t offset = append_shifted(sys, bce.system);
    LinearForm mean;
    mean.label = "mean[" + std::to_string(c) + "]";
    for (std::size_t k = 0; k < beta.size(); ++k) {
      mean.constant += cell.covariates[k] * beta[k];
    }
    const std::size_t nV = grid.num_values();
    for (std::size_t s = 0; s < cell.phi.size(); ++s) {
      for (std::size_t v = 0; v < nV; ++v) {
        const double val = grid.values()[v];
        if (val == 0.0) continue;
        mean.terms.push_back({offset + s * nV + v, -val * cell.phi.probs()[s],
                              static_cast<std::int64_t>(s), -val});
      }
    }
    sys.add_relaxed_equality(mean);
  }
  sys.marginals.clear();
  return minimax_membership(sys, tolerance);
}

BceSystem winning_bid_constraints(const std::vector<double>& cdf,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u,
                                  const std::vector<BidProfile>& profiles) {
  const std::size_t nB = grid.num_bids();
  if (cdf.size() != nB) throw DomainError("winning-bid cdf needs one entry per bid");
  for (std::size_t k = 0; k < nB; ++k) {
    if (!std::isfinite(cdf[k]) || cdf[k] < -1e-12 || cdf[k] > 1.0 + 1e-12 ||
        (k > 0 && cdf[k] < cdf[k - 1] - 1e-12)) {
      throw DomainError("winning-bid cdf must be nondecreasing in [0, 1]");
    }
  }
  if (std::abs(cdf.back() - 1.0) > 1e-9) {
    throw DomainError("winning-bid cdf must reach one at the top bid");
  }
  auto bce = build_bce_joint(grid, u, profiles);
  std::vector<BidProfile> cells = profiles;
  if (cells.empty()) {
    for (std::size_t c = 0; c < grid.num_profiles(); ++c) cells.push_back(grid.decode(c));
  }
  const std::size_t nV = grid.num_values();
  bce.density_begin = bce.system.forms.size();
  for (std::size_t x = 0; x < nB; ++x) {
    LinearForm f;
    f.constant = -cdf[x];
    f.label = "win_cdf[" + std::to_string(x) + "]";
    for (std::size_t p = 0; p < cells.size(); ++p) {
      const auto top = *std::max_element(cells[p].begin(), cells[p].end());
      if (top > x) continue;
      for (std::size_t v = 0; v < nV; ++v) {
        f.terms.push_back({p * nV + v, 1.0, static_cast<std::int64_t>(p), 1.0});
      }
    }
    bce.system.add_relaxed_equality(f);
  }
  return bce;
}

Interval winning_bid_moment_bounds(const std::vector<double>& f,
                                   const std::vector<double>& cdf,
                                   const SupportGrid& grid,
                                   const UtilityKernel& u, double tolerance) {
  return moment_bounds(winning_bid_constraints(cdf, grid, u), f, tolerance);
}

Interval counterfactual_bounds(const BidDistribution& phi,
                               const MetricFn& metric,
                               const UtilityKernel& current,
                               const UtilityKernel& alternative,
                               const SupportGrid& grid, double tolerance) {
  const std::size_t nV = grid.num_values();
  const auto cur = build_bce_cv(phi, grid, current);
  const auto alt = build_bce_joint(grid, alternative);
  ConstraintSystem sys;
  append_shifted(sys, cur.system);
  const std::size_t offset = append_shifted(sys, alt.system);
  sys.marginals.clear();
  for (std::size_t v = 0; v < nV; ++v) {
    LinearForm link;
    link.label = "link[" + std::to_string(v) + "]";
    for (const auto& t : alt.system.marginals[v].terms) {
      link.terms.push_back({offset + t.var, 1.0, t.profile, 1.0});
    }
    for (const auto& t : cur.system.marginals[v].terms) {
      link.terms.push_back({t.var, -t.coef, t.profile, -t.raw});
    }
    sys.equalities.push_back(std::move(link));
  }
  std::vector<double> obj(sys.num_vars, 0.0);
  bool constant = true;
  double first = 0.0;
  for (std::size_t p = 0; p < grid.num_profiles(); ++p) {
    const auto prof = grid.decode(p);
    for (std::size_t v = 0; v < nV; ++v) {
      const double w = metric(v, prof);
      if (p == 0 && v == 0) first = w;
      constant = constant && w == first;
      obj[offset + p * nV + v] = w;
    }
  }
  auto iv = solve_bounds(lp::to_linear_program(sys, tolerance), obj, tolerance);
  if (!iv.empty && constant) {
    // Total mass is one, so a constant metric has no spread.
    iv.lower = first;
    iv.upper = first;
  }
  if (iv.empty && iv.diagnostic.empty()) iv.diagnostic = "coupled system is infeasible";
  return iv;
}

}  // namespace bceid
