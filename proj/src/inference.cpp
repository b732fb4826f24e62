#include "bceid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>

#include "bceid/error.hpp"
#include "bceid/parallel.hpp"
#include "bceid/random.hpp"

namespace bceid {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

ToleranceSchedule base_schedule(double H, std::size_t players, std::size_t num_bids,
                                std::size_t num_values, std::size_t num_thetas,
                                double delta, std::size_t N) {
  check_delta(delta);
  if (!(H >= 0.0) || !std::isfinite(H)) throw DomainError("H must be finite and >= 0");
  if (N == 0) throw DomainError("sample size must be positive");
  if (players == 0 || num_bids == 0) throw DomainError("empty game");
  ToleranceSchedule s;
  s.delta = delta;
  s.H = H;
  s.players = players;
  s.num_bids = num_bids;
  s.num_values = num_values;
  s.num_thetas = num_thetas;
  s.sample_size = N;
  return s;
}

std::vector<char> argmin_mask(const std::vector<double>& values) {
  std::vector<char> mask(values.size(), 0);
  if (values.empty()) return mask;
  const double best = *std::min_element(values.begin(), values.end());
  for (std::size_t k = 0; k < values.size(); ++k) {
    mask[k] = values[k] <= best + 1e-9 ? 1 : 0;
  }
  return mask;
}

// Per-form mean F_j(x) and standard error sqrt(Var_N(f_j) / N) under phi_N.
void form_moments(const BceSystem& bce, const BidDistribution& phi, std::size_t N,
                  const std::vector<double>& x, std::vector<double>& mean,
                  std::vector<double>& se) {
  const auto& forms = bce.system.forms;
  const auto& probs = phi.probs();
  mean.assign(forms.size(), 0.0);
  se.assign(forms.size(), 0.0);
  std::vector<double> h(probs.size(), 0.0);
  std::vector<char> seen(probs.size(), 0);
  std::vector<std::size_t> touched;
  const double scale = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 0.0;
  for (std::size_t j = 0; j < forms.size(); ++j) {
    const auto& f = forms[j];
    const double c = f.constant;
    double m = c;
    touched.clear();
    for (const auto& t : f.terms) {
      if (t.profile < 0) throw DomainError("form term carries no bid profile");
      const auto s = static_cast<std::size_t>(t.profile);
      if (!seen[s]) {
        seen[s] = 1;
        touched.push_back(s);
      }
      h[s] += t.raw * x[t.var];
      m += t.coef * x[t.var];
    }
    double second = c * c;
    for (std::size_t s : touched) {
      const double g = c + h[s];
      second += probs[s] * (g * g - c * c);
      h[s] = 0.0;
      seen[s] = 0;
    }
    mean[j] = m;
    const double var = std::max(0.0, scale * (second - m * m));
    se[j] = N > 0 ? std::sqrt(var / static_cast<double>(N)) : 0.0;
  }
}

double penalized_from_moments(const std::vector<double>& mean,
                              const std::vector<double>& se, double lambda) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mean.size(); ++j) {
    best = std::max(best, mean[j] - lambda * se[j]);
  }
  return best;
}

BidSample subsample(const BidSample& sample, std::size_t size, std::uint64_t seed,
                    std::uint64_t task) {
  auto rng = task_rng(seed, task);
  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  BidSample out;
  out.seed = seed;
  out.draws.reserve(size);
  for (std::size_t k = 0; k < size; ++k) out.draws.push_back(sample.draws[order[k]]);
  return out;
}

}  // namespace

void BidSample::validate(const SupportGrid& grid) const {
  if (draws.empty()) throw DomainError("bid sample is empty");
  for (const auto& d : draws) grid.check_profile(d);
}

BidDistribution empirical_distribution(const BidSample& sample) {
  if (sample.draws.empty()) throw DomainError("bid sample is empty");
  std::map<BidProfile, double> counts;
  for (const auto& d : sample.draws) counts[d] += 1.0;
  std::vector<BidProfile> support;
  std::vector<double> weights;
  support.reserve(counts.size());
  weights.reserve(counts.size());
  for (auto& [profile, count] : counts) {
    support.push_back(profile);
    weights.push_back(count);
  }
  return BidDistribution::normalized(std::move(support), std::move(weights),
                                     Origin::empirical, sample.size());
}

ToleranceSchedule hoeffding_tolerances(double H, std::size_t players,
                                       std::size_t num_bids,
                                       std::size_t num_values,
                                       std::size_t num_thetas, double delta,
                                       std::size_t N, ToleranceMode mode) {
  auto s = base_schedule(H, players, num_bids, num_values, num_thetas, delta, N);
  s.mode = mode;
  const double n = static_cast<double>(players);
  const double B2 = static_cast<double>(num_bids) * static_cast<double>(num_bids);
  const double root_n = std::sqrt(static_cast<double>(N));
  switch (mode) {
    case ToleranceMode::nonparam_moment:
      s.num_constraints = players * num_bids * num_bids;
      s.sigma = 2.0 * H * std::sqrt(std::log(4.0 * n * B2 / delta)) / root_n;
      s.epsilon = 2.0 * H * std::sqrt(std::log(4.0 / delta)) / root_n;
      break;
    case ToleranceMode::parametric: {
      if (num_thetas == 0) throw DomainError("parameter grid is empty");
      s.num_constraints = players * num_bids * num_bids + num_values;
      const double M = static_cast<double>(s.num_constraints);
      s.sigma = 2.0 * H *
                std::sqrt(std::log(static_cast<double>(num_thetas) * M / delta)) / root_n;
      break;
    }
    case ToleranceMode::bernstein:
      return bernstein_tolerances(H, players, num_bids, num_values, num_thetas, delta, N);
  }
  return s;
}

ToleranceSchedule bernstein_tolerances(double H, std::size_t players,
                                       std::size_t num_bids,
                                       std::size_t num_values,
                                       std::size_t num_thetas, double delta,
                                       std::size_t N) {
  auto s = base_schedule(H, players, num_bids, num_values, num_thetas, delta, N);
  if (N < 2) throw DomainError("Bernstein tolerances need N >= 2");
  if (num_thetas == 0) throw DomainError("parameter grid is empty");
  s.mode = ToleranceMode::bernstein;
  s.num_constraints = players * num_bids * num_bids + num_values;
  const double L = std::log(2.0 * static_cast<double>(num_thetas) *
                            static_cast<double>(s.num_constraints) / delta);
  s.lambda = std::sqrt(2.0 * L);
  s.sigma = 14.0 * H * L / (3.0 * static_cast<double>(N - 1));
  return s;
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) throw DomainError("sample variance needs two values");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double x : values) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  return std::max(0.0, m2 / static_cast<double>(values.size() - 1));
}

Interval nonparam_moment_interval(const BidSample& sample,
                                  const std::vector<double>& m,
                                  const SupportGrid& grid,
                                  const UtilityKernel& u, double delta,
                                  std::optional<double> sigma_override) {
  sample.validate(grid);
  if (m.size() != grid.num_values()) throw DomainError("moment needs one entry per value");
  const double H = grid.H();
  for (double x : m) {
    if (!(std::abs(x) <= H + 1e-12)) throw DomainError("moment must map into [-H, H]");
  }
  const auto sched = hoeffding_tolerances(H, grid.players(), grid.num_bids(),
                                          grid.num_values(), 1, delta, sample.size(),
                                          ToleranceMode::nonparam_moment);
  const double sigma = sigma_override.value_or(sched.sigma);
  if (!(sigma >= 0.0)) throw DomainError("tolerance must be >= 0");
  const auto bce = build_bce_cv(empirical_distribution(sample), grid, u);
  Interval iv = moment_bounds(bce, m, sigma);
  iv.tolerance = sigma;
  if (iv.empty) {
    if (iv.diagnostic.empty()) iv.diagnostic = "relaxed system infeasible";
    return iv;
  }
  iv.lower -= sched.epsilon;
  iv.upper += sched.epsilon;
  return iv;
}

IdentifiedSet parametric_hoeffding_set(const BidSample& sample,
                                       const SupportGrid& grid,
                                       const UtilityKernel& u,
                                       const Family& family,
                                       const ThetaGrid& thetas, double delta) {
  sample.validate(grid);
  const auto sched = hoeffding_tolerances(grid.H(), grid.players(), grid.num_bids(),
                                          grid.num_values(), thetas.size(), delta,
                                          sample.size(), ToleranceMode::parametric);
  auto set = parametric_identified_set(empirical_distribution(sample), grid, u, family,
                                       thetas, sched.sigma);
  set.method = "hoeffding";
  return set;
}

std::string to_string(CandidateStrategy s) {
  switch (s) {
    case CandidateStrategy::plain:
      return "plain";
    case CandidateStrategy::reweighted:
      return "reweighted";
    case CandidateStrategy::alternating:
      return "alternating";
  }
  return "unknown";
}

CandidateStrategy candidate_strategy_from_string(const std::string& name) {
  if (name == "plain") return CandidateStrategy::plain;
  if (name == "reweighted") return CandidateStrategy::reweighted;
  if (name == "alternating") return CandidateStrategy::alternating;
  throw DomainError("unknown candidate strategy '" + name + "'");
}

double penalized_value(const BceSystem& bce, const BidDistribution& phi_n,
                       std::size_t N, const std::vector<double>& x, double lambda) {
  if (x.size() < bce.system.num_vars) throw DomainError("kernel is too short");
  std::vector<double> mean, se;
  form_moments(bce, phi_n, N, x, mean, se);
  return penalized_from_moments(mean, se, lambda);
}

IdentifiedSet bernstein_set(const BidSample& sample, const SupportGrid& grid,
                            const UtilityKernel& u, const Family& family,
                            const ThetaGrid& thetas, double delta,
                            const BernsteinOptions& options) {
  sample.validate(grid);
  const std::size_t N = sample.size();
  const auto sched = bernstein_tolerances(grid.H(), grid.players(), grid.num_bids(),
                                          grid.num_values(), thetas.size(), delta, N);
  const double sigma = options.sigma_override.value_or(sched.sigma);
  const double lambda = sched.lambda;
  const auto phi = empirical_distribution(sample);
  for (const auto& t : thetas.points) {
    if (!family.contains(t)) throw DomainError("theta grid leaves the family box");
  }

  IdentifiedSet out;
  out.method = "bernstein-" + to_string(options.strategy);
  out.tolerance = sigma;
  out.exclusion_heuristic = true;
  out.mask.assign(thetas.size(), 0);
  out.minimax.assign(thetas.size(), 0.0);
  out.witnesses.assign(thetas.size(), {});
  out.witness_values.assign(thetas.size(), 0.0);

  parallel_for(thetas.size(), [&](std::size_t begin, std::size_t end) {
    BceSystem bce = build_bce_cv(phi, grid, u);
    const auto uniform =
        ValueDistribution(grid.num_values(), 1.0 / static_cast<double>(grid.num_values()));
    pin_marginals(bce, uniform);
    lp::MinimaxSolver solver(bce.system);
    const std::size_t forms = bce.system.forms.size();
    std::vector<double> base(forms, 0.0), mean, se;

    for (std::size_t k = begin; k < end; ++k) {
      const auto pi = density(family, thetas.points[k], grid.values());
      for (std::size_t j = 0; j < forms; ++j) {
        base[j] = bce.system.forms[j].constant;
        solver.set_constant(j, base[j]);
      }
      for (std::size_t v = 0; v < pi.size(); ++v) {
        base[bce.density_begin + 2 * v] = pi[v];
        base[bce.density_begin + 2 * v + 1] = -pi[v];
      }
      update_pinned_marginals(solver, bce, pi);
      for (std::size_t j = 0; j < forms; ++j) bce.system.forms[j].constant = base[j];

      const auto plain = solver.solve();
      out.minimax[k] = plain.value;
      if (plain.point.empty()) {
        out.witness_values[k] = std::numeric_limits<double>::infinity();
        continue;
      }
      std::vector<double> best_x = plain.point;
      form_moments(bce, phi, N, best_x, mean, se);
      double best = penalized_from_moments(mean, se, lambda);
      const auto consider = [&](const std::vector<double>& x) {
        std::vector<double> m2, s2;
        form_moments(bce, phi, N, x, m2, s2);
        const double p = penalized_from_moments(m2, s2, lambda);
        if (p < best) {
          best = p;
          best_x = x;
        }
        return s2;
      };

      if (options.strategy != CandidateStrategy::plain && best > sigma) {
        const auto seed_se = se;
        for (double c : options.shift_ladder) {
          if (best <= sigma) break;
          auto shift_se = seed_se;
          const std::size_t rounds =
              options.strategy == CandidateStrategy::alternating ? options.alternating_rounds + 1
                                                                 : 1;
          for (std::size_t r = 0; r < rounds && best > sigma; ++r) {
            for (std::size_t j = 0; j < forms; ++j) solver.set_constant(j, base[j] - c * shift_se[j]);
            const auto cand = solver.solve();
            if (cand.point.empty()) break;
            shift_se = consider(cand.point);
          }
        }
        for (std::size_t j = 0; j < forms; ++j) solver.set_constant(j, base[j]);
      }
      out.witness_values[k] = best;
      if (best <= sigma) {
        out.mask[k] = 1;
        out.witnesses[k] = std::move(best_x);
      }
    }
  });
  return out;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw DomainError("quantile of an empty set");
  if (!(level > 0.0 && level <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = std::ceil(level * static_cast<double>(values.size()) - 1e-12);
  const auto idx = static_cast<std::size_t>(std::max(1.0, pos)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

SubsampleStat subsample_cutoff(const BidSample& sample, const SupportGrid& grid,
                               const UtilityKernel& u, const Family& family,
                               const ThetaGrid& thetas,
                               const std::vector<double>& full_values,
                               std::vector<char> theta_hat,
                               const SubsampleOptions& options) {
  sample.validate(grid);
  const std::size_t N = sample.size();
  const std::size_t s = options.subsample_size ? options.subsample_size : N / 4;
  if (s == 0 || s >= N) throw DomainError("subsample size must lie in [1, N)");
  if (options.draws == 0) throw DomainError("need at least one subsample");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw DomainError("alpha must lie in (0, 1)");
  }
  if (full_values.size() != thetas.size() || theta_hat.size() != thetas.size()) {
    throw DomainError("theta-hat and values must match the theta grid");
  }
  if (std::none_of(theta_hat.begin(), theta_hat.end(), [](char c) { return c != 0; })) {
    throw DomainError("theta-hat is empty");
  }

  SubsampleStat stat;
  stat.draws = options.draws;
  stat.subsample_size = s;
  stat.alpha = options.alpha;
  stat.refine_rounds = options.refine_rounds;
  if (options.draws < 10) {
    stat.warnings.push_back("fewer than 10 subsamples; the quantile is unstable");
  }

  const std::size_t k = options.draws;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> cache(k, std::vector<double>(thetas.size(), nan));
  std::vector<std::unique_ptr<ParametricEvaluator>> evals(k);
  const double root_s = std::sqrt(static_cast<double>(s));
  const double root_n = std::sqrt(static_cast<double>(N));

  auto evaluate = [&](const std::vector<char>& hat) {
    std::vector<double> stats(k, 0.0);
    parallel_for(k, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = begin; m < end; ++m) {
        double sup = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < thetas.size(); ++t) {
          if (!hat[t]) continue;
          if (std::isnan(cache[m][t])) {
            if (!evals[m]) {
              const auto sub = subsample(sample, s, options.seed, m);
              evals[m] = std::make_unique<ParametricEvaluator>(empirical_distribution(sub),
                                                               grid, u, family);
            }
            cache[m][t] = evals[m]->minimax(thetas.points[t]);
          }
          sup = std::max(sup, cache[m][t]);
        }
        stats[m] = root_s * sup;
      }
    });
    return stats;
  };
  auto record = [&](const std::vector<char>& hat) {
    stat.statistics = evaluate(hat);
    stat.cutoff = std::max(empirical_quantile(stat.statistics, 1.0 - options.alpha), 0.0) / root_n;
    stat.theta_hat = hat;
    return stat.cutoff;
  };
  const auto base = argmin_mask(full_values);
  auto level_set = [&](double tau) {
    auto hat = base;
    for (std::size_t t = 0; t < thetas.size(); ++t) {
      if (full_values[t] <= tau) hat[t] = 1;
    }
    return hat;
  };

  double tau = record(theta_hat);
  if (options.refine_rounds == 0) return stat;

  // Grow the level set until the cutoff it produces no longer exceeds the
  // level, then shrink back to the largest self-consistent level below it.
  double upper = tau;
  for (std::size_t round = 0; round < options.refine_rounds; ++round) {
    upper = 1.25 * tau;
    const double next = record(level_set(upper));
    if (next <= upper) {
      tau = next;
      break;
    }
    tau = next;
    upper = tau;
  }
  auto current = level_set(upper);
  for (std::size_t round = 0; round < options.refine_rounds; ++round) {
    auto next = level_set(tau);
    if (next == current) break;
    current = std::move(next);
    tau = record(current);
  }
  if (stat.theta_hat != level_set(tau)) {
    stat.warnings.push_back("cutoff refinement stopped before reaching a fixed point");
  }
  return stat;
}

SubsamplingResult subsampling_confidence_set(const BidSample& sample,
                                             const SupportGrid& grid,
                                             const UtilityKernel& u,
                                             const Family& family,
                                             const ThetaGrid& thetas,
                                             const SubsampleOptions& options) {
  sample.validate(grid);
  const auto full = parametric_minimax_values(empirical_distribution(sample), grid, u,
                                              family, thetas);
  SubsamplingResult out;
  out.stat = subsample_cutoff(sample, grid, u, family, thetas, full, argmin_mask(full),
                              options);
  out.set = threshold_set(full, out.stat.cutoff, "subsampling");
  return out;
}

std::vector<double> bootstrap_weights(std::size_t N, std::mt19937_64& rng) {
  if (N == 0) throw DomainError("bootstrap needs observations");
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(N);
  double total = 0.0;
  for (double& x : w) {
    x = expo(rng);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

BidDistribution weighted_distribution(const BidSample& sample,
                                      const std::vector<double>& weights) {
  if (weights.size() != sample.size()) throw DomainError("one weight per observation");
  return BidDistribution::normalized(sample.draws, weights, Origin::empirical,
                                     sample.size());
}

std::vector<IdentifiedSet> bayesian_bootstrap_sets(
    const BidSample& sample, const SupportGrid& grid, const UtilityKernel& u,
    const Family& family, const ThetaGrid& thetas, double tolerance,
    std::size_t draws, std::uint64_t seed) {
  sample.validate(grid);
  if (draws == 0) throw DomainError("bootstrap needs at least one draw");
  std::vector<IdentifiedSet> out(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    auto rng = task_rng(seed, d);
    const auto phi = weighted_distribution(sample, bootstrap_weights(sample.size(), rng));
    out[d] = parametric_identified_set(phi, grid, u, family, thetas, tolerance);
    out[d].method = "bayesian-bootstrap";
  }
  return out;
}

std::vector<Interval> bayesian_bootstrap_intervals(
    const BidSample& sample, const std::vector<double>& m,
    const SupportGrid& grid, const UtilityKernel& u, double tolerance,
    std::size_t draws, std::uint64_t seed) {
  sample.validate(grid);
  if (draws == 0) throw DomainError("bootstrap needs at least one draw");
  std::vector<Interval> out(draws);
  parallel_for(draws, [&](std::size_t begin, std::size_t end) {
    for (std::size_t d = begin; d < end; ++d) {
      auto rng = task_rng(seed, d);
      const auto phi = weighted_distribution(sample, bootstrap_weights(sample.size(), rng));
      out[d] = moment_bounds(build_bce_cv(phi, grid, u), m, tolerance);
    }
  });
  return out;
}

namespace {

void write_meta(std::ostream& out, const Metadata& meta) {
  for (const auto& [key, value] : meta) out << "# " << key << '=' << value << '\n';
}

}  // namespace

void write_set_csv(std::ostream& out, const Family& family, const ThetaGrid& thetas,
                   const IdentifiedSet& set, const Metadata& meta) {
  if (set.mask.size() != thetas.size()) throw DomainError("set does not match theta grid");
  write_meta(out, meta);
  out << "# method=" << set.method << '\n'
      << "# tolerance=" << std::setprecision(12) << set.tolerance << '\n'
      << "# feasibility_tolerance=" << set.feasibility_tolerance << '\n'
      << "# exclusion_heuristic=" << (set.exclusion_heuristic ? "true" : "false") << '\n';
  for (const auto& name : family.parameter_names()) out << name << ',';
  out << "minimax,tolerance,included\n";
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    for (double x : thetas.points[k]) out << x << ',';
    const double q = k < set.minimax.size() ? set.minimax[k] : 0.0;
    out << q << ',' << set.tolerance << ',' << (set.mask[k] ? 1 : 0) << '\n';
  }
}

void write_interval_csv(std::ostream& out, const std::vector<Interval>& rows,
                        const Metadata& meta) {
  write_meta(out, meta);
  out << std::setprecision(12) << "index,lower,upper,empty,tolerance\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out << k << ',' << r.lower << ',' << r.upper << ',' << (r.empty ? 1 : 0) << ','
        << r.tolerance << '\n';
  }
}

}  // namespace bceid
