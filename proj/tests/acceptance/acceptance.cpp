#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bceid/bounds.hpp"
#include "bceid/inference.hpp"
#include "bceid/montecarlo.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

using namespace bceid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

SupportGrid tiny_grid() { return SupportGrid::integer(2, 2, 1); }

BidDistribution tiny_phi() { return BidDistribution::point_mass({1, 1}); }

/// Probability vectors on a 1/steps simplex grid of the given dimension.
void simplex_grid(std::size_t dim, int steps, const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<int> counts(dim, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == dim) {
      counts[i] = left;
      std::vector<double> p(dim);
      for (std::size_t k = 0; k < dim; ++k) p[k] = static_cast<double>(counts[k]) / steps;
      fn(p);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, steps);
}

bool contains(const Interval& outer, const Interval& inner, double slack = 1e-9) {
  if (inner.empty) return true;
  if (outer.empty) return false;
  return outer.lower <= inner.lower + slack && outer.upper >= inner.upper - slack;
}

Outcome criterion1() {
  auto g = tiny_grid();
  auto u = UtilityKernel::first_price();
  auto phi = tiny_phi();
  auto iv = moment_bounds_cv(g.values(), phi, g, u);
  bool ok = !iv.empty && std::abs(iv.lower - 1.0) < 1e-6 && std::abs(iv.upper - 2.0) < 1e-6;
  // Hand oracle: with both bidders at 1 a bidder gets (E[v] - 1) / 2 from
  // the tie and 0 from deviating to 0, so membership holds iff E[v] >= 1.
  int points = 0;
  int mismatches = 0;
  simplex_grid(3, 20, [&](const std::vector<double>& pi) {
    ++points;
    const double mean = pi[1] + 2.0 * pi[2];
    const bool oracle = mean >= 1.0 - 1e-12;
    if (membership_cv(pi, phi, g, u).member != oracle) ++mismatches;
  });
  ok = ok && mismatches == 0;
  return {ok, "bounds " + fmt(iv.lower) + "," + fmt(iv.upper) + "; " + std::to_string(points) +
                  " simplex points, " + std::to_string(mismatches) + " mismatches"};
}

Outcome criterion2() {
  auto u = UtilityKernel::first_price();
  const double b_star = 5.0;
  const double H = 20.0;
  std::vector<Interval> ivs;
  std::string detail;
  for (double step : {1.0, 0.5, 0.25}) {
    auto g = SupportGrid::uniform(2, H, step);
    const auto b = static_cast<std::size_t>(std::llround(b_star / step));
    ivs.push_back(moment_bounds_cv(g.values(), BidDistribution::point_mass({b, b}), g, u));
    detail += "step " + fmt(step) + " [" + fmt(ivs.back().lower) + "," + fmt(ivs.back().upper) + "] ";
  }
  bool ok = !ivs[0].empty && std::abs(ivs[0].lower - 5.0) < 1e-6 && std::abs(ivs[0].upper - 7.0) < 1e-6;
  for (std::size_t k = 1; k < ivs.size(); ++k) {
    ok = ok && contains(ivs[k - 1], ivs[k]) && ivs[k].upper - ivs[k].lower < ivs[k - 1].upper - ivs[k - 1].lower;
    ok = ok && std::abs(ivs[k].lower - b_star) <= std::abs(ivs[k - 1].lower - b_star) + 1e-9;
  }
  auto g = SupportGrid::integer(2, 20, 20);
  auto c = bbm_vs_sharp_report(BidDistribution::point_mass({5, 5}), g, u);
  ok = ok && std::abs(c.two_point_mean - 8.75) < 1e-12;
  detail += "two-point mean " + fmt(c.two_point_mean) + " ratio to sharp upper " + fmt(c.two_point_ratio);
  return {ok, detail};
}

Outcome criterion3() {
  const double H = 20.0;
  const std::size_t n = 2;
  const std::size_t B = 21;
  const std::size_t V = 21;
  const double delta = 0.1;
  const std::size_t N = 10000;
  auto s = hoeffding_tolerances(H, n, B, V, 1, delta, N, ToleranceMode::nonparam_moment);
  const double sigma = 2.0 * H * std::sqrt(std::log(4.0 * n * B * B / delta) / N);
  const double eps = 2.0 * H * std::sqrt(std::log(4.0 / delta) / N);
  bool ok = std::abs(s.sigma - 1.2944) < 1e-3 && std::abs(s.epsilon - 0.7683) < 1e-3 &&
            std::abs(s.sigma - sigma) < 1e-12 && std::abs(s.epsilon - eps) < 1e-12;

  double worst = 0.0;
  for (std::size_t thetas : {1u, 99u, 820u}) {
    for (double d : {0.01, 0.1, 0.5}) {
      for (std::size_t NN : {100u, 10000u}) {
        auto b = bernstein_tolerances(H, n, B, V, thetas, d, NN);
        const double M = static_cast<double>(n * B * B + V);
        const double L = std::log(2.0 * thetas * M / d);
        worst = std::max(worst, std::abs(b.lambda - std::sqrt(2.0 * L)));
        worst = std::max(worst, std::abs(b.sigma - 14.0 * H * L / (3.0 * (NN - 1.0))));
      }
    }
  }
  ok = ok && worst <= 1e-12;
  return {ok, "sigma " + fmt(s.sigma) + " epsilon " + fmt(s.epsilon) +
                  "; Bernstein max deviation " + fmt(worst)};
}

Outcome criterion4() {
  auto g = SupportGrid::integer(2, 20, 20);
  auto u = UtilityKernel::first_price();
  bool ok = true;
  std::string detail;
  for (auto kind : {FamilyKind::truncated_normal, FamilyKind::truncated_poisson,
                    FamilyKind::binomial, FamilyKind::truncated_geometric}) {
    auto fam = Family::make(kind, 20.0);
    const auto theta0 = default_theta0(kind);
    auto pi = density(fam, theta0, g.values());
    auto phi = generate_bce(pi, g, u);
    auto m = membership_cv(pi, phi, g, u);
    auto thetas = ThetaGrid::default_for(fam);
    auto set = parametric_identified_set(phi, g, u, fam, thetas, lp::kFeasibilityTolerance);
    const auto idx = thetas.find(theta0);
    const bool in = idx >= 0 && set.mask[static_cast<std::size_t>(idx)];
    ok = ok && m.member && in;
    detail += to_string(kind) + (m.member && in ? " ok " : " FAILED ") + "(" +
              std::to_string(set.count()) + "/" + std::to_string(thetas.size()) + ") ";
  }
  return {ok, detail};
}

Outcome criterion5() {
  auto g = tiny_grid();
  auto u = UtilityKernel::first_price();
  const double delta = 0.1;
  const std::size_t N = 1000;
  auto coverage = [&](const BidDistribution& phi, std::uint64_t base) {
    auto pop = moment_bounds_cv(g.values(), phi, g, u);
    int hits = 0;
    for (int r = 0; r < 100; ++r) {
      auto sample = sample_bids(phi, N, base + static_cast<std::uint64_t>(r));
      auto iv = nonparam_moment_interval(sample, g.values(), g, u, delta);
      if (contains(iv, pop)) ++hits;
    }
    return std::make_pair(hits, pop);
  };
  auto [point_hits, point_pop] = coverage(tiny_phi(), 100);
  auto spread = generate_bce({0.2, 0.3, 0.5}, g, u, {SelectorKind::random_objective, 4});
  auto [spread_hits, spread_pop] = coverage(spread, 500);
  const bool ok = point_hits >= 90 && spread_hits >= 90 && std::abs(point_pop.lower - 1.0) < 1e-6 &&
                  std::abs(point_pop.upper - 2.0) < 1e-6;
  return {ok, "point mass " + std::to_string(point_hits) + "/100 cover [1,2]; " +
                  std::to_string(spread.size()) + "-profile BCE " + std::to_string(spread_hits) +
                  "/100 cover [" + fmt(spread_pop.lower) + "," + fmt(spread_pop.upper) + "]"};
}

Outcome criterion6() {
  const int H = 20;
  auto g = SupportGrid::integer(2, H, H);
  auto u = UtilityKernel::first_price();
  auto fam = Family::make(FamilyKind::truncated_normal, H);
  auto thetas = ThetaGrid::default_for(fam);
  auto pi = density(fam, default_theta0(FamilyKind::truncated_normal), g.values());
  auto phi = generate_bce(pi, g, u);
  auto pop = parametric_identified_set(phi, g, u, fam, thetas, lp::kFeasibilityTolerance);
  int hits = 0;
  std::size_t largest = 0;
  for (int r = 0; r < 50; ++r) {
    auto sample = sample_bids(phi, 500, 1000 + static_cast<std::uint64_t>(r));
    SubsampleOptions opt;
    opt.draws = 50;
    opt.subsample_size = 125;
    opt.alpha = 0.05;
    opt.seed = 2000 + static_cast<std::uint64_t>(r);
    auto res = subsampling_confidence_set(sample, g, u, fam, thetas, opt);
    if (pop.subset_of(res.set)) ++hits;
    largest = std::max(largest, res.set.count());
  }
  return {hits >= 42, std::to_string(hits) + "/50 contain the population set (" +
                          std::to_string(pop.count()) + " of " + std::to_string(thetas.size()) +
                          " points); largest confidence set " + std::to_string(largest)};
}

/// Independent second-price payoff with uniform tie splitting on integer bids.
double sp_payoff(int i, const std::array<int, 2>& b, double v) {
  const int mine = b[i];
  const int other = b[1 - i];
  if (mine > other) return v - other;
  if (mine == other) return 0.5 * (v - other);
  return 0.0;
}

Outcome criterion7() {
  auto g = tiny_grid();
  auto fp = UtilityKernel::first_price();
  auto sp = UtilityKernel::second_price();
  auto phi = tiny_phi();
  auto iv = counterfactual_bounds(phi, MetricFn::revenue(g, sp), fp, sp, g);

  // Brute force over psi(v, b1, b2) on a 0.05 grid: the value marginal must
  // lie in the identified set (mean >= 1) and psi must be obedient under the
  // second-price rule. Cell order: v major, then b1, then b2.
  const int steps = 20;
  double lo = 1e9;
  double hi = -1e9;
  std::size_t feasible = 0;
  std::array<int, 12> c{};
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    if (k == 11) {
      c[11] = left;
      double mean = 0.0;
      for (int v = 0; v < 3; ++v) {
        for (int j = 0; j < 4; ++j) mean += v * c[v * 4 + j];
      }
      if (mean < steps - 1e-9) return;
      for (int i = 0; i < 2; ++i) {
        for (int rec_b = 0; rec_b < 2; ++rec_b) {
          const int dev = 1 - rec_b;
          double gain = 0.0;
          for (int v = 0; v < 3; ++v) {
            for (int b1 = 0; b1 < 2; ++b1) {
              for (int b2 = 0; b2 < 2; ++b2) {
                std::array<int, 2> b{b1, b2};
                if (b[i] != rec_b) continue;
                const int mass = c[v * 4 + b1 * 2 + b2];
                if (!mass) continue;
                std::array<int, 2> d = b;
                d[i] = dev;
                gain += mass * (sp_payoff(i, d, v) - sp_payoff(i, b, v));
              }
            }
          }
          if (gain > 1e-9) return;
        }
      }
      ++feasible;
      double revenue = 0.0;
      for (int v = 0; v < 3; ++v) revenue += c[v * 4 + 3];
      revenue /= steps;
      lo = std::min(lo, revenue);
      hi = std::max(hi, revenue);
      return;
    }
    for (int x = 0; x <= left; ++x) {
      c[k] = x;
      rec(k + 1, left - x);
    }
  };
  rec(0, steps);

  bool ok = !iv.empty && feasible > 0 && std::abs(iv.lower - lo) <= 0.05 + 1e-9 &&
            std::abs(iv.upper - hi) <= 0.05 + 1e-9;
  bool exact = true;
  for (double cval : {0.0, 0.7, 1.5}) {
    auto k = counterfactual_bounds(phi, MetricFn::constant(cval), fp, sp, g);
    exact = exact && !k.empty && k.lower == cval && k.upper == cval;
  }
  return {ok && exact, "LP [" + fmt(iv.lower) + "," + fmt(iv.upper) + "], brute force [" +
                           fmt(lo) + "," + fmt(hi) + "] over " + std::to_string(feasible) +
                           " feasible grid points; constant metric exact: " + (exact ? "yes" : "no")};
}

Outcome criterion8() {
  auto G = [](double b) { return 2.0 * b; };
  auto gd = [](double) { return 2.0; };
  double worst = 0.0;
  for (int k = 1; k <= 9; ++k) {
    const double b = 0.05 * k;
    worst = std::max(worst, std::abs(ipv_invert(b, G, gd) - 2.0 * b));
  }
  return {worst < 1e-9, "max |v - 2b| = " + fmt(worst)};
}

Outcome criterion9() {
  auto g = SupportGrid::integer(2, 6, 6);
  auto u = UtilityKernel::first_price();
  auto fam = Family::make(FamilyKind::truncated_normal, 6.0);
  auto thetas = ThetaGrid::default_for(fam);
  auto pi = density(fam, {2.0, 1.0}, g.values());
  auto phi = generate_bce(pi, g, u, {SelectorKind::max_entropy_surrogate, 3});
  auto sample = sample_bids(phi, 300, 11);
  auto phi_n = empirical_distribution(sample);
  std::vector<std::string> failed;
  std::size_t checks = 0;
  auto expect = [&](bool cond, const std::string& what) {
    ++checks;
    if (!cond) failed.push_back(what);
  };

  const std::vector<double> tols{0.0, 1e-3, 1e-2, 0.1, 0.5};
  for (std::size_t k = 1; k < tols.size(); ++k) {
    const double a = tols[k - 1];
    const double b = tols[k];
    expect(contains(moment_bounds_cv(g.values(), phi_n, g, u, b),
                    moment_bounds_cv(g.values(), phi_n, g, u, a)),
           "moment bounds");
    expect(contains(ipv_symmetric_moment_bounds(g.values(), phi_n, g, u, b),
                    ipv_symmetric_moment_bounds(g.values(), phi_n, g, u, a)),
           "symmetric IPV bounds");
    auto sp = UtilityKernel::second_price();
    expect(contains(counterfactual_bounds(phi_n, MetricFn::revenue(g, sp), u, sp, g, b),
                    counterfactual_bounds(phi_n, MetricFn::revenue(g, sp), u, sp, g, a)),
           "counterfactual bounds");
    const double ma = std::max(a, lp::kFeasibilityTolerance);
    const double mb = std::max(b, lp::kFeasibilityTolerance);
    auto set_a = parametric_identified_set(phi_n, g, u, fam, thetas, ma);
    auto set_b = parametric_identified_set(phi_n, g, u, fam, thetas, mb);
    expect(set_a.subset_of(set_b), "parametric set");
    expect(threshold_set(set_a.minimax, a, "level").subset_of(threshold_set(set_a.minimax, b, "level")),
           "heatmap level sets");
    bool member_ok = true;
    simplex_grid(g.num_values(), 2, [&](const std::vector<double>& p) {
      if (membership_cv(p, phi_n, g, u, ma).member && !membership_cv(p, phi_n, g, u, mb).member) {
        member_ok = false;
      }
    });
    expect(member_ok, "membership");
    auto boot_a = bayesian_bootstrap_sets(sample, g, u, fam, thetas, ma, 5, 9);
    auto boot_b = bayesian_bootstrap_sets(sample, g, u, fam, thetas, mb, 5, 9);
    for (std::size_t d = 0; d < boot_a.size(); ++d) expect(boot_a[d].subset_of(boot_b[d]), "bootstrap sets");
    auto bi_a = bayesian_bootstrap_intervals(sample, g.values(), g, u, a, 5, 9);
    auto bi_b = bayesian_bootstrap_intervals(sample, g.values(), g, u, b, 5, 9);
    for (std::size_t d = 0; d < bi_a.size(); ++d) expect(contains(bi_b[d], bi_a[d]), "bootstrap intervals");
  }

  const std::vector<double> deltas{0.5, 0.2, 0.1, 0.05, 0.01};
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    const double big = deltas[k - 1];
    const double small = deltas[k];
    expect(contains(nonparam_moment_interval(sample, g.values(), g, u, small),
                    nonparam_moment_interval(sample, g.values(), g, u, big)),
           "nonparametric moment interval");
    expect(parametric_hoeffding_set(sample, g, u, fam, thetas, big)
               .subset_of(parametric_hoeffding_set(sample, g, u, fam, thetas, small)),
           "Hoeffding set");
    expect(bernstein_set(sample, g, u, fam, thetas, big)
               .subset_of(bernstein_set(sample, g, u, fam, thetas, small)),
           "Bernstein set");
  }

  const std::vector<double> alphas{0.2, 0.1, 0.05, 0.01};
  IdentifiedSet prev;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    SubsampleOptions opt;
    opt.alpha = alphas[k];
    opt.seed = 5;
    auto next = subsampling_confidence_set(sample, g, u, fam, thetas, opt).set;
    if (k > 0) expect(prev.subset_of(next), "subsampling set");
    prev = std::move(next);
  }

  std::set<std::string> names(failed.begin(), failed.end());
  std::string detail = std::to_string(checks - failed.size()) + "/" + std::to_string(checks) + " checks";
  for (const auto& n : names) detail += "; violated: " + n;
  return {failed.empty(), detail};
}

Outcome criterion10() {
  auto g = SupportGrid::integer(2, 10, 10);
  auto u = UtilityKernel::first_price();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  int dominated = 0;
  double worst_gap = -1e9;
  for (int t = 0; t < 20; ++t) {
    ValueDistribution pi(g.num_values());
    double total = 0.0;
    for (double& p : pi) total += (p = w(rng));
    for (double& p : pi) p /= total;
    auto phi = generate_bce(pi, g, u, {SelectorKind::random_objective, static_cast<std::uint64_t>(t)});
    auto c = bbm_vs_sharp_report(phi, g, u);
    const double bound = bbm_mean_upper(c.revenue, g.H(), 2, BbmVariant::general) + 2.0 * g.bid_step();
    if (!c.sharp.empty && c.sharp.upper <= bound + 1e-9) ++dominated;
    worst_gap = std::max(worst_gap, c.sharp.upper - bound);
  }
  return {dominated == 20, std::to_string(dominated) + "/20 dominated; max(U - bound) = " + fmt(worst_gap)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tiny-instance sharp bounds (limit 1 s)", criterion1},
      {"singleton example (limit 5 s)", criterion2},
      {"tolerance formulas", criterion3},
      {"generator round trip (limit 120 s)", criterion4},
      {"Hoeffding coverage (limit 120 s)", criterion5},
      {"subsampling coverage (limit 600 s)", criterion6},
      {"counterfactual oracle", criterion7},
      {"IPV inversion", criterion8},
      {"monotonicity suite", criterion9},
      {"closed-form dominance", criterion10},
  };
  const std::array<double, 10> limits{1.0, 5.0, 0.0, 120.0, 120.0, 600.0, 0.0, 0.0, 0.0, 0.0};

  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limits[k] > 0.0 && secs > limits[k]) {
      out.pass = false;
      out.detail += "; over time limit";
    }
    std::printf("%s %d %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
