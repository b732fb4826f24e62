#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "bceid/error.hpp"
#include "bceid/montecarlo.hpp"

using namespace bceid;

TEST_CASE("generated BCE bids rationalize the generating values") {
  auto g = SupportGrid::integer(2, 6, 6);
  auto u = UtilityKernel::first_price();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    ValueDistribution pi(g.num_values());
    double total = 0.0;
    for (double& p : pi) total += (p = w(rng));
    for (double& p : pi) p /= total;
    for (auto kind : {SelectorKind::max_revenue, SelectorKind::min_revenue,
                      SelectorKind::random_objective, SelectorKind::max_entropy_surrogate}) {
      Selector sel{kind, static_cast<std::uint64_t>(trial), 3};
      auto phi = generate_bce(pi, g, u, sel);
      CHECK(membership_cv(pi, phi, g, u, 1e-8).member);
    }
  }
}

TEST_CASE("pooled value point mass and the tiny maximum-revenue vertex") {
  auto g = SupportGrid::integer(2, 2, 1);
  auto u = UtilityKernel::first_price();
  auto gen = generate_bce_joint({0.0, 0.0, 1.0}, g, u, {SelectorKind::max_revenue});
  CHECK(gen.objective == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(expected_revenue(gen.phi, g, u) == doctest::Approx(1.0).epsilon(1e-9));

  auto g5 = SupportGrid::integer(2, 5, 4);
  ValueDistribution delta5(6, 0.0);
  delta5[5] = 1.0;
  auto phi = generate_bce(delta5, g5, u, {SelectorKind::random_objective, 2});
  CHECK(membership_cv(delta5, phi, g5, u).member);
}

TEST_CASE("selectors are deterministic per seed") {
  auto g = SupportGrid::integer(2, 4, 4);
  auto u = UtilityKernel::first_price();
  ValueDistribution pi{0.1, 0.2, 0.3, 0.25, 0.15};
  Selector sel{SelectorKind::random_objective, 42};
  auto a = generate_bce(pi, g, u, sel);
  auto b = generate_bce(pi, g, u, sel);
  CHECK(a.support() == b.support());
  CHECK(a.probs() == b.probs());
  CHECK(expected_revenue(generate_bce(pi, g, u, {SelectorKind::max_revenue}), g, u) >=
        expected_revenue(generate_bce(pi, g, u, {SelectorKind::min_revenue}), g, u) - 1e-9);
  CHECK_THROWS_AS(selector_kind_from_string("greedy"), DomainError);
}

TEST_CASE("sample_bids draws by inverse cdf") {
  auto constant = sample_bids(BidDistribution::point_mass({2, 3}), 50, 1);
  for (const auto& d : constant.draws) CHECK(d == BidProfile{2, 3});

  BidDistribution phi({{0, 0}, {0, 1}, {1, 0}, {2, 2}}, {0.1, 0.2, 0.3, 0.4});
  const std::size_t N = 1000000;
  auto s = sample_bids(phi, N, 2024);
  std::map<BidProfile, std::size_t> counts;
  for (const auto& d : s.draws) ++counts[d];
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double p = phi.probs()[k];
    const double freq = static_cast<double>(counts[phi.support()[k]]) / N;
    CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / N));
  }
  auto again = sample_bids(phi, 100, 2024);
  CHECK(std::equal(again.draws.begin(), again.draws.end(), s.draws.begin()));
  auto other = sample_bids(phi, 100, 2025);
  CHECK_FALSE(std::equal(other.draws.begin(), other.draws.end(), s.draws.begin()));
}

TEST_CASE("variance superset contains variances of feasible value distributions") {
  auto g = SupportGrid::integer(2, 5, 5);
  auto u = UtilityKernel::first_price();
  auto phi = generate_bce({0.05, 0.1, 0.2, 0.3, 0.2, 0.15}, g, u,
                          {SelectorKind::max_entropy_surrogate, 5, 4});
  auto sup = population_variance_superset(phi, g, u);
  REQUIRE_FALSE(sup.empty);
  auto bce = build_bce_cv(phi, g, u);
  auto prog = lp::to_linear_program(bce.system, 0.0);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < 60; ++k) {
    std::vector<double> dir(g.num_values());
    for (double& d : dir) d = z(rng);
    std::vector<double> obj(bce.system.num_vars, 0.0);
    for (std::size_t v = 0; v < dir.size(); ++v) {
      for (const auto& t : bce.system.marginals[v].terms) obj[t.var] += dir[v] * t.coef;
    }
    prog.set_objective(obj, lp::Sense::maximize);
    auto sol = lp::solve(prog);
    REQUIRE(sol.status == lp::Status::optimal);
    auto pi = recover_marginal(bce, sol.primal);
    double m = 0.0, m2 = 0.0;
    for (std::size_t v = 0; v < pi.size(); ++v) {
      m += pi[v] * g.values()[v];
      m2 += pi[v] * g.values()[v] * g.values()[v];
    }
    const double var = m2 - m * m;
    lo = std::min(lo, var);
    hi = std::max(hi, var);
    CHECK(sup.mean.contains(m, 1e-9));
  }
  CHECK(sup.var_lower <= lo + 1e-9);
  CHECK(sup.var_upper >= hi - 1e-9);
}

TEST_CASE("experiment config round-trips and reports line numbers") {
  std::istringstream in(
      "# demo\nfamily=poisson\ngrid=6\nN_list=500, 5000\nselector=random_objective\n"
      "seed=9\ndelta=0.05\nk=20\ns_fraction=0.25\nmethods=hoeffding\n");
  auto c = parse_experiment_config(in);
  CHECK(c.family == FamilyKind::truncated_poisson);
  CHECK(c.theta0 == Theta{4.0});
  CHECK(c.N_list == std::vector<std::size_t>{500, 5000});
  CHECK(c.selector.kind == SelectorKind::random_objective);
  CHECK(c.selector.seed == 9);
  std::ostringstream out;
  write_experiment_config(out, c);
  std::istringstream back(out.str());
  auto c2 = parse_experiment_config(back);
  CHECK(c2.N_list == c.N_list);
  CHECK(c2.delta == c.delta);
  CHECK(c2.methods == c.methods);

  std::istringstream bad("family=normal\n\nwidth=3\n");
  try {
    parse_experiment_config(bad);
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream worse("delta=abc\n");
  CHECK_THROWS_AS(parse_experiment_config(worse), InputError);
}

TEST_CASE("small experiment contains theta0 and estimates tighten with N") {
  ExperimentConfig c;
  c.family = FamilyKind::truncated_poisson;
  c.theta0 = {2.0};
  c.grid = 6;
  c.N_list = {1000, 100000, 2000000};
  c.methods = {"hoeffding"};
  c.k = 20;
  c.seed = 4;
  c.selector = {SelectorKind::max_entropy_surrogate, 4, 4};
  auto rep = run_experiment(c);
  CHECK(rep.theta0_in_population);
  std::vector<double> hoeffding;
  for (const auto& r : rep.rows) {
    if (r.method == "hoeffding") {
      hoeffding.push_back(r.difference_mass);
      CHECK(r.contains_population);
      CHECK(r.contains_theta0);
      CHECK(r.moments.mean.contains(rep.population_moments.mean.lower, 1e-9));
      CHECK(r.moments.mean.contains(rep.population_moments.mean.upper, 1e-9));
    }
  }
  REQUIRE(hoeffding.size() == 3);
  CHECK(hoeffding[1] <= hoeffding[0]);
  CHECK(hoeffding[2] <= hoeffding[1]);
  CHECK(hoeffding[2] < hoeffding[0]);

  auto again = run_experiment(c);
  std::ostringstream a, b;
  write_summary_csv(a, rep);
  write_summary_csv(b, again);
  CHECK(a.str() == b.str());
}
