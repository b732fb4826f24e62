#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bceid/bounds.hpp"
#include "bceid/error.hpp"
#include "bceid/montecarlo.hpp"

using namespace bceid;

namespace {

QuantileFn two_point(double theta, double H) {
  return QuantileFn::from_distribution({0.0, H}, {theta, 1.0 - theta}, H);
}

std::vector<double> q_grid(std::size_t k) {
  std::vector<double> q;
  for (std::size_t i = 1; i <= k; ++i) q.push_back(static_cast<double>(i) / k);
  return q;
}

}  // namespace

TEST_CASE("quantile functions are validated step functions") {
  auto v = QuantileFn::from_distribution({3.0, 1.0, 3.0}, {0.25, 0.5, 0.25}, 4.0);
  CHECK(v.breakpoints() == std::vector<double>{0.5, 1.0});
  CHECK(v.values() == std::vector<double>{1.0, 3.0});
  CHECK(v(0.5) == 1.0);
  CHECK(v(0.5000001) == 3.0);
  CHECK(v.mean() == doctest::Approx(2.0));
  CHECK_THROWS_AS(QuantileFn({0.5, 1.0}, {2.0, 1.0}, 4.0), DomainError);
  CHECK_THROWS_AS(QuantileFn({0.5, 0.9}, {1.0, 2.0}, 4.0), DomainError);
  CHECK_THROWS_AS(QuantileFn({1.0}, {5.0}, 4.0), DomainError);
  CHECK_THROWS_AS(v(0.0), DomainError);
}

TEST_CASE("piecewise integration matches the closed form on two-point laws") {
  const double H = 20.0;
  const double theta = 0.3;
  auto v = two_point(theta, H);
  for (double q : {0.1, 0.3, 0.31, 0.5, 0.77, 1.0}) {
    const double exact = q <= theta ? 0.0 : H * (1.0 - std::sqrt(theta / q));
    CHECK(v.weighted_average(q, 0.5) == doctest::Approx(exact).epsilon(1e-14));
  }
  const double a = 2.0 / 3.0;
  const double exact3 = H * (1.0 - std::pow(theta / 0.8, a));
  CHECK(v.weighted_average(0.8, a) == doctest::Approx(exact3).epsilon(1e-14));
}

TEST_CASE("constraint check on the zero and two-point examples") {
  const double H = 20.0;
  const auto grid = q_grid(200);
  auto zero = QuantileFn::constant(0.0, H);
  for (double b : {0.0, 1.0, 7.5}) {
    CHECK(bbm_constraint_check(zero, QuantileFn::constant(b, H), 2, grid).holds);
  }

  const double b_star = 5.0;
  const double theta = std::pow((H - b_star) / H, 2.0);
  auto bstar = QuantileFn::constant(b_star, H);
  auto tight = bbm_constraint_check(two_point(theta, H), bstar, 2, grid);
  CHECK(tight.holds);
  CHECK(std::abs(tight.max_excess) < 1e-12);
  CHECK(two_point(theta, H).weighted_average(1.0, 0.5) == doctest::Approx(b_star).epsilon(1e-14));
  CHECK(two_point(theta, H).mean() == doctest::Approx(2 * b_star - b_star * b_star / H));

  auto loose = bbm_constraint_check(two_point(theta * 0.99, H), bstar, 2, grid);
  CHECK_FALSE(loose.holds);
  REQUIRE_FALSE(loose.violated_at.empty());
  CHECK(loose.violated_at.back() == 1.0);
  CHECK(loose.max_excess > 0.0);
  CHECK_THROWS_AS(bbm_constraint_check(zero, bstar, 1, grid), DomainError);
}

TEST_CASE("closed-form mean uppers") {
  const double H = 8.0;
  CHECK(bbm_mean_upper(H / 4, H, 2, BbmVariant::two_bidder) == doctest::Approx(3 * H / 4));
  CHECK(bbm_mean_upper(1.0, 4.0, 2, BbmVariant::general) == doctest::Approx(4.0));
  CHECK(bbm_mean_upper(2.0, 10.0, 3, BbmVariant::lipschitz, 0.5) ==
        doctest::Approx(2.0 + std::sqrt(3.0)));
  for (auto variant : {BbmVariant::general, BbmVariant::two_bidder, BbmVariant::lipschitz}) {
    CHECK(bbm_mean_upper(0.0, H, 2, variant, 1.0) == 0.0);
  }
  CHECK_THROWS_AS(bbm_mean_upper(9.0, H, 2, BbmVariant::general), DomainError);
  CHECK_THROWS_AS(bbm_mean_upper(1.0, H, 1, BbmVariant::general), DomainError);
  CHECK_THROWS_AS(bbm_mean_upper(1.0, H, 3, BbmVariant::two_bidder), DomainError);
  CHECK_THROWS_AS(bbm_mean_upper(1.0, H, 2, BbmVariant::lipschitz, 0.0), DomainError);
}

TEST_CASE("singleton comparison reports the two-point gap") {
  auto g = SupportGrid::integer(2, 20, 20);
  auto c = bbm_vs_sharp_report(BidDistribution::point_mass({5, 5}), g);
  CHECK(c.sharp.lower == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(c.sharp.upper == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(c.revenue == 5.0);
  CHECK(c.two_point_mean == doctest::Approx(8.75));
  CHECK(c.two_point_ratio == doctest::Approx(1.25));
  CHECK(c.bbm_two_bidder == doctest::Approx(2 * std::sqrt(100.0) - 5.0));
  CHECK(c.dominated);
  std::ostringstream out;
  write_bbm_csv(out, c);
  CHECK(out.str().find("two_point_ratio") != std::string::npos);

  auto zero = bbm_vs_sharp_report(BidDistribution::point_mass({0, 0}), g);
  CHECK(zero.revenue == 0.0);
  CHECK(zero.bbm_general == 0.0);
  CHECK(zero.bbm_two_bidder == 0.0);
  CHECK(zero.two_point_mean == 0.0);
}

TEST_CASE("sharp upper mean stays below the general closed form") {
  auto g = SupportGrid::integer(2, 6, 6);
  auto u = UtilityKernel::first_price();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ValueDistribution pi(g.num_values());
    double total = 0.0;
    for (double& p : pi) total += (p = w(rng));
    for (double& p : pi) p /= total;
    auto phi = generate_bce(pi, g, u, {SelectorKind::random_objective,
                                       static_cast<std::uint64_t>(trial)});
    auto c = bbm_vs_sharp_report(phi, g, u);
    REQUIRE_FALSE(c.sharp.empty);
    CHECK(c.dominated);
  }
}

TEST_CASE("first-order inversion") {
  auto G = [](double b) { return 2.0 * b; };
  auto g = [](double) { return 2.0; };
  for (double b = 0.05; b < 0.46; b += 0.05) {
    const double v = ipv_invert(b, G, g);
    CHECK(std::abs(v - 2.0 * b) < 1e-12);
    CHECK(std::abs((v - b) * g(b) - G(b)) <= 1e-12);
  }
  CHECK(ipv_invert(0.0, G, g) == 0.0);
  CHECK(ipv_invert(0.3, G, [](double) { return 1e12; }) == doctest::Approx(0.3));
  CHECK_THROWS_AS(ipv_invert(0.3, G, [](double) { return 0.0; }), DomainError);
}
