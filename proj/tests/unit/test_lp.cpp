#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <sstream>

#include "bceid/error.hpp"
#include "bceid/lp.hpp"

using namespace bceid;
using namespace bceid::lp;

TEST_CASE("single bound is attained") {
  LinearProgram lp;
  auto x = lp.add_variable();
  lp.add_row({{x, 1.0}}, Relation::less_equal, 3.0);
  lp.set_objective({1.0}, Sense::maximize);
  auto sol = solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(3.0));
  CHECK(sol.primal[0] == doctest::Approx(3.0));
  CHECK(sol.dual_bound == doctest::Approx(3.0));
}

TEST_CASE("contradictory rows are infeasible") {
  LinearProgram lp;
  auto x = lp.add_variable(-kInfinity, kInfinity);
  lp.add_row({{x, 1.0}}, Relation::greater_equal, 1.0);
  lp.add_row({{x, 1.0}}, Relation::less_equal, 0.0);
  CHECK(solve(lp).status == Status::infeasible);
}

TEST_CASE("unbounded direction is reported") {
  LinearProgram lp;
  auto x = lp.add_variable();
  auto y = lp.add_variable();
  lp.add_row({{x, 1.0}, {y, -1.0}}, Relation::less_equal, 1.0);
  lp.set_objective({1.0, 1.0}, Sense::maximize);
  CHECK(solve(lp).status == Status::unbounded);
}

TEST_CASE("simplex block picks the cheapest vertex") {
  LinearProgram lp;
  auto first = lp.add_variables(3);
  lp.add_simplex_block({first, first + 1, first + 2});
  lp.set_objective({1.0, 2.0, 3.0}, Sense::minimize);
  auto sol = solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(1.0));
  CHECK(sol.primal[0] == doctest::Approx(1.0));
  CHECK(sol.max_violation <= 1e-10);
}

TEST_CASE("minimax of two opposing forms") {
  ConstraintSystem sys;
  auto x = sys.add_variables(1);
  sys.upper[x] = 1.0;
  sys.forms.push_back({{{x, 1.0}}, -1.0, "f1"});
  sys.forms.push_back({{{x, -1.0}}, 0.0, "f2"});
  auto res = minimax_value(sys);
  CHECK(res.value == doctest::Approx(-0.5));
  CHECK(res.point[0] == doctest::Approx(0.5));
}

TEST_CASE("minimax solver stays consistent across constant changes") {
  ConstraintSystem sys;
  auto x = sys.add_variables(2);
  sys.add_block({x, x + 1});
  sys.forms.push_back({{{x, 1.0}}, 0.0, "a"});
  sys.forms.push_back({{{x + 1, 1.0}}, 0.0, "b"});
  sys.forms.push_back({{}, -5.0, "empty"});
  MinimaxSolver solver(sys);
  CHECK(solver.solve().value == doctest::Approx(0.5));
  solver.set_constant(0, -1.0);
  // max(x - 1, 1 - x) minimised at x = 1.
  CHECK(solver.solve().value == doctest::Approx(0.0));
  solver.set_constant(2, 0.25);
  CHECK(solver.solve().value == doctest::Approx(0.25));
  CHECK(minimax_value(solver.system()).value == doctest::Approx(0.25));
}

TEST_CASE("warm re-solve after objective change") {
  LinearProgram lp;
  auto first = lp.add_variables(4);
  lp.add_simplex_block({first, first + 1, first + 2, first + 3});
  lp.add_row({{0, 1.0}, {1, 2.0}, {2, 3.0}, {3, 4.0}}, Relation::greater_equal, 2.5);
  lp.set_objective({0.0, 1.0, 2.0, 3.0}, Sense::minimize);
  SimplexSolver solver(lp);
  auto lo = solver.solve();
  REQUIRE(lo.status == Status::optimal);
  std::vector<double> c{0.0, 1.0, 2.0, 3.0};
  solver.set_objective(c, Sense::maximize);
  auto hi = solver.solve();
  REQUIRE(hi.status == Status::optimal);
  CHECK(lo.objective == doctest::Approx(1.5));
  CHECK(hi.objective == doctest::Approx(3.0));
  CHECK(hi.dual_bound == doctest::Approx(3.0));
}

TEST_CASE("lp format dump lists every section") {
  LinearProgram lp;
  auto x = lp.add_variable(0.0, 1.0, "x");
  auto y = lp.add_variable(-kInfinity, kInfinity, "y");
  lp.add_row({{x, 1.0}, {y, -2.0}}, Relation::equal, 0.5, "link");
  lp.set_objective({1.0, 0.0}, Sense::maximize);
  std::ostringstream out;
  write_lp_format(lp, out);
  const auto text = out.str();
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("link: + 1 x - 2 y = 0.5") != std::string::npos);
  CHECK(text.find("y free") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_CASE("invalid input is a domain error") {
  LinearProgram lp;
  CHECK_THROWS_AS(lp.add_variable(1.0, 0.0), DomainError);
  auto x = lp.add_variable();
  CHECK_THROWS_AS(lp.add_row({{x, std::nan("")}}, Relation::equal, 0.0), DomainError);
  lp.add_row({{x + 5, 1.0}}, Relation::equal, 0.0);
  CHECK_THROWS_AS(solve(lp), DomainError);
}

namespace {

// Enumerates every basic solution of a small LP; the best feasible one is
// the optimum when the feasible set is bounded.
double brute_force(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& c, bool& feasible) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(b.size());
  // Active set drawn from rows (a x <= b) and bounds 0 <= x <= 1.
  const int total = m + 2 * n;
  double best = std::numeric_limits<double>::infinity();
  feasible = false;
  std::vector<int> pick(static_cast<std::size_t>(n));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd lhs(n, n);
      Eigen::VectorXd rhs(n);
      for (int k = 0; k < n; ++k) {
        const int id = pick[static_cast<std::size_t>(k)];
        lhs.row(k).setZero();
        if (id < m) {
          lhs.row(k) = a.row(id);
          rhs(k) = b(id);
        } else {
          const int var = (id - m) / 2;
          lhs(k, var) = 1.0;
          rhs(k) = (id - m) % 2 == 0 ? 0.0 : 1.0;
        }
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
      if (lu.rank() < n) return;
      Eigen::VectorXd x = lu.solve(rhs);
      if ((a * x - b).maxCoeff() > 1e-9) return;
      if (x.minCoeff() < -1e-9 || x.maxCoeff() > 1.0 + 1e-9) return;
      feasible = true;
      best = std::min(best, c.dot(x));
      return;
    }
    for (int id = start; id < total; ++id) {
      pick[static_cast<std::size_t>(depth)] = id;
      rec(id + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("random boxed LPs agree with vertex enumeration") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  int feasible_count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 2 + trial % 4;
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    Eigen::VectorXd c(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = std::round(coef(rng) * 4.0) / 4.0;
      b(i) = std::round(coef(rng) * 4.0) / 4.0;
    }
    for (int j = 0; j < n; ++j) c(j) = std::round(coef(rng) * 4.0) / 4.0;

    LinearProgram lp;
    lp.add_variables(static_cast<std::size_t>(n), 0.0, 1.0);
    for (int i = 0; i < m; ++i) {
      std::vector<Term> terms;
      for (int j = 0; j < n; ++j) terms.push_back({static_cast<std::size_t>(j), a(i, j)});
      lp.add_row(terms, Relation::less_equal, b(i));
    }
    lp.set_objective(std::vector<double>(c.data(), c.data() + n), Sense::minimize);
    auto sol = solve(lp);
    bool feasible = false;
    const double expected = brute_force(a, b, c, feasible);
    CAPTURE(trial);
    if (!feasible) {
      CHECK(sol.status == Status::infeasible);
      continue;
    }
    ++feasible_count;
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-7));
    CHECK(sol.max_violation <= 1e-8);
    CHECK(std::abs(sol.objective - sol.dual_bound) <= 1e-6);
  }
  CHECK(feasible_count > 50);
}

TEST_CASE("scaling a row leaves the optimum unchanged") {
  for (double scale : {1e-3, 1.0, 1e3}) {
    LinearProgram lp;
    auto first = lp.add_variables(3);
    lp.add_simplex_block({first, first + 1, first + 2});
    lp.add_row({{0, 2.0 * scale}, {1, -1.0 * scale}, {2, 0.5 * scale}},
               Relation::less_equal, 0.25 * scale);
    lp.set_objective({3.0, 1.0, 2.0}, Sense::maximize);
    auto sol = solve(lp);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective == doctest::Approx(11.0 / 6.0));
  }
}
