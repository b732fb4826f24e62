#include "bceid/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "bceid/error.hpp"
#include "bceid/random.hpp"

namespace bceid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return x;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line) + ": '" + text + "' is not a number");
  }
}

std::size_t parse_count(const std::string& text, std::size_t line) {
  const double x = parse_number(text, line);
  if (x < 0.0 || x != std::floor(x)) {
    throw InputError("line " + std::to_string(line) + ": '" + text +
                     "' is not a nonnegative integer");
  }
  return static_cast<std::size_t>(x);
}

// Solves the joint LP with a given objective; returns psi or throws.
std::vector<double> solve_joint(const lp::LinearProgram& base, std::vector<double> obj,
                                lp::Sense sense) {
  lp::LinearProgram prog = base;
  prog.set_objective(std::move(obj), sense);
  const auto sol = lp::solve(prog);
  if (sol.status != lp::Status::optimal) {
    throw SolverError("BCE generator LP ended " + lp::to_string(sol.status));
  }
  return sol.primal;
}

BidDistribution bid_marginal(const std::vector<double>& psi, const SupportGrid& grid) {
  const std::size_t nV = grid.num_values();
  std::vector<BidProfile> profiles;
  std::vector<double> weights;
  for (std::size_t p = 0; p < grid.num_profiles(); ++p) {
    double mass = 0.0;
    for (std::size_t v = 0; v < nV; ++v) mass += std::max(0.0, psi[p * nV + v]);
    if (mass < 1e-13) continue;
    profiles.push_back(grid.decode(p));
    weights.push_back(mass);
  }
  if (profiles.empty()) throw SolverError("BCE generator returned no mass");
  return BidDistribution::normalized(std::move(profiles), std::move(weights));
}

}  // namespace

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::max_revenue:
      return "max_revenue";
    case SelectorKind::min_revenue:
      return "min_revenue";
    case SelectorKind::random_objective:
      return "random_objective";
    case SelectorKind::max_entropy_surrogate:
      return "max_entropy_surrogate";
  }
  return "unknown";
}

SelectorKind selector_kind_from_string(const std::string& name) {
  if (name == "max_revenue") return SelectorKind::max_revenue;
  if (name == "min_revenue") return SelectorKind::min_revenue;
  if (name == "random_objective" || name == "random") return SelectorKind::random_objective;
  if (name == "max_entropy_surrogate" || name == "entropy") {
    return SelectorKind::max_entropy_surrogate;
  }
  throw DomainError("unknown selector '" + name + "'");
}

GeneratedBce generate_bce_joint(const ValueDistribution& pi, const SupportGrid& grid,
                                const UtilityKernel& u, const Selector& selector) {
  check_value_distribution(pi, grid.num_values());
  const std::size_t nV = grid.num_values();
  auto bce = build_bce_joint(grid, u);
  auto& sys = bce.system;
  // The value marginal rows already force unit mass.
  sys.blocks.clear();
  for (std::size_t v = 0; v < nV; ++v) {
    LinearForm eq;
    eq.constant = -pi[v];
    eq.label = "marginal[" + std::to_string(v) + "]";
    for (std::size_t p = 0; p < grid.num_profiles(); ++p) {
      eq.terms.push_back({p * nV + v, 1.0, static_cast<std::int64_t>(p), 1.0});
    }
    sys.equalities.push_back(std::move(eq));
  }
  const auto base = lp::to_linear_program(sys, 0.0);
  const std::size_t vars = sys.num_vars;

  GeneratedBce out{BidDistribution::point_mass(BidProfile(grid.players(), 0)), {}, 0.0};
  const auto revenue_objective = [&] {
    std::vector<double> obj(vars, 0.0);
    for (std::size_t p = 0; p < grid.num_profiles(); ++p) {
      const double r = u.revenue(grid, grid.decode(p));
      for (std::size_t v = 0; v < nV; ++v) obj[p * nV + v] = r;
    }
    return obj;
  };
  const auto random_objective = [&](std::uint64_t task) {
    auto rng = task_rng(selector.seed, task);
    std::vector<double> obj(vars);
    for (double& c : obj) c = uniform01(rng);
    return obj;
  };

  switch (selector.kind) {
    case SelectorKind::max_revenue:
    case SelectorKind::min_revenue: {
      auto obj = revenue_objective();
      const auto sense = selector.kind == SelectorKind::max_revenue ? lp::Sense::maximize
                                                                    : lp::Sense::minimize;
      out.psi = solve_joint(base, obj, sense);
      break;
    }
    case SelectorKind::random_objective:
      out.psi = solve_joint(base, random_objective(0), lp::Sense::maximize);
      break;
    case SelectorKind::max_entropy_surrogate: {
      const std::size_t K = std::max<std::size_t>(1, selector.surrogate_vertices);
      out.psi.assign(vars, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const auto psi = solve_joint(base, random_objective(k), lp::Sense::maximize);
        for (std::size_t j = 0; j < vars; ++j) out.psi[j] += psi[j] / static_cast<double>(K);
      }
      break;
    }
  }
  for (double& x : out.psi) x = std::max(0.0, x);
  if (u.kind() != AuctionKind::custom_table) {
    for (std::size_t p = 0; p < grid.num_profiles(); ++p) {
      const double r = u.revenue(grid, grid.decode(p));
      for (std::size_t v = 0; v < nV; ++v) out.objective += r * out.psi[p * nV + v];
    }
  }
  out.phi = bid_marginal(out.psi, grid);
  return out;
}

BidDistribution generate_bce(const ValueDistribution& pi, const SupportGrid& grid,
                             const UtilityKernel& u, const Selector& selector) {
  return generate_bce_joint(pi, grid, u, selector).phi;
}

BidSample sample_bids(const BidDistribution& phi, std::size_t N, std::uint64_t seed) {
  if (N == 0) throw DomainError("sample size must be positive");
  std::vector<double> cdf(phi.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    acc += phi.probs()[k];
    cdf[k] = acc;
  }
  std::mt19937_64 rng(seed);
  BidSample out;
  out.seed = seed;
  out.provenance = "sample_bids";
  out.draws.reserve(N);
  for (std::size_t t = 0; t < N; ++t) {
    const double x = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                         phi.size() - 1);
    out.draws.push_back(phi.support()[k]);
  }
  return out;
}

double expected_revenue(const BidDistribution& phi, const SupportGrid& grid,
                        const UtilityKernel& u) {
  double r = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    r += phi.probs()[k] * u.revenue(grid, phi.support()[k]);
  }
  return r;
}

VarianceSuperset conservative_variance_bounds(const Interval& mean,
                                              const Interval& second_moment) {
  VarianceSuperset out;
  out.mean = mean;
  out.second_moment = second_moment;
  out.empty = mean.empty || second_moment.empty;
  if (out.empty) return out;
  out.var_lower = std::max(0.0, second_moment.lower - mean.upper * mean.upper);
  out.var_upper = std::max(0.0, second_moment.upper - mean.lower * mean.lower);
  return out;
}

VarianceSuperset population_variance_superset(const BidDistribution& phi,
                                              const SupportGrid& grid,
                                              const UtilityKernel& u) {
  const auto bce = build_bce_cv(phi, grid, u);
  std::vector<double> v = grid.values(), v2 = grid.values();
  for (double& x : v2) x *= x;
  return conservative_variance_bounds(moment_bounds(bce, v), moment_bounds(bce, v2));
}

VarianceSuperset sample_variance_superset(const BidSample& sample,
                                          const SupportGrid& grid,
                                          const UtilityKernel& u, double delta) {
  const double H = grid.H();
  std::vector<double> v = grid.values(), scaled = grid.values();
  for (double& x : scaled) x = x * x / H;
  const auto mean = nonparam_moment_interval(sample, v, grid, u, delta);
  auto second = nonparam_moment_interval(sample, scaled, grid, u, delta);
  if (!second.empty) {
    second.lower = std::max(0.0, second.lower * H);
    second.upper *= H;
  }
  auto out = conservative_variance_bounds(mean, second);
  return out;
}

Theta default_theta0(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::truncated_normal:
      return {4.0, 1.0};
    case FamilyKind::truncated_poisson:
      return {4.0};
    case FamilyKind::binomial:
    case FamilyKind::truncated_geometric:
      return {0.2};
  }
  return {};
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig c;
  bool theta_set = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "family") {
        c.family = family_kind_from_string(value);
      } else if (key == "theta0") {
        c.theta0.clear();
        for (const auto& x : split_list(value)) c.theta0.push_back(parse_number(x, lineno));
        theta_set = true;
      } else if (key == "grid" || key == "H") {
        c.grid = static_cast<int>(parse_count(value, lineno));
      } else if (key == "players") {
        c.players = parse_count(value, lineno);
      } else if (key == "auction") {
        c.auction = auction_kind_from_string(value);
      } else if (key == "N_list") {
        c.N_list.clear();
        for (const auto& x : split_list(value)) c.N_list.push_back(parse_count(x, lineno));
      } else if (key == "selector") {
        c.selector.kind = selector_kind_from_string(value);
      } else if (key == "seed") {
        c.seed = parse_count(value, lineno);
        c.selector.seed = c.seed;
      } else if (key == "delta") {
        c.delta = parse_number(value, lineno);
      } else if (key == "alpha") {
        c.alpha = parse_number(value, lineno);
      } else if (key == "k") {
        c.k = parse_count(value, lineno);
      } else if (key == "s_fraction") {
        c.s_fraction = parse_number(value, lineno);
      } else if (key == "methods") {
        c.methods = split_list(value);
      } else {
        throw InputError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    } catch (const DomainError& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!theta_set) c.theta0 = default_theta0(c.family);
  return c;
}

void write_experiment_config(std::ostream& out, const ExperimentConfig& c) {
  const auto join = [](const auto& xs) {
    std::ostringstream s;
    for (std::size_t k = 0; k < xs.size(); ++k) s << (k ? "," : "") << xs[k];
    return s.str();
  };
  out << "family=" << to_string(c.family) << '\n'
      << "theta0=" << join(c.theta0.empty() ? default_theta0(c.family) : c.theta0) << '\n'
      << "grid=" << c.grid << '\n'
      << "players=" << c.players << '\n'
      << "auction=" << to_string(c.auction) << '\n'
      << "N_list=" << join(c.N_list) << '\n'
      << "selector=" << to_string(c.selector.kind) << '\n'
      << "seed=" << c.seed << '\n'
      << "delta=" << c.delta << '\n'
      << "alpha=" << c.alpha << '\n'
      << "k=" << c.k << '\n'
      << "s_fraction=" << c.s_fraction << '\n'
      << "methods=" << join(c.methods) << '\n';
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.grid <= 0) throw DomainError("grid must be positive");
  if (!(config.s_fraction > 0.0 && config.s_fraction < 1.0)) {
    throw DomainError("s_fraction must lie in (0, 1)");
  }
  const auto grid = SupportGrid::integer(config.players, config.grid, config.grid);
  const auto u = config.auction == AuctionKind::second_price ? UtilityKernel::second_price()
                                                             : UtilityKernel::first_price();
  const auto family = Family::make(config.family, grid.H());
  const Theta theta0 = config.theta0.empty() ? default_theta0(config.family) : config.theta0;

  ExperimentReport rep{config, BidDistribution::point_mass(BidProfile(config.players, 0)),
                       ThetaGrid::default_for(family), {}, {}, false, {}, {}};
  rep.config.theta0 = theta0;
  const auto pi0 = density(family, theta0, grid.values());
  rep.phi = generate_bce(pi0, grid, u, config.selector);
  rep.population = parametric_identified_set(rep.phi, grid, u, family, rep.thetas,
                                             lp::kFeasibilityTolerance);
  rep.population.method = "population";
  rep.population_moments = population_variance_superset(rep.phi, grid, u);
  const auto theta0_index = rep.thetas.find(theta0);
  if (theta0_index >= 0) {
    rep.theta0_in_population = rep.population.mask[static_cast<std::size_t>(theta0_index)];
  } else {
    ParametricEvaluator eval(rep.phi, grid, u, family);
    rep.theta0_in_population = eval.minimax(theta0) <= lp::kFeasibilityTolerance;
  }
  rep.sets.emplace_back("population", rep.population);

  const auto diff_mass = [&](const IdentifiedSet& s) {
    std::size_t d = 0;
    for (std::size_t k = 0; k < s.mask.size(); ++k) d += (s.mask[k] != 0) != (rep.population.mask[k] != 0);
    return static_cast<double>(d) / static_cast<double>(s.mask.size());
  };
  const auto add_row = [&](std::size_t N, const std::string& method, const IdentifiedSet& s,
                           const VarianceSuperset& moments) {
    ExperimentRow row;
    row.N = N;
    row.method = method;
    row.tolerance = s.tolerance;
    row.set_size = s.count();
    row.difference_mass = diff_mass(s);
    row.contains_theta0 = theta0_index >= 0 && s.mask[static_cast<std::size_t>(theta0_index)];
    row.contains_population = rep.population.subset_of(s);
    row.moments = moments;
    rep.rows.push_back(row);
    rep.sets.emplace_back(method + "_" + std::to_string(N), s);
  };

  for (std::size_t idx = 0; idx < config.N_list.size(); ++idx) {
    const std::size_t N = config.N_list[idx];
    const auto sample = sample_bids(rep.phi, N, config.seed + 7919 * (idx + 1));
    const auto moments = sample_variance_superset(sample, grid, u, config.delta);
    for (const auto& m : config.methods) {
      if (m == "hoeffding") {
        add_row(N, m, parametric_hoeffding_set(sample, grid, u, family, rep.thetas, config.delta),
                moments);
      } else if (m == "bernstein") {
        add_row(N, m, bernstein_set(sample, grid, u, family, rep.thetas, config.delta), moments);
      } else if (m == "subsampling") {
        SubsampleOptions opt;
        opt.draws = config.k;
        opt.subsample_size =
            std::max<std::size_t>(1, static_cast<std::size_t>(config.s_fraction * static_cast<double>(N)));
        opt.alpha = config.alpha;
        opt.seed = config.seed + 104729 * (idx + 1);
        add_row(N, m, subsampling_confidence_set(sample, grid, u, family, rep.thetas, opt).set,
                moments);
      } else {
        throw DomainError("unknown method '" + m + "'");
      }
    }
  }

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    for (const auto& [name, set] : rep.sets) {
      std::ofstream f(fs::path(out_dir) / (name + ".csv"));
      write_set_csv(f, family, rep.thetas, set,
                    {{"family", to_string(config.family)},
                     {"delta", std::to_string(config.delta)},
                     {"alpha", std::to_string(config.alpha)}});
    }
    std::ofstream s(fs::path(out_dir) / "summary.csv");
    write_summary_csv(s, rep);
    std::ofstream c(fs::path(out_dir) / "config.txt");
    write_experiment_config(c, rep.config);
  }
  return rep;
}

void write_summary_csv(std::ostream& out, const ExperimentReport& rep) {
  out << std::setprecision(12);
  out << "# theta0_in_population=" << (rep.theta0_in_population ? "true" : "false") << '\n'
      << "# population_size=" << rep.population.count() << '\n'
      << "# theta_grid_size=" << rep.thetas.size() << '\n'
      << "# selector=" << to_string(rep.config.selector.kind) << '\n'
      << "# feasibility_tolerance=" << lp::kFeasibilityTolerance << '\n';
  const auto& pm = rep.population_moments;
  out << "# population_mean=[" << pm.mean.lower << ',' << pm.mean.upper << "]\n"
      << "# population_variance_superset=[" << pm.var_lower << ',' << pm.var_upper << "]\n";
  out << "N,method,tolerance,set_size,difference_mass,contains_theta0,contains_population,"
         "mean_lower,mean_upper,var_lower,var_upper\n";
  for (const auto& r : rep.rows) {
    out << r.N << ',' << r.method << ',' << r.tolerance << ',' << r.set_size << ','
        << r.difference_mass << ',' << (r.contains_theta0 ? 1 : 0) << ','
        << (r.contains_population ? 1 : 0) << ',' << r.moments.mean.lower << ','
        << r.moments.mean.upper << ',' << r.moments.var_lower << ',' << r.moments.var_upper
        << '\n';
  }
}

}  // namespace bceid
