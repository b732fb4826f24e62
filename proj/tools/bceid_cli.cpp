#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "bceid/bounds.hpp"
#include "bceid/cli.hpp"
#include "bceid/error.hpp"
#include "bceid/inference.hpp"
#include "bceid/lp.hpp"
#include "bceid/montecarlo.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

namespace fs = std::filesystem;
using namespace bceid;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitRefuted = 2;

struct Flags {
  int grid_h = 20;
  int bid_max = -1;
  std::string bids;
  std::string values;
  std::string family = "truncated_normal";
  std::string auction = "first_price";
  std::string model = "cv";
  std::string alternative = "second_price";
  std::string metric = "revenue";
  std::string method;
  std::string config;
  std::string input;
  double delta = 0.1;
  double alpha = 0.05;
  double sub_frac = 0.25;
  double tol = 0.0;
  std::size_t n_sub = 50;
  std::size_t draws = 200;
  std::size_t refine = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::string lp_dump;
  double threshold = 20000.0;
  std::size_t bidders = 2;
  bool no_per_acre = false;
};

/// Collects parameters and output files for the run manifest.
class Run {
 public:
  Run(std::string command, const Flags& flags) : flags_(flags) {
    manifest_["command"] = std::move(command);
    manifest_["version"] = kVersion;
    manifest_["feasibility_tolerance"] = lp::kFeasibilityTolerance;
  }

  void param(const std::string& key, const nlohmann::json& value) {
    manifest_["parameters"][key] = value;
  }

  void result(const std::string& key, const nlohmann::json& value) {
    manifest_["results"][key] = value;
  }

  /// Opens out/name for writing, or returns nullptr when no --out was given.
  std::unique_ptr<std::ofstream> file(const std::string& name) {
    if (flags_.out.empty()) return nullptr;
    fs::create_directories(flags_.out);
    auto f = std::make_unique<std::ofstream>(fs::path(flags_.out) / name);
    if (!*f) throw InputError("cannot write " + (fs::path(flags_.out) / name).string());
    *f << std::setprecision(12);
    manifest_["outputs"].push_back(name);
    return f;
  }

  void finish(int exit_code) {
    manifest_["exit_code"] = exit_code;
    if (flags_.out.empty()) return;
    fs::create_directories(flags_.out);
    std::ofstream f(fs::path(flags_.out) / "manifest.json");
    f << manifest_.dump(2) << '\n';
  }

 private:
  const Flags& flags_;
  nlohmann::json manifest_;
};

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(12) << x;
  return s.str();
}

std::string show_interval(const Interval& iv) {
  if (iv.empty) return "empty";
  std::ostringstream s;
  s << std::setprecision(6) << '[' << iv.lower << ", " << iv.upper << ']';
  return s.str();
}

UtilityKernel kernel(const std::string& name) {
  switch (auction_kind_from_string(name)) {
    case AuctionKind::first_price:
      return UtilityKernel::first_price();
    case AuctionKind::second_price:
      return UtilityKernel::second_price();
    default:
      throw DomainError("auction kind '" + name + "' needs a payoff table");
  }
}

SupportGrid make_grid(const Flags& f, std::size_t players) {
  return SupportGrid::integer(players, f.grid_h, f.bid_max < 0 ? f.grid_h : f.bid_max);
}

struct Data {
  BidTable table;
  SupportGrid grid;
  BidDistribution phi;
};

Data load(const Flags& f, Run& run) {
  if (f.bids.empty()) throw InputError("--bids is required");
  auto table = read_bid_table(f.bids);
  auto grid = make_grid(f, table.players);
  auto phi = to_distribution(table, grid);
  run.param("bids", f.bids);
  run.param("grid_h", f.grid_h);
  run.param("bid_max", grid.bids().back());
  run.param("players", table.players);
  run.param("auction", f.auction);
  run.param("observations", table.rows.size());
  run.param("weighted", table.weighted());
  return {std::move(table), std::move(grid), std::move(phi)};
}

BidSample sample_of(const Data& d) {
  if (d.table.weighted()) throw InputError("this command needs raw observations, not a prob column");
  return to_sample(d.table, d.grid);
}

Metadata meta_of(const Flags& f, std::size_t N, double tolerance) {
  return {{"tolerance", fmt(tolerance)},
          {"delta", fmt(f.delta)},
          {"alpha", fmt(f.alpha)},
          {"N", std::to_string(N)},
          {"feasibility_tolerance", fmt(lp::kFeasibilityTolerance)},
          {"seed", std::to_string(f.seed)}};
}

std::vector<double> mean_of_vectors(const SupportGrid& grid) {
  const std::size_t V = grid.num_values();
  const std::size_t n = grid.players();
  std::size_t size = 1;
  for (std::size_t i = 0; i < n; ++i) size *= V;
  std::vector<double> f(size, 0.0);
  for (std::size_t k = 0; k < size; ++k) {
    std::size_t code = k;
    for (std::size_t i = 0; i < n; ++i) {
      f[k] += grid.values()[code % V] / static_cast<double>(n);
      code /= V;
    }
  }
  return f;
}

ValueDistribution product_of(const ValueDistribution& rho, std::size_t players) {
  ValueDistribution joint{1.0};
  for (std::size_t i = 0; i < players; ++i) {
    ValueDistribution next;
    next.reserve(joint.size() * rho.size());
    for (double a : joint) {
      for (double b : rho) next.push_back(a * b);
    }
    joint = std::move(next);
  }
  return joint;
}

void dump_lp(const BceSystem& bce, double tolerance, const std::string& path, Run& run) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  lp::write_lp_format(lp::to_linear_program(bce.system, tolerance), f);
  run.param("lp_dump", path);
}

int cmd_identify(const Flags& f, bool tol_given) {
  Run run("identify", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  run.param("model", f.model);
  std::optional<ValueTable> values;
  if (!f.values.empty()) {
    values = read_values(f.values, d.grid);
    run.param("values", f.values);
  }

  BceSystem bce;
  if (f.model == "cv") {
    bce = build_bce_cv(d.phi, d.grid, u);
  } else if (f.model == "pv") {
    bce = build_bce_pv(d.phi, d.grid, u);
  } else if (f.model == "ipv") {
    bce = build_bce_ipv(d.phi, d.grid, u);
  } else {
    throw DomainError("--model must be cv, pv or ipv");
  }

  if (values) {
    const double tol = tol_given ? f.tol : lp::kFeasibilityTolerance;
    run.param("tolerance", tol);
    MembershipResult res;
    ValueDistribution pinned;
    if (f.model == "cv") {
      if (values->joint) throw InputError("cv membership needs a value,prob table");
      pinned = values->probs;
      res = membership_cv(pinned, d.phi, d.grid, u, tol);
    } else if (f.model == "pv") {
      pinned = values->joint ? values->probs : product_of(values->probs, d.grid.players());
      res = membership_pv(pinned, d.phi, d.grid, u, tol);
    } else {
      if (values->joint) throw InputError("ipv membership needs a value,prob table");
      std::vector<ValueDistribution> rho(d.grid.players(), values->probs);
      for (const auto& r : rho) pinned.insert(pinned.end(), r.begin(), r.end());
      res = membership_ipv(rho, d.phi, d.grid, u, tol);
    }
    if (!f.lp_dump.empty()) {
      pin_marginals(bce, pinned);
      dump_lp(bce, tol, f.lp_dump, run);
    }
    std::cout << (res.member ? "member" : "not a member") << " minimax=" << fmt(res.minimax)
              << " tolerance=" << fmt(tol) << '\n';
    run.result("member", res.member);
    run.result("minimax", res.minimax);
    if (auto out = run.file("membership.csv")) {
      for (const auto& [k, v] : meta_of(f, d.table.rows.size(), tol)) *out << "# " << k << '=' << v << '\n';
      *out << "model,member,minimax\n" << f.model << ',' << (res.member ? 1 : 0) << ','
           << res.minimax << '\n';
    }
    const int code = res.member ? kExitOk : kExitRefuted;
    run.finish(code);
    return code;
  }

  const double tol = tol_given ? f.tol : 0.0;
  run.param("tolerance", tol);
  Interval iv;
  if (f.model == "cv") {
    iv = moment_bounds_cv(d.grid.values(), d.phi, d.grid, u, tol);
  } else if (f.model == "pv") {
    iv = moment_bounds(bce, mean_of_vectors(d.grid), tol);
  } else {
    iv = ipv_symmetric_moment_bounds(d.grid.values(), d.phi, d.grid, u, tol);
  }
  if (!f.lp_dump.empty()) dump_lp(bce, tol, f.lp_dump, run);
  std::cout << "mean bounds " << show_interval(iv) << '\n';
  run.result("empty", iv.empty);
  if (!iv.empty) {
    run.result("lower", iv.lower);
    run.result("upper", iv.upper);
  }
  if (auto out = run.file("bounds.csv")) {
    write_interval_csv(*out, {iv}, meta_of(f, d.table.rows.size(), tol));
  }
  const int code = iv.empty ? kExitRefuted : kExitOk;
  run.finish(code);
  return code;
}

MetricFn metric_of(const std::string& name, const SupportGrid& grid, const UtilityKernel& alt) {
  if (name == "revenue") return MetricFn::revenue(grid, alt);
  if (name == "welfare") return MetricFn::welfare(grid);
  if (name.rfind("constant:", 0) == 0) {
    const std::string arg = name.substr(9);
    std::size_t used = 0;
    double c = 0.0;
    try {
      c = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size()) throw DomainError("bad constant metric '" + name + "'");
    return MetricFn::constant(c);
  }
  throw DomainError("--metric must be revenue, welfare or constant:<c>");
}

int cmd_counterfactual(const Flags& f, bool tol_given) {
  Run run("counterfactual", f);
  auto d = load(f, run);
  const auto current = kernel(f.auction);
  const auto alt = kernel(f.alternative);
  const double tol = tol_given ? f.tol : 0.0;
  run.param("alternative", f.alternative);
  run.param("metric", f.metric);
  run.param("tolerance", tol);
  const auto metric = metric_of(f.metric, d.grid, alt);
  auto iv = counterfactual_bounds(d.phi, metric, current, alt, d.grid, tol);
  std::cout << f.metric << " under " << f.alternative << ' ' << show_interval(iv) << '\n';
  run.result("empty", iv.empty);
  if (!iv.empty) {
    run.result("lower", iv.lower);
    run.result("upper", iv.upper);
  }
  if (auto out = run.file("counterfactual.csv")) {
    auto meta = meta_of(f, d.table.rows.size(), tol);
    meta.emplace_back("metric", f.metric);
    meta.emplace_back("alternative", f.alternative);
    write_interval_csv(*out, {iv}, meta);
  }
  const int code = iv.empty ? kExitRefuted : kExitOk;
  run.finish(code);
  return code;
}

struct Parametric {
  Family family;
  ThetaGrid thetas;
};

Parametric parametric_of(const Flags& f, Run& run) {
  auto family = Family::make(family_kind_from_string(f.family), static_cast<double>(f.grid_h));
  auto thetas = ThetaGrid::default_for(family);
  run.param("family", to_string(family.kind));
  run.param("thetas", thetas.size());
  return {std::move(family), std::move(thetas)};
}

int finish_set(Run& run, const Flags& f, const Parametric& p, const IdentifiedSet& set,
               std::size_t N, const std::string& file, Metadata extra = {}) {
  std::cout << set.method << " set: " << set.count() << " of " << p.thetas.size()
            << " parameters, tolerance=" << fmt(set.tolerance) << '\n';
  run.result("included", set.count());
  run.result("tolerance", set.tolerance);
  if (auto out = run.file(file)) {
    auto meta = meta_of(f, N, set.tolerance);
    meta.insert(meta.end(), extra.begin(), extra.end());
    write_set_csv(*out, p.family, p.thetas, set, meta);
  }
  const int code = set.empty() ? kExitRefuted : kExitOk;
  run.finish(code);
  return code;
}

int cmd_parametric_set(const Flags& f, bool tol_given) {
  Run run("parametric-set", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  auto p = parametric_of(f, run);
  std::string method = f.method.empty() ? (d.table.weighted() ? "population" : "hoeffding")
                                        : f.method;
  run.param("method", method);
  run.param("delta", f.delta);
  IdentifiedSet set;
  if (method == "population") {
    const double tol = tol_given ? f.tol : lp::kFeasibilityTolerance;
    set = parametric_identified_set(d.phi, d.grid, u, p.family, p.thetas, tol);
  } else if (method == "hoeffding") {
    set = parametric_hoeffding_set(sample_of(d), d.grid, u, p.family, p.thetas, f.delta);
  } else if (method == "bernstein") {
    set = bernstein_set(sample_of(d), d.grid, u, p.family, p.thetas, f.delta);
  } else {
    throw DomainError("--method must be population, hoeffding or bernstein");
  }
  return finish_set(run, f, p, set, d.table.rows.size(), "set.csv");
}

int cmd_heatmap(const Flags& f) {
  Run run("heatmap", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  auto p = parametric_of(f, run);
  auto values = heatmap_grid(d.phi, d.grid, u, p.family, p.thetas);
  Metadata meta = meta_of(f, d.table.rows.size(), 0.0);
  meta.erase(meta.begin());
  if (auto out = run.file("heatmap.csv")) {
    write_heatmap_csv(*out, p.family, p.thetas, values, meta);
    double lo = std::numeric_limits<double>::infinity();
    for (double v : values) lo = std::min(lo, v);
    std::cout << "heatmap over " << values.size() << " parameters, minimum " << fmt(lo) << '\n';
    run.result("minimum", lo);
  } else {
    std::cout << std::setprecision(12);
    write_heatmap_csv(std::cout, p.family, p.thetas, values, meta);
  }
  run.finish(kExitOk);
  return kExitOk;
}

int cmd_subsample(const Flags& f) {
  Run run("subsample", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  auto p = parametric_of(f, run);
  auto sample = sample_of(d);
  sample.seed = f.seed;
  if (!(f.sub_frac > 0.0 && f.sub_frac <= 1.0)) throw DomainError("--sub-frac must lie in (0, 1]");
  SubsampleOptions opt;
  opt.draws = f.n_sub;
  opt.subsample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(f.sub_frac * static_cast<double>(sample.size()))));
  opt.alpha = f.alpha;
  opt.refine_rounds = f.refine;
  opt.seed = f.seed;
  run.param("n_sub", opt.draws);
  run.param("subsample_size", opt.subsample_size);
  run.param("alpha", opt.alpha);
  run.param("refine_rounds", opt.refine_rounds);
  run.param("seed", f.seed);
  auto res = subsampling_confidence_set(sample, d.grid, u, p.family, p.thetas, opt);
  for (const auto& w : res.stat.warnings) std::cerr << "warning: " << w << '\n';
  run.result("cutoff", res.stat.cutoff);
  return finish_set(run, f, p, res.set, sample.size(), "set.csv",
                    {{"subsample_size", std::to_string(opt.subsample_size)},
                     {"n_sub", std::to_string(opt.draws)},
                     {"cutoff", fmt(res.stat.cutoff)}});
}

int cmd_bootstrap(const Flags& f, bool tol_given, bool family_given) {
  Run run("bootstrap", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  auto sample = sample_of(d);
  run.param("draws", f.draws);
  run.param("seed", f.seed);
  if (family_given) {
    auto p = parametric_of(f, run);
    const double tol = tol_given ? f.tol : lp::kFeasibilityTolerance;
    run.param("tolerance", tol);
    auto sets = bayesian_bootstrap_sets(sample, d.grid, u, p.family, p.thetas, tol, f.draws, f.seed);
    std::vector<double> freq(p.thetas.size(), 0.0);
    for (const auto& s : sets) {
      for (std::size_t k = 0; k < freq.size(); ++k) freq[k] += s.mask[k] ? 1.0 : 0.0;
    }
    for (double& x : freq) x /= static_cast<double>(sets.size());
    std::size_t ever = 0;
    for (double x : freq) ever += x > 0.0 ? 1 : 0;
    std::cout << "bootstrap sets: " << sets.size() << " draws, " << ever
              << " parameters included at least once\n";
    run.result("ever_included", ever);
    if (auto out = run.file("bootstrap.csv")) {
      for (const auto& [k, v] : meta_of(f, sample.size(), tol)) *out << "# " << k << '=' << v << '\n';
      for (const auto& name : p.family.parameter_names()) *out << name << ',';
      *out << "frequency\n";
      for (std::size_t k = 0; k < freq.size(); ++k) {
        for (double x : p.thetas.points[k]) *out << x << ',';
        *out << freq[k] << '\n';
      }
    }
    run.finish(kExitOk);
    return kExitOk;
  }
  const double tol = tol_given ? f.tol : 0.0;
  run.param("tolerance", tol);
  auto rows = bayesian_bootstrap_intervals(sample, d.grid.values(), d.grid, u, tol, f.draws, f.seed);
  std::size_t empty = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.empty) {
      ++empty;
      continue;
    }
    lo = std::min(lo, r.lower);
    hi = std::max(hi, r.upper);
  }
  std::cout << "bootstrap mean intervals: " << rows.size() << " draws, " << empty << " empty";
  if (empty < rows.size()) std::cout << ", hull [" << std::setprecision(6) << lo << ", " << hi << ']';
  std::cout << '\n';
  run.result("empty_draws", empty);
  if (auto out = run.file("bootstrap.csv")) write_interval_csv(*out, rows, meta_of(f, sample.size(), tol));
  run.finish(kExitOk);
  return kExitOk;
}

int cmd_symmetry(const Flags& f, bool tol_given) {
  Run run("symmetry-test", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  const double tol = tol_given ? f.tol : 0.0;
  run.param("tolerance", tol);
  const auto verdict = ipv_symmetry_test(d.phi, d.grid, u, tol);
  const bool refuted = verdict == SymmetryVerdict::refuted;
  std::cout << (refuted ? "refuted" : "consistent") << '\n';
  run.result("refuted", refuted);
  if (auto out = run.file("symmetry.csv")) {
    for (const auto& [k, v] : meta_of(f, d.table.rows.size(), tol)) *out << "# " << k << '=' << v << '\n';
    *out << "verdict\n" << (refuted ? "refuted" : "consistent") << '\n';
  }
  const int code = refuted ? kExitRefuted : kExitOk;
  run.finish(code);
  return code;
}

int cmd_bbm(const Flags& f) {
  Run run("bbm-compare", f);
  auto d = load(f, run);
  const auto u = kernel(f.auction);
  auto c = bbm_vs_sharp_report(d.phi, d.grid, u);
  std::cout << "sharp mean " << show_interval(c.sharp) << " revenue " << fmt(c.revenue)
            << " closed-form upper " << fmt(c.bbm_general) << " two-point mean "
            << fmt(c.two_point_mean) << '\n';
  run.result("revenue", c.revenue);
  run.result("bbm_general", c.bbm_general);
  run.result("dominated", c.dominated);
  if (auto out = run.file("bbm.csv")) write_bbm_csv(*out, c);
  run.finish(kExitOk);
  return kExitOk;
}

int cmd_ocs_prep(const Flags& f) {
  Run run("ocs-prep", f);
  if (f.input.empty()) throw InputError("--input is required");
  auto table = ingest(f.input);
  PreprocessSpec spec;
  spec.bidders = f.bidders;
  spec.per_acre = !f.no_per_acre;
  spec.threshold = f.threshold;
  spec.H = f.grid_h;
  spec.seed = f.seed;
  run.param("input", f.input);
  run.param("bidders", spec.bidders);
  run.param("per_acre", spec.per_acre);
  run.param("threshold", spec.threshold);
  run.param("grid_h", spec.H);
  run.param("seed", spec.seed);
  auto r = preprocess(table, spec);
  const auto& a = r.audit;
  std::cout << "auctions " << a.input_auctions << ", dropped by bidder count "
            << a.dropped_bidder_count << ", dropped by threshold " << a.dropped_threshold
            << ", retained " << a.retained << '\n';
  run.result("retained", a.retained);
  run.result("scale", a.scale);
  if (auto out = run.file("bids.csv")) write_bid_table(*out, r.sample, r.grid);
  if (auto out = run.file("audit.txt")) {
    write_audit_log(*out, a);
  } else {
    write_audit_log(std::cout, a);
  }
  run.finish(kExitOk);
  return kExitOk;
}

int cmd_mc_run(const Flags& f) {
  Run run("mc-run", f);
  if (f.config.empty()) throw InputError("--config is required");
  std::ifstream in(f.config);
  if (!in) throw InputError("cannot open " + f.config);
  auto config = parse_experiment_config(in);
  std::ostringstream echo;
  write_experiment_config(echo, config);
  run.param("config", f.config);
  run.param("resolved", echo.str());
  auto report = run_experiment(config, f.out);
  std::cout << std::setprecision(12);
  write_summary_csv(std::cout, report);
  run.result("rows", report.rows.size());
  run.finish(kExitOk);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  Flags f;
  CLI::App app{"Sharp identification and inference for auction value distributions"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::vector<CLI::Option*> tol_opts;
  std::vector<CLI::Option*> family_opts;

  auto grid_flags = [&](CLI::App* s) {
    s->add_option("--grid-h", f.grid_h, "Value grid top H; values are {0, ..., H}")
        ->capture_default_str();
    s->add_option("--bid-max", f.bid_max, "Largest bid (default H); bids are {0, ..., bid-max}");
    s->add_option("--auction", f.auction, "Observed auction: first_price or second_price")
        ->capture_default_str();
  };
  auto data_flags = [&](CLI::App* s) {
    grid_flags(s);
    s->add_option("--bids", f.bids, "Bid CSV with header b1..bn[,prob]")->required();
    s->add_option("--out", f.out, "Output directory for CSV files and manifest.json");
  };
  auto tol_flag = [&](CLI::App* s) {
    tol_opts.push_back(s->add_option("--tol", f.tol, "Constraint relaxation"));
  };
  auto family_flag = [&](CLI::App* s) {
    family_opts.push_back(s->add_option("--family", f.family,
                                        "truncated_normal, poisson, binomial or geometric")
                              ->capture_default_str());
  };
  auto seed_flag = [&](CLI::App* s) {
    s->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  };

  auto* identify = app.add_subcommand("identify", "Membership test (--values) or sharp mean bounds");
  data_flags(identify);
  tol_flag(identify);
  identify->add_option("--values", f.values, "Value CSV: value,prob or v1..vn,prob");
  identify->add_option("--model", f.model, "cv, pv or ipv")->capture_default_str();
  identify->add_option("--lp-dump", f.lp_dump, "Write the linear program in LP format");

  auto* pset = app.add_subcommand("parametric-set", "Parametric identified or estimated set");
  data_flags(pset);
  tol_flag(pset);
  family_flag(pset);
  pset->add_option("--delta", f.delta, "Confidence level parameter")->capture_default_str();
  pset->add_option("--method", f.method, "population, hoeffding or bernstein");

  auto* cf = app.add_subcommand("counterfactual", "Sharp bounds on a metric in another auction");
  data_flags(cf);
  tol_flag(cf);
  cf->add_option("--alternative", f.alternative, "Alternative auction")->capture_default_str();
  cf->add_option("--metric", f.metric, "revenue, welfare or constant:<c>")->capture_default_str();

  auto* mc = app.add_subcommand("mc-run", "Monte Carlo experiment from a key=value config");
  mc->add_option("--config", f.config, "Experiment config file")->required();
  mc->add_option("--out", f.out, "Output directory");

  auto* heat = app.add_subcommand("heatmap", "Minimal tolerance per parameter");
  data_flags(heat);
  family_flag(heat);

  auto* ocs = app.add_subcommand("ocs-prep", "Preprocess raw auction records into a bid table");
  ocs->add_option("--input", f.input, "Raw CSV: auction_id,bidder_id,bid[,acreage,...]")->required();
  ocs->add_option("--grid-h", f.grid_h, "Value grid top H; bids scale to {0, ..., ceil(H/2)}")
      ->capture_default_str();
  ocs->add_option("--threshold", f.threshold, "Drop auctions with a bid above this")
      ->capture_default_str();
  ocs->add_option("--bidders", f.bidders, "Required bidder count")->capture_default_str();
  ocs->add_flag("--no-per-acre", f.no_per_acre, "Keep total bids");
  ocs->add_option("--out", f.out, "Output directory");
  seed_flag(ocs);

  auto* bbm = app.add_subcommand("bbm-compare", "Sharp mean bound against closed-form bounds");
  data_flags(bbm);

  auto* boot = app.add_subcommand("bootstrap", "Bayesian bootstrap of sets (--family) or mean intervals");
  data_flags(boot);
  tol_flag(boot);
  family_flag(boot);
  seed_flag(boot);
  boot->add_option("--draws", f.draws, "Bootstrap draws")->capture_default_str();

  auto* sub = app.add_subcommand("subsample", "Subsampling confidence set");
  data_flags(sub);
  family_flag(sub);
  seed_flag(sub);
  sub->add_option("--alpha", f.alpha, "Level")->capture_default_str();
  sub->add_option("--n-sub", f.n_sub, "Number of subsamples k")->capture_default_str();
  sub->add_option("--sub-frac", f.sub_frac, "Subsample size as a fraction of N")
      ->capture_default_str();
  sub->add_option("--refine", f.refine, "Cap on cutoff refinement rounds per phase")->capture_default_str();

  auto* sym = app.add_subcommand("symmetry-test", "Test symmetric independent private values");
  data_flags(sym);
  tol_flag(sym);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  bool tol_given = false;
  for (auto* o : tol_opts) tol_given = tol_given || o->count() > 0;
  bool family_given = false;
  for (auto* o : family_opts) family_given = family_given || o->count() > 0;

  try {
    if (*identify) return cmd_identify(f, tol_given);
    if (*pset) return cmd_parametric_set(f, tol_given);
    if (*cf) return cmd_counterfactual(f, tol_given);
    if (*mc) return cmd_mc_run(f);
    if (*heat) return cmd_heatmap(f);
    if (*ocs) return cmd_ocs_prep(f);
    if (*bbm) return cmd_bbm(f);
    if (*boot) return cmd_bootstrap(f, tol_given, family_given);
    if (*sub) return cmd_subsample(f);
    if (*sym) return cmd_symmetry(f, tol_given);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
