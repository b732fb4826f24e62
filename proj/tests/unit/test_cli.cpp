#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bceid/cli.hpp"
#include "bceid/error.hpp"

using namespace bceid;

namespace {

RawAuctionTable parse(const std::string& text) {
  std::istringstream in(text);
  return ingest_csv(in, "inline");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("csv splitting handles quotes") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line("\"x,y\",\"say \"\"hi\"\"\"") ==
        std::vector<std::string>{"x,y", "say \"hi\""});
}

TEST_CASE("ingest reads rows and keeps covariates") {
  auto t = parse("auction_id,bidder_id,bid,acreage,year\n"
                 "A,1,100,10,1960\n"
                 "A,2,50,10,1960\n"
                 "B,1,7,,1961\n");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.num_auctions() == 2);
  CHECK(t.has_acreage);
  CHECK(t.covariate_names == std::vector<std::string>{"year"});
  CHECK(t.rows[1].bid == 50.0);
  CHECK(t.rows[0].acreage == 10.0);
  CHECK(std::isnan(t.rows[2].acreage));
  CHECK(t.rows[2].covariates == std::vector<std::string>{"1961"});
  CHECK(t.rows[2].line == 4);
}

TEST_CASE("ingest errors name the offending line") {
  CHECK(error_of("auction_id,bidder_id,bid\nA,1,3\nA,2,-4\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of("auction_id,bidder_id,bid\nA,1,abc\n").find("line 2") != std::string::npos);
  CHECK(error_of("auction_id,bidder_id,bid\nA,1\n").find("line 2") != std::string::npos);
  CHECK(error_of("auction_id,bid\nA,3\n").find("bidder_id") != std::string::npos);
  CHECK(error_of("auction_id,bidder_id,bid,acreage\nA,1,3,0\n").find("line 2") !=
        std::string::npos);
  CHECK_THROWS_AS(ingest("/nonexistent/file.csv"), InputError);
}

TEST_CASE("preprocess rescales, rounds and logs drops") {
  auto t = parse("auction_id,bidder_id,bid,acreage\n"
                 "A,1,100,10\n"
                 "A,2,50,10\n"
                 "B,1,30,1\n"
                 "C,1,200000,2\n"
                 "C,2,10,2\n"
                 "D,1,0,5\n"
                 "D,2,25,5\n"
                 "E,1,4,1\n"
                 "E,2,4,1\n"
                 "E,3,4,1\n");
  PreprocessSpec spec;
  spec.H = 20;
  spec.seed = 3;
  auto r = preprocess(t, spec);
  const auto& a = r.audit;
  CHECK(a.input_auctions == 5);
  CHECK(a.dropped_bidder_count == 2);
  CHECK(a.dropped_threshold == 1);
  CHECK(a.retained == 2);
  CHECK(a.input_auctions == a.dropped_bidder_count + a.dropped_threshold + a.retained);
  CHECK(a.dropped.size() == 3);
  CHECK(a.bid_cap == 10);
  CHECK(a.max_bid == 10.0);
  CHECK(a.scale == 1.0);
  CHECK(a.bids_before_threshold == 6);
  CHECK(a.bids_retained == 4);
  CHECK(a.mean_retained == doctest::Approx(5.0));
  REQUIRE(r.sample.size() == 2);
  auto first = r.sample.draws[0];
  std::sort(first.begin(), first.end());
  CHECK(first == BidProfile{5, 10});
  auto second = r.sample.draws[1];
  std::sort(second.begin(), second.end());
  CHECK(second == BidProfile{0, 5});
  CHECK(r.grid.H() == 20.0);
  CHECK(r.grid.players() == 2);
  r.sample.validate(r.grid);

  auto again = preprocess(t, spec);
  CHECK(again.sample.draws == r.sample.draws);

  std::ostringstream log;
  write_audit_log(log, a);
  CHECK(log.str().find("dropped=C,bid above threshold") != std::string::npos);
  CHECK(log.str().find("retained=2") != std::string::npos);
}

TEST_CASE("preprocess rounds after scaling to the cap") {
  auto t = parse("auction_id,bidder_id,bid\nA,1,3\nA,2,1.2\nB,1,0.6\nB,2,0\n");
  PreprocessSpec spec;
  spec.per_acre = false;
  spec.H = 10;
  auto r = preprocess(t, spec);
  CHECK(r.audit.bid_cap == 5);
  CHECK(r.audit.scale == doctest::Approx(5.0 / 3.0));
  auto a = r.sample.draws[0];
  std::sort(a.begin(), a.end());
  CHECK(a == BidProfile{2, 5});
  auto b = r.sample.draws[1];
  std::sort(b.begin(), b.end());
  CHECK(b == BidProfile{0, 1});

  auto none = parse("auction_id,bidder_id,bid\nA,1,3\n");
  CHECK_THROWS_AS(preprocess(none, spec), InputError);
}

TEST_CASE("synthetic OCS fixture reproduces the reported counts") {
  auto t = ingest(std::string(BCEID_FIXTURE_DIR) + "/ocs_synthetic.csv");
  PreprocessSpec spec;
  auto r = preprocess(t, spec);
  const auto& a = r.audit;
  CHECK(a.input_auctions == 3036);
  CHECK(a.input_auctions - a.dropped_bidder_count == 584);
  CHECK(a.dropped_threshold == 3);
  CHECK(a.retained == 581);
  CHECK(a.mean_retained == doctest::Approx(991.48).epsilon(1e-6));
  CHECK(a.sd_retained == doctest::Approx(1825.43).epsilon(1e-6));
  CHECK(a.bid_cap == 100);
  for (const auto& d : r.sample.draws) {
    for (auto b : d) CHECK(b <= 100u);
  }
}

TEST_CASE("bid and value tables") {
  auto grid = SupportGrid::integer(2, 4, 4);
  std::istringstream weighted("b1,b2,prob\n1,1,0.5\n2,0,0.5\n");
  auto t = read_bid_table(weighted, "w");
  CHECK(t.weighted());
  auto phi = to_distribution(t, grid);
  CHECK(phi.size() == 2);
  CHECK_THROWS_AS(to_sample(t, grid), InputError);

  std::istringstream bad("b1,b2,prob\n1,1,0.5\n2,0,0.4\n");
  auto tb = read_bid_table(bad, "bad");
  CHECK_THROWS(to_distribution(tb, grid));

  std::istringstream raw("b1,b2\n1,1\n1,1\n0,2\n");
  auto tr = read_bid_table(raw, "raw");
  auto s = to_sample(tr, grid);
  CHECK(s.size() == 3);
  std::ostringstream out;
  write_bid_table(out, s, grid);
  std::istringstream back(out.str());
  auto round = to_sample(read_bid_table(back, "back"), grid);
  CHECK(round.draws == s.draws);

  std::istringstream values("value,prob\n0,0.25\n4,0.75\n");
  auto pi = read_value_table(values, grid);
  CHECK(pi.size() == 5);
  CHECK(pi[0] == 0.25);
  CHECK(pi[4] == 0.75);

  std::istringstream joint("v1,v2,prob\n0,4,0.5\n4,0,0.5\n");
  auto vt = read_values(joint, grid);
  CHECK(vt.joint);
  REQUIRE(vt.probs.size() == 25);
  CHECK(vt.probs[4] == 0.5);
  CHECK(vt.probs[20] == 0.5);
  std::istringstream joint_again("v1,v2,prob\n0,4,1\n");
  CHECK_THROWS_AS(read_value_table(joint_again, grid), InputError);
  std::istringstream off_grid("value,prob\n0.5,1\n");
  CHECK_THROWS_AS(read_value_table(off_grid, grid), InputError);
}

TEST_CASE("heatmap values are zero on the identified set") {
  auto grid = SupportGrid::integer(2, 6, 6);
  auto u = UtilityKernel::first_price();
  auto family = Family::make(FamilyKind::truncated_geometric, 6.0);
  auto thetas = ThetaGrid::product({{0.1, 0.3, 0.5, 0.7, 0.9}});
  auto phi = BidDistribution::point_mass({0, 0});
  auto values = heatmap_grid(phi, grid, u, family, thetas);
  REQUIRE(values.size() == thetas.size());
  for (double v : values) CHECK(v >= 0.0);
  CHECK(values == heatmap_grid(phi, grid, u, family, thetas));

  auto set = parametric_identified_set(phi, grid, u, family, thetas, lp::kFeasibilityTolerance);
  REQUIRE(set.mask.size() == thetas.size());
  CHECK_FALSE(set.empty());
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (set.mask[k]) CHECK(values[k] <= set.tolerance);
  }
  for (double c1 : {0.0, 0.01, 0.1}) {
    for (double c2 : {0.01, 0.1, 1.0}) {
      if (c1 > c2) continue;
      CHECK(threshold_set(values, c1, "heatmap").subset_of(threshold_set(values, c2, "heatmap")));
    }
  }
  std::ostringstream out;
  write_heatmap_csv(out, family, thetas, values, {{"H", "6"}});
  CHECK(out.str().rfind("# H=6\n", 0) == 0);
}
