#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bceid/inference.hpp"
#include "bceid/model.hpp"
#include "bceid/parametric.hpp"
#include "bceid/sharp.hpp"

namespace bceid {

/// Splits one CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);

struct AuctionRow {
  std::string auction_id;
  std::string bidder_id;
  /// Total bid in dollars.
  double bid = 0.0;
  /// NaN when the column is absent or the cell is empty.
  double acreage = 0.0;
  /// Remaining columns, in header order.
  std::vector<std::string> covariates;
  std::size_t line = 0;
};

/// Raw auction records. Required header columns: auction_id, bidder_id,
/// bid; optional: acreage; all other columns are kept as covariates.
struct RawAuctionTable {
  std::vector<AuctionRow> rows;
  std::vector<std::string> covariate_names;
  bool has_acreage = false;
  std::string provenance;

  std::size_t num_auctions() const;
};

/// Errors are InputError values naming the offending line.
RawAuctionTable ingest(const std::string& path);
RawAuctionTable ingest_csv(std::istream& in, const std::string& provenance);

struct PreprocessSpec {
  std::size_t bidders = 2;
  bool per_acre = true;
  /// Auctions with any (per-acre when normalized) bid above this are dropped.
  double threshold = 20000.0;
  /// Value grid top; bids are scaled into {0, ..., ceil(H / 2)}.
  int H = 200;
  std::uint64_t seed = 0;

  int bid_cap() const { return (H + 1) / 2; }
};

struct DroppedAuction {
  std::string auction_id;
  std::string reason;
};

struct AuditLog {
  std::size_t input_auctions = 0;
  std::size_t dropped_bidder_count = 0;
  std::size_t dropped_threshold = 0;
  std::size_t retained = 0;
  std::vector<DroppedAuction> dropped;
  /// Largest retained normalized bid and the factor mapping it to the cap.
  double max_bid = 0.0;
  double scale = 0.0;
  int bid_cap = 0;
  /// Normalized bids of the auctions with the required bidder count,
  /// before and after the threshold filter (sample standard deviation).
  std::size_t bids_before_threshold = 0;
  double mean_before_threshold = 0.0;
  double sd_before_threshold = 0.0;
  std::size_t bids_retained = 0;
  double mean_retained = 0.0;
  double sd_retained = 0.0;
  std::uint64_t seed = 0;
};

struct PreprocessResult {
  BidSample sample;
  SupportGrid grid;
  AuditLog audit;
};

/// Bidder-count filter, per-acre normalization, threshold filter, scaling by
/// the largest retained bid, rounding to the nearest integer and a seeded
/// random assignment of bidder identities within each auction.
PreprocessResult preprocess(const RawAuctionTable& table, const PreprocessSpec& spec);

void write_audit_log(std::ostream& out, const AuditLog& audit);

/// Bid table: header b1..bn, optionally followed by prob. Without prob each
/// row is one observation; with prob the rows form a distribution.
struct BidTable {
  std::size_t players = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> probs;
  std::string provenance;

  bool weighted() const { return !probs.empty(); }
};

BidTable read_bid_table(std::istream& in, const std::string& provenance);
BidTable read_bid_table(const std::string& path);

/// Observations as a sample (only for unweighted tables).
BidSample to_sample(const BidTable& table, const SupportGrid& grid);

/// Exact distribution for weighted tables, empirical otherwise.
BidDistribution to_distribution(const BidTable& table, const SupportGrid& grid);

void write_bid_table(std::ostream& out, const BidSample& sample, const SupportGrid& grid);

/// Value table with header value,prob; the masses are placed on the grid
/// values (unlisted values get 0).
ValueDistribution read_value_table(std::istream& in, const SupportGrid& grid);
ValueDistribution read_value_table(const std::string& path, const SupportGrid& grid);

/// Either a marginal table (value,prob) or a joint table over value vectors
/// (v1..vn,prob, player 0 most significant in the index).
struct ValueTable {
  bool joint = false;
  ValueDistribution probs;
};

ValueTable read_values(std::istream& in, const SupportGrid& grid);
ValueTable read_values(const std::string& path, const SupportGrid& grid);

/// max(Q(theta), 0) for every theta; the level sets are the estimated sets.
std::vector<double> heatmap_grid(const BidDistribution& phi, const SupportGrid& grid,
                                 const UtilityKernel& u, const Family& family,
                                 const ThetaGrid& thetas);

void write_heatmap_csv(std::ostream& out, const Family& family, const ThetaGrid& thetas,
                       const std::vector<double>& values, const Metadata& meta);

}  // namespace bceid
