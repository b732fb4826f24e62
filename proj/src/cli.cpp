#include "bceid/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "bceid/error.hpp"
#include "bceid/random.hpp"

namespace bceid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

InputError line_error(std::size_t line, const std::string& what) {
  return InputError("line " + std::to_string(line) + ": " + what);
}

bool parse_number(const std::string& cell, double& out) {
  const std::string s = trim(cell);
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

Moments summarize(const std::vector<double>& x) {
  Moments m;
  m.n = x.size();
  if (x.empty()) return m;
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : x) {
    ++k;
    const double d = v - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (v - mean);
  }
  m.mean = mean;
  m.sd = x.size() > 1 ? std::sqrt(m2 / static_cast<double>(x.size() - 1)) : 0.0;
  return m;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::size_t RawAuctionTable::num_auctions() const {
  std::unordered_map<std::string, char> seen;
  for (const auto& r : rows) seen.emplace(r.auction_id, 1);
  return seen.size();
}

RawAuctionTable ingest(const std::string& path) {
  auto in = open_input(path);
  return ingest_csv(in, path);
}

RawAuctionTable ingest_csv(std::istream& in, const std::string& provenance) {
  RawAuctionTable table;
  table.provenance = provenance;
  std::string line;
  if (!std::getline(in, line)) throw InputError("line 1: missing header");
  const auto header = split_csv_line(line);
  std::ptrdiff_t col_auction = -1, col_bidder = -1, col_bid = -1, col_acreage = -1;
  std::vector<std::size_t> covariate_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "auction_id") {
      col_auction = static_cast<std::ptrdiff_t>(c);
    } else if (h == "bidder_id") {
      col_bidder = static_cast<std::ptrdiff_t>(c);
    } else if (h == "bid") {
      col_bid = static_cast<std::ptrdiff_t>(c);
    } else if (h == "acreage") {
      col_acreage = static_cast<std::ptrdiff_t>(c);
    } else {
      covariate_cols.push_back(c);
      table.covariate_names.push_back(h);
    }
  }
  for (const auto& [col, name] : {std::pair{col_auction, "auction_id"},
                                  std::pair{col_bidder, "bidder_id"},
                                  std::pair{col_bid, "bid"}}) {
    if (col < 0) throw line_error(1, std::string("missing column '") + name + "'");
  }
  table.has_acreage = col_acreage >= 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw line_error(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(f.size()));
    }
    AuctionRow row;
    row.line = line_no;
    row.auction_id = f[static_cast<std::size_t>(col_auction)];
    row.bidder_id = f[static_cast<std::size_t>(col_bidder)];
    if (row.auction_id.empty()) throw line_error(line_no, "empty auction_id");
    const auto& bid_cell = f[static_cast<std::size_t>(col_bid)];
    if (!parse_number(bid_cell, row.bid)) {
      throw line_error(line_no, "bid '" + bid_cell + "' is not a number");
    }
    if (row.bid < 0.0) throw line_error(line_no, "negative bid " + bid_cell);
    row.acreage = std::numeric_limits<double>::quiet_NaN();
    if (col_acreage >= 0) {
      const auto& cell = f[static_cast<std::size_t>(col_acreage)];
      if (!cell.empty()) {
        if (!parse_number(cell, row.acreage) || !(row.acreage > 0.0)) {
          throw line_error(line_no, "acreage '" + cell + "' is not a positive number");
        }
      }
    }
    for (std::size_t c : covariate_cols) row.covariates.push_back(f[c]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

PreprocessResult preprocess(const RawAuctionTable& table, const PreprocessSpec& spec) {
  if (spec.bidders < 1) throw DomainError("bidder count must be positive");
  if (!(spec.threshold > 0.0)) throw DomainError("threshold must be positive");
  if (spec.H < 1) throw DomainError("grid top H must be positive");

  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> ids;
  std::vector<std::vector<const AuctionRow*>> groups;
  for (const auto& r : table.rows) {
    auto [it, fresh] = index.emplace(r.auction_id, groups.size());
    if (fresh) {
      ids.push_back(r.auction_id);
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }

  AuditLog audit;
  audit.input_auctions = groups.size();
  audit.bid_cap = spec.bid_cap();
  audit.seed = spec.seed;
  std::vector<std::vector<double>> kept;
  std::vector<double> before;
  std::vector<double> after;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    const auto& g = groups[a];
    if (g.size() != spec.bidders) {
      ++audit.dropped_bidder_count;
      audit.dropped.push_back({ids[a], "bidder count " + std::to_string(g.size())});
      continue;
    }
    std::vector<double> bids;
    for (const AuctionRow* r : g) {
      double b = r->bid;
      if (spec.per_acre) {
        if (!(r->acreage > 0.0)) throw line_error(r->line, "acreage is required per acre");
        b /= r->acreage;
      }
      bids.push_back(b);
    }
    before.insert(before.end(), bids.begin(), bids.end());
    if (*std::max_element(bids.begin(), bids.end()) > spec.threshold) {
      ++audit.dropped_threshold;
      audit.dropped.push_back({ids[a], "bid above threshold"});
      continue;
    }
    after.insert(after.end(), bids.begin(), bids.end());
    kept.push_back(std::move(bids));
  }
  audit.retained = kept.size();
  if (kept.empty()) throw InputError("no auctions retained after preprocessing");

  const Moments mb = summarize(before);
  const Moments ma = summarize(after);
  audit.bids_before_threshold = mb.n;
  audit.mean_before_threshold = mb.mean;
  audit.sd_before_threshold = mb.sd;
  audit.bids_retained = ma.n;
  audit.mean_retained = ma.mean;
  audit.sd_retained = ma.sd;
  audit.max_bid = *std::max_element(after.begin(), after.end());
  const double cap = static_cast<double>(audit.bid_cap);
  audit.scale = audit.max_bid > 0.0 ? cap / audit.max_bid : 1.0;

  BidSample sample;
  sample.seed = spec.seed;
  sample.provenance = table.provenance;
  std::mt19937_64 rng = task_rng(spec.seed, 0);
  for (auto& bids : kept) {
    BidProfile p(bids.size());
    for (std::size_t i = 0; i < bids.size(); ++i) {
      p[i] = static_cast<std::size_t>(std::clamp(std::round(bids[i] * audit.scale), 0.0, cap));
    }
    for (std::size_t i = p.size(); i > 1; --i) {
      const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
      std::swap(p[i - 1], p[j]);
    }
    sample.draws.push_back(std::move(p));
  }
  return {std::move(sample), SupportGrid::integer(spec.bidders, spec.H, spec.H), audit};
}

void write_audit_log(std::ostream& out, const AuditLog& a) {
  out << std::setprecision(12);
  out << "input_auctions=" << a.input_auctions << '\n'
      << "dropped_bidder_count=" << a.dropped_bidder_count << '\n'
      << "dropped_threshold=" << a.dropped_threshold << '\n'
      << "retained=" << a.retained << '\n'
      << "bids_before_threshold=" << a.bids_before_threshold << '\n'
      << "mean_before_threshold=" << a.mean_before_threshold << '\n'
      << "sd_before_threshold=" << a.sd_before_threshold << '\n'
      << "bids_retained=" << a.bids_retained << '\n'
      << "mean_retained=" << a.mean_retained << '\n'
      << "sd_retained=" << a.sd_retained << '\n'
      << "max_bid=" << a.max_bid << '\n'
      << "bid_cap=" << a.bid_cap << '\n'
      << "scale=" << a.scale << '\n'
      << "seed=" << a.seed << '\n';
  for (const auto& d : a.dropped) out << "dropped=" << d.auction_id << ',' << d.reason << '\n';
}

BidTable read_bid_table(std::istream& in, const std::string& provenance) {
  BidTable table;
  table.provenance = provenance;
  std::string line;
  if (!std::getline(in, line)) throw InputError("line 1: missing header");
  const auto header = split_csv_line(line);
  std::ptrdiff_t prob_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "prob") {
      if (prob_col >= 0) throw line_error(1, "duplicate prob column");
      prob_col = static_cast<std::ptrdiff_t>(c);
    }
  }
  table.players = header.size() - (prob_col >= 0 ? 1 : 0);
  if (table.players == 0) throw line_error(1, "no bid columns");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw line_error(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(f.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < f.size(); ++c) {
      double x = 0.0;
      if (!parse_number(f[c], x)) throw line_error(line_no, "'" + f[c] + "' is not a number");
      if (x < 0.0) throw line_error(line_no, "negative entry " + f[c]);
      if (static_cast<std::ptrdiff_t>(c) == prob_col) {
        table.probs.push_back(x);
      } else {
        row.push_back(x);
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw InputError(provenance + ": no bid rows");
  return table;
}

BidTable read_bid_table(const std::string& path) {
  auto in = open_input(path);
  return read_bid_table(in, path);
}

namespace {

BidProfile row_profile(const BidTable& table, std::size_t k, const SupportGrid& grid) {
  if (table.players != grid.players()) {
    throw InputError(table.provenance + ": " + std::to_string(table.players) +
                     " bid columns for " + std::to_string(grid.players()) + " players");
  }
  try {
    return grid.to_profile(table.rows[k]);
  } catch (const DomainError& e) {
    throw InputError(table.provenance + ": row " + std::to_string(k + 1) + ": " + e.what());
  }
}

}  // namespace

BidSample to_sample(const BidTable& table, const SupportGrid& grid) {
  if (table.weighted()) throw InputError(table.provenance + ": weighted table is not a sample");
  BidSample s;
  s.provenance = table.provenance;
  s.draws.reserve(table.rows.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) s.draws.push_back(row_profile(table, k, grid));
  return s;
}

BidDistribution to_distribution(const BidTable& table, const SupportGrid& grid) {
  if (!table.weighted()) return empirical_distribution(to_sample(table, grid));
  std::vector<BidProfile> support;
  for (std::size_t k = 0; k < table.rows.size(); ++k) support.push_back(row_profile(table, k, grid));
  double total = 0.0;
  for (double p : table.probs) total += p;
  if (std::abs(total - 1.0) > 1e-6) {
    throw InputError(table.provenance + ": probabilities sum to " + std::to_string(total));
  }
  return BidDistribution::normalized(std::move(support), table.probs);
}

void write_bid_table(std::ostream& out, const BidSample& sample, const SupportGrid& grid) {
  for (std::size_t i = 0; i < grid.players(); ++i) out << (i ? "," : "") << 'b' << i + 1;
  out << '\n' << std::setprecision(12);
  for (const auto& d : sample.draws) {
    const auto a = grid.amounts(d);
    for (std::size_t i = 0; i < a.size(); ++i) out << (i ? "," : "") << a[i];
    out << '\n';
  }
}

ValueTable read_values(std::istream& in, const SupportGrid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("line 1: missing header");
  const auto header = split_csv_line(line);
  const std::size_t n = grid.players();
  ValueTable table;
  if (header.size() == 2 && header[0] == "value" && header[1] == "prob") {
    table.joint = false;
  } else {
    bool joint = header.size() == n + 1 && header.back() == "prob";
    for (std::size_t i = 0; joint && i < n; ++i) joint = header[i] == "v" + std::to_string(i + 1);
    if (!joint) throw line_error(1, "expected header value,prob or v1..vn,prob");
    table.joint = true;
  }
  const std::size_t V = grid.num_values();
  std::size_t size = 1;
  if (table.joint) {
    for (std::size_t i = 0; i < n; ++i) size *= V;
  } else {
    size = V;
  }
  table.probs.assign(size, 0.0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw line_error(line_no, "wrong number of fields");
    std::vector<double> x(f.size());
    for (std::size_t c = 0; c < f.size(); ++c) {
      if (!parse_number(f[c], x[c])) throw line_error(line_no, "'" + f[c] + "' is not a number");
    }
    if (x.back() < 0.0) throw line_error(line_no, "negative probability");
    std::size_t index = 0;
    try {
      for (std::size_t c = 0; c + 1 < x.size(); ++c) index = index * V + grid.value_index(x[c]);
    } catch (const DomainError& e) {
      throw line_error(line_no, e.what());
    }
    table.probs[index] += x.back();
  }
  try {
    check_value_distribution(table.probs, size);
  } catch (const DomainError& e) {
    throw InputError(std::string("value table: ") + e.what());
  }
  return table;
}

ValueTable read_values(const std::string& path, const SupportGrid& grid) {
  auto in = open_input(path);
  return read_values(in, grid);
}

ValueDistribution read_value_table(std::istream& in, const SupportGrid& grid) {
  auto table = read_values(in, grid);
  if (table.joint) throw InputError("line 1: expected header value,prob");
  return std::move(table.probs);
}

ValueDistribution read_value_table(const std::string& path, const SupportGrid& grid) {
  auto in = open_input(path);
  return read_value_table(in, grid);
}

std::vector<double> heatmap_grid(const BidDistribution& phi, const SupportGrid& grid,
                                 const UtilityKernel& u, const Family& family,
                                 const ThetaGrid& thetas) {
  auto values = parametric_minimax_values(phi, grid, u, family, thetas);
  for (double& v : values) v = std::max(v, 0.0);
  return values;
}

void write_heatmap_csv(std::ostream& out, const Family& family, const ThetaGrid& thetas,
                       const std::vector<double>& values, const Metadata& meta) {
  if (values.size() != thetas.size()) throw DomainError("one value per parameter is required");
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
  for (const auto& name : family.parameter_names()) out << name << ',';
  out << "value\n" << std::setprecision(12);
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    for (double x : thetas.points[k]) out << x << ',';
    out << values[k] << '\n';
  }
}

}  // namespace bceid
