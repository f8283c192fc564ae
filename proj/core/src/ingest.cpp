#include "transnet/ingest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "transnet/csv.hpp"
#include "transnet/errors.hpp"

namespace transnet::ingest {

bool Report::reconciles() const noexcept {
  return raw_rows == kept_rows + malformed + below_floor + missing_location + outside_region + inactive_seller;
}

namespace {

constexpr std::size_t kMaxDiagnostics = 20;

void diagnose(Report& r, const std::filesystem::path& file, std::size_t line, const std::string& reason) {
  if (r.diagnostics.size() < kMaxDiagnostics)
    r.diagnostics.push_back(file.filename().string() + ":" + std::to_string(line) + ": " + reason);
}

void check_fraction(const Report& r, std::size_t bad, std::size_t total, const std::filesystem::path& file,
                    double limit) {
  if (total > 0 && static_cast<double>(bad) > limit * static_cast<double>(total)) {
    std::string msg = file.string() + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                      " rows malformed";
    for (const auto& d : r.diagnostics) msg += "\n  " + d;
    throw InputError(msg);
  }
}

bool parse_year(const std::string& s, int& year) {
  long long v = 0;
  if (!csv::parse_int(s, v) || v < 1000 || v > 9999) return false;
  year = static_cast<int>(v);
  return true;
}

struct Location {
  netcore::LatLon at;
  std::string region;
};

struct Tx {
  int year;
  std::string seller, buyer;
  double value;
};

}  // namespace

Ingested ingest(const Paths& paths, const Options& opts, Report* report_out) {
  if (!(opts.value_floor >= 0.0)) throw ConfigError("ingest: value floor must be non-negative");
  if (opts.min_active_years == 0) throw ConfigError("ingest: min_active_years must be at least 1");
  if (paths.dest_exports.empty() != paths.fx.empty())
    throw ConfigError("ingest: dest_exports and fx must be given together");
  Report r;
  auto fail = [&](const std::string& msg) -> Ingested {
    if (report_out) *report_out = r;
    throw InputError(msg);
  };

  // Locations.
  std::unordered_map<std::string, Location> locations;
  {
    csv::Reader rd(paths.locations);
    std::size_t bad = 0;
    if (rd.has_header()) {
      const std::size_t cs = rd.column("seller_id"), cla = rd.column("lat"), clo = rd.column("lon"),
                        cr = rd.column("region");
      while (rd.next()) {
        ++r.location_rows;
        const auto& f = rd.fields();
        Location loc;
        if (!rd.ok() || f[cs].empty() || !csv::parse_double(f[cla], loc.at.lat) ||
            !csv::parse_double(f[clo], loc.at.lon) || std::abs(loc.at.lat) > 90.0 || std::abs(loc.at.lon) > 180.0) {
          ++bad;
          diagnose(r, paths.locations, rd.line_number(), "malformed location row");
          continue;
        }
        loc.region = f[cr];
        if (!locations.emplace(f[cs], loc).second)
          fail(paths.locations.string() + ":" + std::to_string(rd.line_number()) + ": duplicate seller '" + f[cs] +
               "'");
      }
    }
    check_fraction(r, bad, r.location_rows, paths.locations, opts.max_malformed_fraction);
  }

  // Transactions: malformed, value floor, location and region filters.
  std::vector<Tx> rows;
  std::set<std::string> sellers_seen;
  {
    csv::Reader rd(paths.transactions);
    if (rd.has_header()) {
      const std::size_t cy = rd.column("year"), cs = rd.column("seller_id"), cb = rd.column("buyer_id"),
                        cv = rd.column("value_usd");
      while (rd.next()) {
        ++r.raw_rows;
        const auto& f = rd.fields();
        Tx tx{};
        if (!rd.ok() || !parse_year(f[cy], tx.year) || f[cs].empty() || f[cb].empty() ||
            !csv::parse_double(f[cv], tx.value) || tx.value < 0.0) {
          ++r.malformed;
          diagnose(r, paths.transactions, rd.line_number(), "malformed transaction row");
          continue;
        }
        r.raw_value += tx.value;
        sellers_seen.insert(f[cs]);
        if (tx.value < opts.value_floor) {
          ++r.below_floor;
          continue;
        }
        const auto loc = locations.find(f[cs]);
        if (loc == locations.end()) {
          ++r.missing_location;
          continue;
        }
        if (!opts.region.empty() && loc->second.region != opts.region) {
          ++r.outside_region;
          continue;
        }
        tx.seller = f[cs];
        tx.buyer = f[cb];
        rows.push_back(std::move(tx));
      }
    }
    r.sellers_seen = sellers_seen.size();
    check_fraction(r, r.malformed, r.raw_rows, paths.transactions, opts.max_malformed_fraction);
  }

  // Minimum number of active years per seller.
  std::map<std::string, std::set<int>> active;
  for (const Tx& tx : rows) active[tx.seller].insert(tx.year);
  std::vector<Tx> kept;
  for (Tx& tx : rows) {
    if (active[tx.seller].size() < opts.min_active_years) {
      ++r.inactive_seller;
      continue;
    }
    r.kept_value += tx.value;
    kept.push_back(std::move(tx));
  }
  r.kept_rows = kept.size();
  r.value_coverage = r.raw_value > 0.0 ? r.kept_value / r.raw_value : 0.0;
  if (kept.empty()) fail("ingest: no transactions left after filters (raw rows " + std::to_string(r.raw_rows) + ")");

  // Registries sorted by label, years spanning the kept range.
  std::set<std::string> seller_set, buyer_set;
  int y0 = kept.front().year, y1 = kept.front().year;
  for (const Tx& tx : kept) {
    seller_set.insert(tx.seller);
    buyer_set.insert(tx.buyer);
    y0 = std::min(y0, tx.year);
    y1 = std::max(y1, tx.year);
  }
  netcore::Registry sellers(netcore::Role::seller, {seller_set.begin(), seller_set.end()});
  netcore::Registry buyers(netcore::Role::buyer, {buyer_set.begin(), buyer_set.end()});
  std::vector<int> years;
  for (int y = y0; y <= y1; ++y) years.push_back(y);
  const std::size_t T = years.size(), ns = sellers.size(), nb = buyers.size();
  r.sellers_kept = ns;
  r.buyers_kept = nb;
  r.years = T;
  r.seller_coverage = r.sellers_seen ? static_cast<double>(ns) / static_cast<double>(r.sellers_seen) : 0.0;

  std::vector<Matrix> values(T, Matrix(ns, nb));
  for (const Tx& tx : kept)
    values[static_cast<std::size_t>(tx.year - y0)](sellers.at(tx.seller).index, buyers.at(tx.buyer).index) += tx.value;

  Ingested out;
  PanelDataset& p = out.panel;
  p.graph = netcore::BipartiteGraph(sellers, buyers, years, std::move(values));
  p.sizes = netcore::NodeCovariates::from_graph(p.graph);
  p.seller_locations.resize(ns);
  p.seller_regions.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const Location& loc = locations.at(sellers.label(i));
    p.seller_locations[i] = loc.at;
    p.seller_regions[i] = loc.region;
  }
  p.proximity = netcore::build_proximity(netcore::distance_matrix(p.seller_locations), opts.proximity);

  // Destination exports and exchange rates.
  p.fx = Matrix(T, 0);
  p.dest_exports.assign(T, Matrix(ns, 0));
  if (!paths.fx.empty()) {
    std::map<std::pair<int, std::string>, double> fx;
    std::set<std::string> dests;
    {
      csv::Reader rd(paths.fx);
      std::size_t bad = 0;
      if (rd.has_header()) {
        const std::size_t cy = rd.column("year"), cd = rd.column("dest_code"), cr = rd.column("lcu_per_usd");
        while (rd.next()) {
          ++r.fx_rows;
          const auto& f = rd.fields();
          int year = 0;
          double rate = 0.0;
          if (!rd.ok() || !parse_year(f[cy], year) || f[cd].empty() || !csv::parse_double(f[cr], rate) ||
              !(rate > 0.0)) {
            ++bad;
            diagnose(r, paths.fx, rd.line_number(), "malformed exchange-rate row");
            continue;
          }
          if (!fx.emplace(std::make_pair(year, f[cd]), rate).second)
            fail(paths.fx.string() + ":" + std::to_string(rd.line_number()) + ": duplicate (year, dest_code)");
          dests.insert(f[cd]);
        }
      }
      check_fraction(r, bad, r.fx_rows, paths.fx, opts.max_malformed_fraction);
    }
    p.destinations.assign(dests.begin(), dests.end());
    const std::size_t nc = p.destinations.size();
    p.fx = Matrix(T, nc);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < nc; ++c) {
        const auto it = fx.find({years[t], p.destinations[c]});
        if (it == fx.end())
          fail("fx: missing rate for " + p.destinations[c] + " in " + std::to_string(years[t]));
        p.fx(t, c) = it->second;
      }

    p.dest_exports.assign(T, Matrix(ns, nc));
    csv::Reader rd(paths.dest_exports);
    std::size_t bad = 0;
    if (rd.has_header()) {
      const std::size_t cy = rd.column("year"), cs = rd.column("seller_id"), cd = rd.column("dest_code"),
                        cv = rd.column("value_usd");
      while (rd.next()) {
        ++r.dest_export_rows;
        const auto& f = rd.fields();
        int year = 0;
        double v = 0.0;
        if (!rd.ok() || !parse_year(f[cy], year) || f[cs].empty() || !csv::parse_double(f[cv], v) || v < 0.0) {
          ++bad;
          diagnose(r, paths.dest_exports, rd.line_number(), "malformed destination-export row");
          continue;
        }
        const auto dit = std::lower_bound(p.destinations.begin(), p.destinations.end(), f[cd]);
        if (year < y0 || year > y1 || !sellers.contains(f[cs]) || dit == p.destinations.end() || *dit != f[cd]) {
          ++r.dest_export_unmatched;
          continue;
        }
        p.dest_exports[static_cast<std::size_t>(year - y0)](sellers.at(f[cs]).index,
                                                            static_cast<std::size_t>(dit - p.destinations.begin())) += v;
      }
    }
    check_fraction(r, bad, r.dest_export_rows, paths.dest_exports, opts.max_malformed_fraction);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t c = 0; c < nc; ++c) p.sizes.seller_size(t, i) += p.dest_exports[t](i, c);
  }
  p.validate();
  out.report = r;
  if (report_out) *report_out = r;
  return out;
}

}  // namespace transnet::ingest
