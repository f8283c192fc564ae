#pragma once

// Customs-style CSV ingestion into a PanelDataset:
//   transactions.csv  year,seller_id,buyer_id,value_usd
//   locations.csv     seller_id,lat,lon,region
//   dest_exports.csv  year,seller_id,dest_code,value_usd   (optional)
//   fx.csv            year,dest_code,lcu_per_usd           (optional, with dest_exports)

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "transnet/netcore.hpp"
#include "transnet/panel_data.hpp"

namespace transnet::ingest {

struct Paths {
  std::filesystem::path transactions;
  std::filesystem::path locations;
  std::filesystem::path dest_exports;  // empty: no destination data
  std::filesystem::path fx;
};

struct Options {
  double value_floor = 100.0;         // transactions below are excluded
  std::size_t min_active_years = 4;   // sellers active in fewer years are excluded
  std::string region;                 // empty keeps all regions
  netcore::ProximitySpec proximity;
  double max_malformed_fraction = 0.01;
};

/// Counts per filter. raw_rows = kept_rows + malformed + below_floor +
/// missing_location + outside_region + inactive_seller.
struct Report {
  std::size_t raw_rows = 0;
  std::size_t malformed = 0;
  std::size_t below_floor = 0;
  std::size_t missing_location = 0;
  std::size_t outside_region = 0;
  std::size_t inactive_seller = 0;
  std::size_t kept_rows = 0;
  std::size_t sellers_seen = 0;
  std::size_t sellers_kept = 0;
  std::size_t buyers_kept = 0;
  std::size_t years = 0;
  double raw_value = 0.0;   // over well-formed rows
  double kept_value = 0.0;
  double value_coverage = 0.0;  // kept_value / raw_value
  double seller_coverage = 0.0; // sellers_kept / sellers_seen
  std::size_t location_rows = 0;
  std::size_t dest_export_rows = 0;
  std::size_t dest_export_unmatched = 0;  // rows of sellers or destinations outside the panel
  std::size_t fx_rows = 0;
  std::vector<std::string> diagnostics;  // first malformed rows, "file:line: reason"

  bool reconciles() const noexcept;
};

struct Ingested {
  PanelDataset panel;
  Report report;
};

/// Reads, validates, filters and joins the inputs. Sellers and buyers are
/// ordered by label, years span min..max of the kept rows. Seller size is US
/// purchases plus tracked destination exports; buyer size is purchases.
/// Throws InputError when a file is missing or malformed beyond the allowed
/// fraction, when fx does not cover every (year, destination), or when no rows
/// survive the filters. If report is non-null it receives the counts even when
/// an error is thrown after reading.
Ingested ingest(const Paths& paths, const Options& opts, Report* report = nullptr);

}  // namespace transnet::ingest
