#pragma once

// Dyad x year panel shared by the simulation, estimation and ingestion code.

#include <string>
#include <vector>

#include "transnet/netcore.hpp"

namespace transnet {

struct PanelDataset {
  netcore::BipartiteGraph graph;       // links and USD values per year
  netcore::NodeCovariates sizes;       // seller total sales, buyer purchases
  netcore::ProximityMatrix proximity;  // over graph.sellers()
  std::vector<netcore::LatLon> seller_locations;  // optional, for export
  std::vector<std::string> seller_regions;        // optional, for export
  std::vector<std::string> destinations;          // tracked non-US destinations c
  std::vector<Matrix> dest_exports;               // per year: sellers x destinations, USD
  Matrix fx;                                      // years x destinations, LCU per USD

  std::size_t n_years() const noexcept { return graph.n_years(); }
  std::size_t n_sellers() const noexcept { return graph.n_sellers(); }
  std::size_t n_buyers() const noexcept { return graph.n_buyers(); }

  /// chi[k][c] = X_kct / X_kt with X_kt the seller's total sales; 0 when X_kt = 0.
  Matrix dest_share(std::size_t t) const;

  /// Throws on any shape inconsistency.
  void validate() const;
};

}  // namespace transnet
