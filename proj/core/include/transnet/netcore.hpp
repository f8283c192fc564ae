#pragma once

// Core data model for bipartite seller-buyer trade networks: node registries,
// year-indexed adjacency, seller-seller proximity, the common-support index and
// triad statistics.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "transnet/grid.hpp"

namespace transnet::netcore {

enum class Role : std::uint8_t { seller, buyer };

struct TraderId {
  Role role;
  std::size_t index;
  friend bool operator==(const TraderId&, const TraderId&) = default;
};

/// Append-only label registry. Labels are unique within a registry.
class Registry {
 public:
  Registry() = default;
  explicit Registry(Role role) : role_(role) {}
  Registry(Role role, std::vector<std::string> labels);

  Role role() const noexcept { return role_; }
  std::size_t size() const noexcept { return labels_.size(); }
  TraderId add(const std::string& label);
  bool contains(const std::string& label) const { return index_.contains(label); }
  TraderId at(const std::string& label) const;
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Registry of n synthetic labels "<prefix><index>".
  static Registry numbered(Role role, std::size_t n, const std::string& prefix);

 private:
  Role role_ = Role::seller;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Year-indexed seller x buyer transaction values; a link exists iff value > 0.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;
  BipartiteGraph(Registry sellers, Registry buyers, std::vector<int> years,
                 std::vector<Matrix> values);

  /// Graph whose links carry unit value.
  static BipartiteGraph from_links(Registry sellers, Registry buyers, std::vector<int> years,
                                   const std::vector<Adjacency>& links);

  const Registry& sellers() const noexcept { return sellers_; }
  const Registry& buyers() const noexcept { return buyers_; }
  const std::vector<int>& years() const noexcept { return years_; }
  std::size_t n_sellers() const noexcept { return sellers_.size(); }
  std::size_t n_buyers() const noexcept { return buyers_.size(); }
  std::size_t n_years() const noexcept { return years_.size(); }
  std::size_t year_index(int year) const;

  const Matrix& values(std::size_t t) const { return values_.at(t); }
  const Adjacency& links(std::size_t t) const { return links_.at(t); }

 private:
  Registry sellers_{Role::seller};
  Registry buyers_{Role::buyer};
  std::vector<int> years_;
  std::vector<Matrix> values_;
  std::vector<Adjacency> links_;
};

/// Year x node sizes (annual sales for sellers, purchases for buyers), USD.
struct NodeCovariates {
  Matrix seller_size;  // years x sellers
  Matrix buyer_size;   // years x buyers

  /// Node sizes implied by the graph's transaction values.
  static NodeCovariates from_graph(const BipartiteGraph& g);
  std::vector<double> seller_mean() const;
  std::vector<double> buyer_mean() const;
};

// ---------------------------------------------------------------------------
// Geography

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Great-circle distance in km. Throws DomainError for out-of-range coordinates.
double haversine_distance(LatLon a, LatLon b);

/// Symmetric pairwise distance matrix with zero diagonal.
Matrix distance_matrix(std::span<const LatLon> points);

enum class ProximityMode : std::uint8_t { continuous_rank, quantile_threshold };

struct ProximitySpec {
  ProximityMode mode = ProximityMode::continuous_rank;
  double quantile = 50.0;  // percent, used in threshold mode
};

struct ProximityMatrix {
  Matrix distance;   // km, symmetric, zero diagonal
  Matrix proximity;  // in [0,1], zero diagonal
  ProximitySpec spec;
  std::size_t size() const noexcept { return distance.rows(); }
};

/// Continuous mode ranks the off-diagonal upper-triangle distances (average
/// ranks for ties) so the closest pair maps to 1 and the farthest to 0.
/// Threshold mode sets 1 iff distance <= the nearest-rank q-th percentile.
ProximityMatrix build_proximity(const Matrix& distance, ProximitySpec spec = {});

/// Nearest-rank percentile (q in (0,100]) of an unsorted sample.
double nearest_rank_percentile(std::vector<double> sample, double q);

// ---------------------------------------------------------------------------
// Common support and triads

/// Buyer lists per seller, the sparse form used by the support kernels.
std::vector<std::vector<std::uint32_t>> buyer_lists(const Adjacency& y);

/// S~[i][j] = (1/K) sum_{k != i} r[k][i] y[k][j], K = sellers - 1.
Matrix common_support(const Adjacency& y, const Matrix& proximity);
Matrix common_support(const std::vector<std::vector<std::uint32_t>>& buyers_of, std::size_t n_buyers,
                      const Matrix& proximity);
/// One row of S~ for seller i.
std::vector<double> common_support_row(const Adjacency& y, const Matrix& proximity, std::size_t i);

/// S_ij = (1/K) sum_{k not in {i,j}} a[k][i] a[k][j] on a square adjacency,
/// K = N - 2 unless a normalizer is given.
double shared_partner_count(const Adjacency& a, std::size_t i, std::size_t j);
double shared_partner_count(const Adjacency& a, std::size_t i, std::size_t j, double normalizer);

/// Ordered triple sum over i, j != i, k not in {i,j} of a_ij a_ki a_kj on a
/// square symmetric adjacency; each undirected triangle contributes 6.
std::uint64_t triad_count(const Adjacency& a);
inline std::uint64_t triangle_count(const Adjacency& a) { return triad_count(a) / 6; }

/// Expected triangle count of a uniform random graph with N nodes and L links.
double expected_triads_uniform(std::size_t n_nodes, std::size_t n_links);

/// Inverse hyperbolic sine, ln(x + sqrt(1 + x^2)).
double asinh(double x) noexcept;

// ---------------------------------------------------------------------------
// Descriptive statistics

struct YearStats {
  int year = 0;
  std::size_t active_links = 0;
  std::size_t active_buyers = 0;
  std::size_t active_sellers = 0;
  std::size_t new_links = 0;           // zero in the first year
  std::size_t discontinued_links = 0;  // zero in the first year
  std::size_t continued_links = 0;
  double density = 0.0;
  double total_value = 0.0;
  double sales_per_seller = 0.0;  // mean total sales over active sellers
  std::vector<std::size_t> outdegree;  // per seller
  std::vector<std::size_t> indegree;   // per buyer
};

struct BuyerAverages {
  double sellers_per_buyer = 0.0;
  double new_per_buyer = 0.0;
  double discontinued_per_buyer = 0.0;
  double purchases_per_buyer = 0.0;
  double value_per_relationship = 0.0;
  std::size_t buyers_counted = 0;
};

struct DegreeStats {
  std::vector<YearStats> years;
  // Period averages of the per-year region-level values.
  double mean_active_links = 0.0;
  double mean_active_buyers = 0.0;
  double mean_active_sellers = 0.0;
  double mean_new_links = 0.0;           // over years after the first
  double mean_discontinued_links = 0.0;  // over years after the first
  double mean_density = 0.0;
  double mean_total_value = 0.0;
  double mean_sales_per_seller = 0.0;
  BuyerAverages buyer_level;
};

/// Buyer-level averages are taken over the years each buyer is active and then
/// across buyers active at least once; new/discontinued use years after the first.
DegreeStats network_stats(const BipartiteGraph& g);

// ---------------------------------------------------------------------------
// Serialization

/// seller_id,buyer_id,year,value rows for every positive value.
void write_graph_csv(const BipartiteGraph& g, const std::filesystem::path& path);
BipartiteGraph read_graph_csv(const std::filesystem::path& path);
/// Dense binary cache: magic, shape, labels, years and raw values.
void write_graph_cache(const BipartiteGraph& g, const std::filesystem::path& path);
BipartiteGraph read_graph_cache(const std::filesystem::path& path);
/// seller_a,seller_b,km for a < b.
void write_proximity_csv(const Registry& sellers, const Matrix& distance, const std::filesystem::path& path);
Matrix read_proximity_csv(const Registry& sellers, const std::filesystem::path& path);

}  // namespace transnet::netcore
