#include "transnet/netcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

namespace transnet::netcore {

// ---------------------------------------------------------------------------
// Registry

Registry::Registry(Role role, std::vector<std::string> labels) : role_(role) {
  for (auto& l : labels) add(l);
}

TraderId Registry::add(const std::string& label) {
  auto [it, inserted] = index_.try_emplace(label, labels_.size());
  if (!inserted) throw InputError("duplicate trader label '" + label + "'");
  labels_.push_back(label);
  return {role_, it->second};
}

TraderId Registry::at(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw InputError("unknown trader label '" + label + "'");
  return {role_, it->second};
}

Registry Registry::numbered(Role role, std::size_t n, const std::string& prefix) {
  Registry r(role);
  for (std::size_t i = 0; i < n; ++i) r.add(prefix + std::to_string(i));
  return r;
}

// ---------------------------------------------------------------------------
// BipartiteGraph

BipartiteGraph::BipartiteGraph(Registry sellers, Registry buyers, std::vector<int> years,
                               std::vector<Matrix> values)
    : sellers_(std::move(sellers)),
      buyers_(std::move(buyers)),
      years_(std::move(years)),
      values_(std::move(values)) {
  if (values_.size() != years_.size()) throw SizeError("BipartiteGraph: one value matrix per year required");
  if (!std::is_sorted(years_.begin(), years_.end()) ||
      std::adjacent_find(years_.begin(), years_.end()) != years_.end())
    throw InputError("BipartiteGraph: years must be strictly increasing");
  links_.reserve(values_.size());
  for (const Matrix& v : values_) {
    if (v.rows() != sellers_.size() || v.cols() != buyers_.size())
      throw SizeError("BipartiteGraph: value matrix shape differs from registries");
    Adjacency a(v.rows(), v.cols());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double x = v.flat()[k];
      if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("BipartiteGraph: values must be finite and non-negative");
      a.flat()[k] = x > 0.0 ? 1 : 0;
    }
    links_.push_back(std::move(a));
  }
}

BipartiteGraph BipartiteGraph::from_links(Registry sellers, Registry buyers, std::vector<int> years,
                                          const std::vector<Adjacency>& links) {
  std::vector<Matrix> values;
  values.reserve(links.size());
  for (const Adjacency& a : links) {
    Matrix v(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) v.flat()[k] = a.flat()[k] ? 1.0 : 0.0;
    values.push_back(std::move(v));
  }
  return BipartiteGraph(std::move(sellers), std::move(buyers), std::move(years), std::move(values));
}

std::size_t BipartiteGraph::year_index(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year);
  if (it == years_.end() || *it != year) throw InputError("year " + std::to_string(year) + " not in panel");
  return static_cast<std::size_t>(it - years_.begin());
}

NodeCovariates NodeCovariates::from_graph(const BipartiteGraph& g) {
  NodeCovariates c{Matrix(g.n_years(), g.n_sellers()), Matrix(g.n_years(), g.n_buyers())};
  for (std::size_t t = 0; t < g.n_years(); ++t) {
    const Matrix& v = g.values(t);
    for (std::size_t i = 0; i < v.rows(); ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) {
        c.seller_size(t, i) += v(i, j);
        c.buyer_size(t, j) += v(i, j);
      }
    }
  }
  return c;
}

namespace {
std::vector<double> column_means(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  for (std::size_t t = 0; t < m.rows(); ++t)
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(t, c);
  for (double& x : out) x /= static_cast<double>(m.rows());
  return out;
}
}  // namespace

std::vector<double> NodeCovariates::seller_mean() const { return column_means(seller_size); }
std::vector<double> NodeCovariates::buyer_mean() const { return column_means(buyer_size); }

// ---------------------------------------------------------------------------
// Geography

double haversine_distance(LatLon a, LatLon b) {
  auto check = [](LatLon p) {
    if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
      throw DomainError("haversine_distance: coordinates out of range");
  };
  check(a);
  check(b);
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

Matrix distance_matrix(std::span<const LatLon> points) {
  const std::size_t n = points.size();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) d(i, k) = d(k, i) = haversine_distance(points[i], points[k]);
  return d;
}

double nearest_rank_percentile(std::vector<double> sample, double q) {
  if (sample.empty()) throw SizeError("nearest_rank_percentile: empty sample");
  if (!(q > 0.0 && q <= 100.0)) throw DomainError("nearest_rank_percentile: q must lie in (0,100]");
  std::sort(sample.begin(), sample.end());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sample.size())));
  rank = std::clamp<std::size_t>(rank, 1, sample.size());
  return sample[rank - 1];
}

ProximityMatrix build_proximity(const Matrix& distance, ProximitySpec spec) {
  const std::size_t n = distance.rows();
  if (distance.cols() != n) throw SizeError("build_proximity: distance matrix must be square");
  if (n < 2) throw SizeError("build_proximity: at least two sellers required");
  for (std::size_t i = 0; i < n; ++i) {
    if (distance(i, i) != 0.0) throw InputError("build_proximity: distance diagonal must be zero");
    for (std::size_t k = 0; k < n; ++k) {
      const double d = distance(i, k);
      if (!(d >= 0.0) || !std::isfinite(d) || d != distance(k, i))
        throw InputError("build_proximity: distances must be finite, non-negative and symmetric");
    }
  }

  ProximityMatrix out{distance, Matrix(n, n), spec};
  const std::size_t m = n * (n - 1) / 2;

  if (spec.mode == ProximityMode::continuous_rank) {
    std::vector<std::pair<double, std::size_t>> upper;
    upper.reserve(m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i + 1; k < n; ++k) upper.emplace_back(distance(i, k), i * n + k);
    std::sort(upper.begin(), upper.end());
    // average ranks over runs of equal distances
    std::size_t a = 0;
    while (a < m) {
      std::size_t b = a;
      while (b + 1 < m && upper[b + 1].first == upper[a].first) ++b;
      const double avg_rank = 0.5 * static_cast<double>(a + b) + 1.0;
      const double r = m == 1 ? 1.0 : 1.0 - (avg_rank - 1.0) / static_cast<double>(m - 1);
      for (std::size_t p = a; p <= b; ++p) {
        const std::size_t i = upper[p].second / n, k = upper[p].second % n;
        out.proximity(i, k) = out.proximity(k, i) = r;
      }
      a = b + 1;
    }
  } else {
    if (!(spec.quantile > 0.0 && spec.quantile < 100.0))
      throw DomainError("build_proximity: quantile must lie in (0,100)");
    std::vector<double> upper;
    upper.reserve(m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i + 1; k < n; ++k) upper.push_back(distance(i, k));
    const double threshold = nearest_rank_percentile(std::move(upper), spec.quantile);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (i != k) out.proximity(i, k) = distance(i, k) <= threshold ? 1.0 : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Common support

std::vector<std::vector<std::uint32_t>> buyer_lists(const Adjacency& y) {
  std::vector<std::vector<std::uint32_t>> out(y.rows());
  for (std::size_t k = 0; k < y.rows(); ++k) {
    auto row = y.row(k);
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j]) out[k].push_back(static_cast<std::uint32_t>(j));
  }
  return out;
}

Matrix common_support(const std::vector<std::vector<std::uint32_t>>& buyers_of, std::size_t n_buyers,
                      const Matrix& proximity) {
  const std::size_t n = buyers_of.size();
  if (proximity.rows() != n || proximity.cols() != n)
    throw SizeError("common_support: proximity and adjacency disagree on the seller count");
  if (n < 2) throw SizeError("common_support: at least two sellers required");
  const double inv_k = 1.0 / static_cast<double>(n - 1);
  Matrix s(n, n_buyers);
  for (std::size_t i = 0; i < n; ++i) {
    double* out = s.row(i).data();
    auto r = proximity.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double w = r[k];
      if (w == 0.0) continue;
      for (std::uint32_t j : buyers_of[k]) out[j] += w;
    }
    for (std::size_t j = 0; j < n_buyers; ++j) out[j] *= inv_k;
  }
  return s;
}

Matrix common_support(const Adjacency& y, const Matrix& proximity) {
  return common_support(buyer_lists(y), y.cols(), proximity);
}

std::vector<double> common_support_row(const Adjacency& y, const Matrix& proximity, std::size_t i) {
  const std::size_t n = y.rows();
  if (proximity.rows() != n || proximity.cols() != n)
    throw SizeError("common_support_row: proximity and adjacency disagree on the seller count");
  if (n < 2) throw SizeError("common_support_row: at least two sellers required");
  if (i >= n) throw SizeError("common_support_row: seller index out of range");
  std::vector<double> out(y.cols(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i) continue;
    const double w = proximity(k, i);
    auto row = y.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += w * row[j];
  }
  for (double& v : out) v /= static_cast<double>(n - 1);
  return out;
}

double shared_partner_count(const Adjacency& a, std::size_t i, std::size_t j, double normalizer) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw SizeError("shared_partner_count: adjacency must be square");
  if (i >= n || j >= n) throw SizeError("shared_partner_count: node index out of range");
  if (!(normalizer > 0.0)) throw SizeError("shared_partner_count: normalizer must be positive");
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (k != i && k != j && a(k, i) && a(k, j)) ++count;
  return static_cast<double>(count) / normalizer;
}

double shared_partner_count(const Adjacency& a, std::size_t i, std::size_t j) {
  if (a.rows() < 3) throw SizeError("shared_partner_count: K = 0 for fewer than three nodes");
  return shared_partner_count(a, i, j, static_cast<double>(a.rows() - 2));
}

std::uint64_t triad_count(const Adjacency& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw SizeError("triad_count: adjacency must be square");
  // Bitset rows: the inner sum over k is popcount(row_i & row_j).
  const std::size_t words = (n + 63) / 64;
  std::vector<std::uint64_t> bits(n * words, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (k != i && a(k, i)) bits[i * words + k / 64] |= std::uint64_t{1} << (k % 64);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !a(i, j)) continue;
      std::uint64_t c = 0;
      for (std::size_t w = 0; w < words; ++w)
        c += static_cast<std::uint64_t>(std::popcount(bits[i * words + w] & bits[j * words + w]));
      total += c;
    }
  }
  return total;
}

double expected_triads_uniform(std::size_t n_nodes, std::size_t n_links) {
  if (n_nodes < 3) throw DomainError("expected_triads_uniform: N must be at least 3");
  const double n = static_cast<double>(n_nodes);
  const double l = static_cast<double>(n_links);
  if (l > n * (n - 1.0) / 2.0) throw DomainError("expected_triads_uniform: L exceeds N(N-1)/2");
  return 4.0 * l * l * l * (n - 2.0) / (3.0 * n * n * (n - 1.0) * (n - 1.0));
}

double asinh(double x) noexcept { return std::asinh(x); }

// ---------------------------------------------------------------------------
// Descriptive statistics

DegreeStats network_stats(const BipartiteGraph& g) {
  DegreeStats out;
  const std::size_t ns = g.n_sellers(), nb = g.n_buyers(), nt = g.n_years();
  if (nt == 0) throw InputError("network_stats: at least one year required");

  struct BuyerAcc {
    double sellers = 0, purchases = 0, per_rel = 0, fresh = 0, dropped = 0;
    std::size_t active_years = 0, transition_years = 0;
  };
  std::vector<BuyerAcc> acc(nb);

  for (std::size_t t = 0; t < nt; ++t) {
    const Adjacency& y = g.links(t);
    const Matrix& v = g.values(t);
    YearStats ys;
    ys.year = g.years()[t];
    ys.outdegree.assign(ns, 0);
    ys.indegree.assign(nb, 0);
    std::vector<double> sales(ns, 0.0), purchases(nb, 0.0);
    std::vector<std::size_t> fresh(nb, 0), dropped(nb, 0);
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        const bool now = y(i, j) != 0;
        if (now) {
          ++ys.active_links;
          ++ys.outdegree[i];
          ++ys.indegree[j];
          sales[i] += v(i, j);
          purchases[j] += v(i, j);
          ys.total_value += v(i, j);
        }
        if (t > 0) {
          const bool before = g.links(t - 1)(i, j) != 0;
          if (now && !before) ++ys.new_links, ++fresh[j];
          if (!now && before) ++ys.discontinued_links, ++dropped[j];
          if (now && before) ++ys.continued_links;
        }
      }
    }
    double seller_sales = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
      if (ys.outdegree[i] > 0) ++ys.active_sellers, seller_sales += sales[i];
    for (std::size_t j = 0; j < nb; ++j) {
      if (ys.indegree[j] == 0) continue;
      ++ys.active_buyers;
      BuyerAcc& b = acc[j];
      ++b.active_years;
      b.sellers += static_cast<double>(ys.indegree[j]);
      b.purchases += purchases[j];
      b.per_rel += purchases[j] / static_cast<double>(ys.indegree[j]);
      if (t > 0) {
        ++b.transition_years;
        b.fresh += static_cast<double>(fresh[j]);
        b.dropped += static_cast<double>(dropped[j]);
      }
    }
    ys.density = ns * nb == 0 ? 0.0 : static_cast<double>(ys.active_links) / static_cast<double>(ns * nb);
    ys.sales_per_seller = ys.active_sellers == 0 ? 0.0 : seller_sales / static_cast<double>(ys.active_sellers);
    out.years.push_back(std::move(ys));
  }

  const double T = static_cast<double>(nt);
  for (const YearStats& ys : out.years) {
    out.mean_active_links += static_cast<double>(ys.active_links) / T;
    out.mean_active_buyers += static_cast<double>(ys.active_buyers) / T;
    out.mean_active_sellers += static_cast<double>(ys.active_sellers) / T;
    out.mean_density += ys.density / T;
    out.mean_total_value += ys.total_value / T;
    out.mean_sales_per_seller += ys.sales_per_seller / T;
  }
  if (nt > 1) {
    for (std::size_t t = 1; t < nt; ++t) {
      out.mean_new_links += static_cast<double>(out.years[t].new_links) / (T - 1.0);
      out.mean_discontinued_links += static_cast<double>(out.years[t].discontinued_links) / (T - 1.0);
    }
  }

  BuyerAverages& ba = out.buyer_level;
  std::size_t with_transitions = 0;
  for (const BuyerAcc& b : acc) {
    if (b.active_years == 0) continue;
    const double a = static_cast<double>(b.active_years);
    ++ba.buyers_counted;
    ba.sellers_per_buyer += b.sellers / a;
    ba.purchases_per_buyer += b.purchases / a;
    ba.value_per_relationship += b.per_rel / a;
    if (b.transition_years > 0) {
      ++with_transitions;
      ba.new_per_buyer += b.fresh / static_cast<double>(b.transition_years);
      ba.discontinued_per_buyer += b.dropped / static_cast<double>(b.transition_years);
    }
  }
  if (ba.buyers_counted > 0) {
    const double n = static_cast<double>(ba.buyers_counted);
    ba.sellers_per_buyer /= n;
    ba.purchases_per_buyer /= n;
    ba.value_per_relationship /= n;
  }
  if (with_transitions > 0) {
    ba.new_per_buyer /= static_cast<double>(with_transitions);
    ba.discontinued_per_buyer /= static_cast<double>(with_transitions);
  }
  return out;
}

}  // namespace transnet::netcore
