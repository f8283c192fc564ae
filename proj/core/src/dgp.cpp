#include <algorithm>
#include <cmath>

#include "transnet/genmodels.hpp"

namespace transnet::genmodels {

namespace {

// Stream tags for derive_key.
enum : std::uint64_t {
  kTagSellerSize = 1,
  kTagBuyerSize,
  kTagTowns,
  kTagLocations,
  kTagLinks,
  kTagYearSize,
  kTagFx,
  kTagExposure,
  kTagValues,
};

constexpr double kSizeScale = 1e6;  // synthetic sizes in USD

}  // namespace

void validate(const DgpConfig& c) {
  if (c.n_sellers < 2) throw ConfigError("dgp: at least two sellers required");
  if (c.n_buyers < 1) throw ConfigError("dgp: at least one buyer required");
  if (c.horizon < 1) throw ConfigError("dgp: horizon must be at least 1");
  if (c.lag < 1) throw ConfigError("dgp: lag must be at least 1");
  if (!(c.sizes.sigma >= 0.0) || !std::isfinite(c.sizes.sigma) || !std::isfinite(c.sizes.mu))
    throw ConfigError("dgp: invalid log-normal size distribution");
  if (!(c.sizes.year_sigma >= 0.0)) throw ConfigError("dgp: year_sigma must be non-negative");
  if (!(c.geo.lat_min < c.geo.lat_max) || !(c.geo.lon_min < c.geo.lon_max) || c.geo.towns == 0)
    throw ConfigError("dgp: invalid geography box");
  if (!(c.instrument.exposure_prob >= 0.0 && c.instrument.exposure_prob <= 1.0))
    throw ConfigError("dgp: exposure_prob must lie in [0,1]");
  if (!(c.instrument.share_max > 0.02) ||
      c.instrument.share_max * static_cast<double>(c.instrument.destinations.size()) >= 1.0)
    throw ConfigError("dgp: destination shares must sum below one");
  if (!(c.instrument.fx_sigma >= 0.0)) throw ConfigError("dgp: fx_sigma must be non-negative");
  try {
    switch (c.model) {
      case DgpModel::poisson: validate(c.poisson); break;
      case DgpModel::balls_bins: validate(c.balls); break;
      case DgpModel::logistic: validate(c.logistic); break;
      case DgpModel::lpm:
        if (!std::isfinite(c.lpm.theta) || c.lpm.seller_base < 0.0 || c.lpm.buyer_base < 0.0)
          throw ConfigError("dgp: invalid LPM parameters");
        break;
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("dgp: ") + e.what());
  }
}

SyntheticNodes simulate_nodes(const DgpConfig& c) {
  validate(c);
  SyntheticNodes n;
  CounterEngine ss(derive_key(c.seed, {kTagSellerSize}));
  CounterEngine bs(derive_key(c.seed, {kTagBuyerSize}));
  n.seller_size.resize(c.n_sellers);
  n.buyer_size.resize(c.n_buyers);
  for (double& x : n.seller_size) x = kSizeScale * std::exp(c.sizes.mu + c.sizes.sigma * ss.normal());
  for (double& x : n.buyer_size) x = kSizeScale * std::exp(c.sizes.mu + c.sizes.sigma * bs.normal());

  const GeoSpec& g = c.geo;
  CounterEngine ts(derive_key(c.seed, {kTagTowns}));
  std::vector<netcore::LatLon> towns(g.towns);
  for (auto& t : towns)
    t = {g.lat_min + (g.lat_max - g.lat_min) * ts.uniform(), g.lon_min + (g.lon_max - g.lon_min) * ts.uniform()};
  CounterEngine ls(derive_key(c.seed, {kTagLocations}));
  n.locations.resize(c.n_sellers);
  for (auto& p : n.locations) {
    const auto& town = towns[static_cast<std::size_t>(ls.uniform() * static_cast<double>(g.towns)) % g.towns];
    p.lat = std::clamp(town.lat + g.town_spread_deg * ls.normal(), -90.0, 90.0);
    p.lon = std::clamp(town.lon + g.town_spread_deg * ls.normal(), -180.0, 180.0);
  }
  n.proximity = netcore::build_proximity(netcore::distance_matrix(n.locations), c.proximity);
  return n;
}

LinkModel link_model(const DgpConfig& c) {
  switch (c.model) {
    case DgpModel::poisson: {
      PoissonParams p = c.poisson;
      if (!c.transitivity) p.gamma = 0.0;
      return LinkModel::make(p);
    }
    case DgpModel::balls_bins: {
      BallsBinsParams p = c.balls;
      if (!c.transitivity) p.gamma = 0.0;
      return LinkModel::make(p);
    }
    case DgpModel::logistic: return LinkModel::make(c.logistic);
    case DgpModel::lpm: break;
  }
  throw ConfigError("link_model: the LPM has no dyadic link model");
}

namespace {

LinkCovariates covariates_for(const DgpConfig& c, std::span<const double> seller, std::span<const double> buyer) {
  return c.model == DgpModel::balls_bins ? ballsbins_covariates(seller, buyer) : poisson_covariates(seller, buyer);
}

LinkModel model_with_defaults(const DgpConfig& c, std::span<const double> seller, std::span<const double> buyer) {
  LinkModel m = link_model(c);
  if (m.kind == ModelKind::logistic) {
    if (m.logistic.x_origin.empty()) {
      for (double x : mean_normalized(seller)) m.logistic.x_origin.push_back(std::log(x));
    }
    if (m.logistic.x_dest.empty()) {
      for (double x : mean_normalized(buyer)) m.logistic.x_dest.push_back(std::log(x));
    }
    if (m.logistic.x_origin.size() != seller.size() || m.logistic.x_dest.size() != buyer.size())
      throw ConfigError("dgp: logistic node terms do not match node counts");
  }
  return m;
}

}  // namespace

CrossSection simulate_cross_section(const DgpConfig& c) {
  if (c.model == DgpModel::lpm) throw ConfigError("simulate_cross_section: LPM is a panel-only model");
  CrossSection out;
  out.nodes = simulate_nodes(c);
  out.covariates = covariates_for(c, out.nodes.seller_size, out.nodes.buyer_size);
  const LinkModel m = model_with_defaults(c, out.nodes.seller_size, out.nodes.buyer_size);
  const std::uint64_t key = panel_link_key(c.seed, 0);
  FixedPoint fp = solve_fixed_point(m, out.covariates, out.nodes.proximity.proximity, key);
  out.links = to_adjacency(fp.buyers_of, c.n_buyers);
  out.iterations = fp.iterations;
  out.converged = fp.converged;
  return out;
}

std::uint64_t panel_link_key(std::uint64_t seed, std::size_t t) noexcept {
  return derive_key(seed, {kTagLinks, static_cast<std::uint64_t>(t)});
}

SimulatedPanel simulate_dgp_panel(const DgpConfig& c) {
  const SyntheticNodes nodes = simulate_nodes(c);
  const std::size_t ns = c.n_sellers, nb = c.n_buyers, T = c.horizon;
  const InstrumentDgp& ins = c.instrument;
  const std::size_t nc = ins.destinations.size();

  // Sizes by year.
  Matrix seller_size(T, ns), buyer_size(T, nb);
  for (std::size_t t = 0; t < T; ++t) {
    CounterEngine e(derive_key(c.seed, {kTagYearSize, t}));
    const double s = c.sizes.year_sigma;
    for (std::size_t i = 0; i < ns; ++i) seller_size(t, i) = nodes.seller_size[i] * std::exp(s * e.normal() - 0.5 * s * s);
    for (std::size_t j = 0; j < nb; ++j) buyer_size(t, j) = nodes.buyer_size[j] * std::exp(s * e.normal() - 0.5 * s * s);
  }

  // Exchange rates and static destination shares.
  Matrix fx(T, nc);
  {
    CounterEngine e(derive_key(c.seed, {kTagFx}));
    for (std::size_t k = 0; k < nc; ++k) fx(0, k) = std::exp(e.normal());
    for (std::size_t t = 1; t < T; ++t)
      for (std::size_t k = 0; k < nc; ++k) fx(t, k) = fx(t - 1, k) * std::exp(ins.fx_sigma * e.normal());
  }
  Matrix chi(ns, nc);
  {
    CounterEngine e(derive_key(c.seed, {kTagExposure}));
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k < nc; ++k) {
        const bool exposed = e.uniform() < ins.exposure_prob;
        const double share = 0.02 + (ins.share_max - 0.02) * e.uniform();
        chi(i, k) = exposed ? share : 0.0;
      }
  }
  auto diversion = [&](std::size_t t, std::size_t i) {
    if (t == 0 || ins.diversion == 0.0) return 1.0;
    double shift = 0.0;
    for (std::size_t k = 0; k < nc; ++k) shift += chi(i, k) * (fx(t, k) / fx(t - 1, k) - 1.0);
    return std::clamp(1.0 - ins.diversion * shift, 0.0, 2.0);
  };

  std::vector<Adjacency> links;
  links.reserve(T);
  const Matrix& r = nodes.proximity.proximity;
  for (std::size_t t = 0; t < T; ++t) {
    const std::uint64_t key = panel_link_key(c.seed, t);
    const auto srow = seller_size.row(t);
    const auto brow = buyer_size.row(t);
    Matrix support;
    const bool lagged = c.transitivity && t >= c.lag;
    if (lagged) support = netcore::common_support(links[t - c.lag], r);

    Matrix prob(ns, nb);
    if (c.model == DgpModel::lpm) {
      const auto sm = mean_normalized(srow);
      const auto bm = mean_normalized(brow);
      for (std::size_t i = 0; i < ns; ++i) {
        const double a = c.lpm.seller_base * std::pow(sm[i], c.lpm.seller_elasticity);
        const double m = diversion(t, i);
        for (std::size_t j = 0; j < nb; ++j) {
          const double b = c.lpm.buyer_base * std::pow(bm[j], c.lpm.buyer_elasticity);
          const double s = lagged ? std::asinh(support(i, j)) : 0.0;
          prob(i, j) = std::clamp((a + b) * m + c.lpm.theta * s, 0.0, 1.0);
        }
      }
      links.push_back(sample_from_probabilities(prob, key, false));
      continue;
    }

    const LinkCovariates cov = covariates_for(c, srow, brow);
    const LinkModel m = model_with_defaults(c, srow, brow);
    if (t == 0 && c.initial == InitialState::equilibrium) {
      const FixedPoint fp = solve_fixed_point(m, cov, r, key);
      links.push_back(to_adjacency(fp.buyers_of, nb));
      continue;
    }
    link_probabilities(m, cov, lagged ? &support : nullptr, prob);
    // The diversion multiplier scales the hazard: p -> 1 - (1 - p)^m.
    for (std::size_t i = 0; i < ns; ++i) {
      const double mi = diversion(t, i);
      if (mi == 1.0) continue;
      for (std::size_t j = 0; j < nb; ++j) {
        const double p = prob(i, j);
        prob(i, j) = p >= 1.0 ? (mi > 0.0 ? 1.0 : 0.0) : -std::expm1(mi * std::log1p(-p));
      }
    }
    links.push_back(sample_from_probabilities(prob, key, false));
  }

  // Values, registries and auxiliary data.
  std::vector<Matrix> values;
  values.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Matrix v(ns, nb);
    for (std::size_t i = 0; i < ns; ++i) {
      CounterEngine e(derive_key(c.seed, {kTagValues, t, i}));
      for (std::size_t j = 0; j < nb; ++j) {
        const double draw = e.normal();
        if (links[t](i, j)) v(i, j) = std::round(100.0 + 5000.0 * std::exp(draw));
      }
    }
    values.push_back(std::move(v));
  }
  std::vector<int> years(T);
  for (std::size_t t = 0; t < T; ++t) years[t] = c.first_year + static_cast<int>(t);

  SimulatedPanel out;
  PanelDataset& p = out.panel;
  p.graph = netcore::BipartiteGraph(netcore::Registry::numbered(netcore::Role::seller, ns, "S"),
                                    netcore::Registry::numbered(netcore::Role::buyer, nb, "B"), years,
                                    std::move(values));
  p.sizes = {seller_size, buyer_size};
  p.proximity = nodes.proximity;
  p.seller_locations = nodes.locations;
  p.seller_regions.assign(ns, "synthetic");
  p.destinations = ins.destinations;
  p.fx = fx;
  p.dest_exports.assign(T, Matrix(ns, nc));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k < nc; ++k) p.dest_exports[t](i, k) = chi(i, k) * seller_size(t, i);

  out.truth.model = c.model;
  out.truth.transitivity = c.transitivity;
  out.truth.poisson = c.poisson;
  out.truth.balls = c.balls;
  if (!c.transitivity) out.truth.poisson.gamma = out.truth.balls.gamma = 0.0;
  out.truth.theta = c.model == DgpModel::lpm && c.transitivity ? c.lpm.theta : 0.0;
  return out;
}

}  // namespace transnet::genmodels
