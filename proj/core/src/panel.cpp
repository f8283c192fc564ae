#include "transnet/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "transnet/netcore.hpp"
#include "transnet/parallel.hpp"
#include "transnet/rng.hpp"
#include "transnet/transtest.hpp"

namespace transnet::panel {

Matrix build_regressor(const PanelDataset& panel, const Matrix& proximity, std::size_t t, std::size_t lag) {
  const std::size_t T = panel.n_years();
  if (lag == 0) throw DomainError("build_regressor: lag must be at least 1");
  if (lag >= T) throw DomainError("build_regressor: lag must be shorter than the panel horizon");
  if (t < lag || t >= T) throw DomainError("build_regressor: outcome year outside the usable range");
  Matrix s = netcore::common_support(panel.graph.links(t - lag), proximity);
  for (double& v : s.flat()) v = std::asinh(v);
  return s;
}

double z_index(double chi_k_prev, double chi_i_prev, double chi_i_cur, double cex_cur, double cex_prev) {
  if (!(cex_cur > 0.0) || !(cex_prev > 0.0)) throw DomainError("z_index: exchange rates must be positive");
  for (double s : {chi_k_prev, chi_i_prev, chi_i_cur})
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("z_index: shares must lie in [0,1]");
  if (chi_i_prev != 0.0 || chi_i_cur != 0.0) return 1.0;
  // (1 - chi) + chi * ratio, arranged so an unchanged rate gives exactly 1
  return 1.0 + chi_k_prev * (cex_cur / cex_prev - 1.0);
}

std::vector<double> mean_proximity(const Matrix& proximity) {
  const std::size_t n = proximity.rows();
  if (n < 2) throw SizeError("mean_proximity: at least two sellers required");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) s += proximity(i, k);
    out[i] = s / static_cast<double>(n - 1);
  }
  return out;
}

namespace {

std::size_t country_index(const PanelDataset& panel, const std::string& country) {
  const auto it = std::find(panel.destinations.begin(), panel.destinations.end(), country);
  if (it == panel.destinations.end()) throw ConfigError("instrument country not in the destination list: " + country);
  return static_cast<std::size_t>(it - panel.destinations.begin());
}

}  // namespace

Matrix build_instrument(const PanelDataset& panel, const Matrix& proximity, const InstrumentSpec& spec,
                        std::size_t t) {
  const std::size_t T = panel.n_years(), ns = panel.n_sellers(), nb = panel.n_buyers();
  if (spec.lag == 0) throw DomainError("build_instrument: lag must be at least 1");
  if (t >= T || t < spec.lag + 1) throw DomainError("build_instrument: outcome year outside the usable range");
  if (ns < 2) throw SizeError("build_instrument: at least two sellers required");
  const std::size_t c = country_index(panel, spec.country);
  const std::size_t tz = t - spec.lag;
  const Matrix chi_prev = panel.dest_share(tz - 1);
  const Matrix chi_cur = panel.dest_share(tz);
  const double cex_cur = panel.fx(tz, c), cex_prev = panel.fx(tz - 1, c);

  const std::vector<double> rbar = mean_proximity(proximity);
  const std::vector<double> xbar = panel.sizes.buyer_mean();
  std::vector<double> zbar(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < ns; ++k)
      if (k != i) s += z_index(chi_prev(k, c), chi_prev(i, c), chi_cur(i, c), cex_cur, cex_prev);
    zbar[i] = s / static_cast<double>(ns - 1);
  }
  Matrix z(ns, nb);
  for (std::size_t i = 0; i < ns; ++i) {
    const double a = std::asinh(rbar[i]) * std::asinh(zbar[i]);
    for (std::size_t j = 0; j < nb; ++j) z(i, j) = a * std::asinh(xbar[j]);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Two-way fixed effects

TwoWayFit fit_two_way(std::span<const double> values, const EffectGroups& g, std::span<const std::uint8_t> mask,
                      const WithinOptions& opts) {
  const std::size_t n = values.size();
  if (g.first.size() != n || g.second.size() != n) throw SizeError("fit_two_way: group ids do not match values");
  if (!mask.empty() && mask.size() != n) throw SizeError("fit_two_way: mask does not match values");
  auto used = [&](std::size_t r) { return mask.empty() || mask[r] != 0; };

  TwoWayFit fit;
  fit.first.assign(g.n_first, 0.0);
  fit.second.assign(g.n_second, 0.0);
  std::vector<double> n1(g.n_first, 0.0), n2(g.n_second, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (!used(r)) continue;
    if (!std::isfinite(values[r])) throw NumericError("fit_two_way: non-finite value");
    n1[g.first[r]] += 1.0;
    n2[g.second[r]] += 1.0;
  }
  fit.first_seen.resize(g.n_first);
  fit.second_seen.resize(g.n_second);
  for (std::size_t k = 0; k < g.n_first; ++k) fit.first_seen[k] = n1[k] > 0.0;
  for (std::size_t k = 0; k < g.n_second; ++k) fit.second_seen[k] = n2[k] > 0.0;

  std::vector<double> acc1(g.n_first), acc2(g.n_second);
  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    std::fill(acc1.begin(), acc1.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      if (used(r)) acc1[g.first[r]] += values[r] - fit.second[g.second[r]];
    double change = 0.0;
    for (std::size_t k = 0; k < g.n_first; ++k) {
      if (n1[k] == 0.0) continue;
      const double v = acc1[k] / n1[k];
      change = std::max(change, std::abs(v - fit.first[k]));
      fit.first[k] = v;
    }
    std::fill(acc2.begin(), acc2.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      if (used(r)) acc2[g.second[r]] += values[r] - fit.first[g.first[r]];
    double change2 = 0.0;
    for (std::size_t k = 0; k < g.n_second; ++k) {
      if (n2[k] == 0.0) continue;
      const double v = acc2[k] / n2[k];
      change2 = std::max(change2, std::abs(v - fit.second[k]));
      fit.second[k] = v;
    }
    fit.sweeps = sweep;
    // A fitted cell moves by at most the sum of both effect changes.
    if (change + change2 < opts.tol) return fit;
  }
  throw ConvergenceError("fit_two_way: alternating projections did not converge");
}

std::vector<double> residualize(std::span<const double> values, const EffectGroups& g, const TwoWayFit& fit) {
  std::vector<double> out(values.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    const std::uint32_t a = g.first[r], b = g.second[r];
    out[r] = values[r] - (fit.first_seen[a] ? fit.first[a] : 0.0) - (fit.second_seen[b] ? fit.second[b] : 0.0);
  }
  return out;
}

std::vector<double> within_transform(std::span<const double> values, const EffectGroups& groups,
                                     const WithinOptions& opts) {
  return residualize(values, groups, fit_two_way(values, groups, {}, opts));
}

// ---------------------------------------------------------------------------
// Clustered inference

ClusteredSe clustered_se(double coef, std::span<const double> residuals, std::span<const double> weights,
                         double denominator, std::span<const std::uint32_t> cluster) {
  const std::size_t n = residuals.size();
  if (weights.size() != n || cluster.size() != n) throw SizeError("clustered_se: input lengths differ");
  if (!(std::abs(denominator) > 0.0)) throw DomainError("clustered_se: zero denominator");
  std::uint32_t max_id = 0;
  for (auto c : cluster) max_id = std::max(max_id, c);
  std::vector<double> score(n == 0 ? 0 : max_id + 1, 0.0);
  std::vector<std::uint8_t> seen(score.size(), 0);
  for (std::size_t r = 0; r < n; ++r) {
    score[cluster[r]] += weights[r] * residuals[r];
    seen[cluster[r]] = 1;
  }
  ClusteredSe out;
  out.clusters = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
  if (out.clusters < 2) throw DomainError("clustered_se: at least two clusters required");
  double meat = 0.0;
  for (double s : score) meat += s * s;
  out.se = std::sqrt(meat) / std::abs(denominator);
  out.f_statistic = out.se > 0.0 ? (coef / out.se) * (coef / out.se) : std::numeric_limits<double>::infinity();
  return out;
}

ClusteredCoef clustered_ols(std::span<const double> y, std::span<const double> x,
                            std::span<const std::uint32_t> cluster) {
  if (y.size() != x.size()) throw SizeError("clustered_ols: input lengths differ");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    sxx += x[r] * x[r];
    sxy += x[r] * y[r];
  }
  if (!(sxx > 0.0)) throw DomainError("clustered_ols: regressor has no variation");
  ClusteredCoef out;
  out.coef = sxy / sxx;
  std::vector<double> e(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) e[r] = y[r] - out.coef * x[r];
  const ClusteredSe s = clustered_se(out.coef, e, x, sxx, cluster);
  out.se = s.se;
  out.clusters = s.clusters;
  return out;
}

ClusteredCoef clustered_iv(std::span<const double> y, std::span<const double> x, std::span<const double> z,
                           std::span<const std::uint32_t> cluster) {
  if (y.size() != x.size() || z.size() != x.size()) throw SizeError("clustered_iv: input lengths differ");
  double szx = 0.0, szy = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    szx += z[r] * x[r];
    szy += z[r] * y[r];
  }
  if (!(std::abs(szx) > 0.0)) throw DomainError("clustered_iv: instrument uncorrelated with the regressor");
  ClusteredCoef out;
  out.coef = szy / szx;
  std::vector<double> e(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) e[r] = y[r] - out.coef * x[r];
  const ClusteredSe s = clustered_se(out.coef, e, z, szx, cluster);
  out.se = s.se;
  out.clusters = s.clusters;
  return out;
}

std::vector<std::uint32_t> dyad_clusters(const PanelDataset& panel, ClusterScheme scheme,
                                         std::size_t& n_clusters, std::size_t bins_per_axis) {
  const std::size_t ns = panel.n_sellers(), nb = panel.n_buyers();
  std::vector<double> seller_key;
  if (scheme == ClusterScheme::seller_buyer_size) {
    seller_key = panel.sizes.seller_mean();
  } else {
    const Matrix& d = panel.proximity.distance;
    if (d.rows() != ns) throw SizeError("dyad_clusters: distance matrix does not match sellers");
    seller_key.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < ns; ++k)
        if (k != i) s += d(i, k);
      seller_key[i] = ns > 1 ? s / static_cast<double>(ns - 1) : 0.0;
    }
  }
  const std::vector<double> buyer_key = panel.sizes.buyer_mean();
  std::size_t qs = 0, qb = 0;
  const auto sb = transtest::quantile_bins(seller_key, bins_per_axis, qs);
  const auto bb = transtest::quantile_bins(buyer_key, bins_per_axis, qb);
  std::vector<std::int64_t> label(qs * qb, -1);
  std::vector<std::uint32_t> out(ns * nb);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) label[sb[i] * qb + bb[j]] = 0;
  std::uint32_t next = 0;
  for (auto& l : label)
    if (l == 0) l = next++;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] = static_cast<std::uint32_t>(label[sb[i] * qb + bb[j]]);
  n_clusters = next;
  return out;
}

// ---------------------------------------------------------------------------
// Estimation sample

EstimationSample build_sample(const PanelDataset& panel, const Matrix& proximity, const SampleSpec& spec) {
  panel.validate();
  const std::size_t T = panel.n_years(), ns = panel.n_sellers(), nb = panel.n_buyers();
  const std::size_t lag = spec.lag;
  if (lag == 0) throw DomainError("build_sample: lag must be at least 1");
  const std::size_t earliest = spec.with_instrument ? lag + 1 : lag;
  const std::size_t first = std::max(spec.first_year, earliest);
  if (first >= T) throw DomainError("build_sample: panel too short for the requested lag");
  InstrumentSpec ins = spec.instrument;
  ins.lag = lag;

  EstimationSample s;
  s.n_sellers = ns;
  s.n_buyers = nb;
  for (std::size_t t = first; t < T; ++t) s.years.push_back(t);
  const std::size_t rows = s.years.size() * ns * nb;
  s.y.resize(rows);
  s.regressor.resize(rows);
  if (spec.with_instrument) s.instrument.resize(rows);
  s.groups.first.resize(rows);
  s.groups.second.resize(rows);
  s.groups.n_first = s.years.size() * ns;
  s.groups.n_second = nb;
  s.dyad.resize(rows);
  s.cluster.resize(rows);
  const auto dyad_cluster = dyad_clusters(panel, spec.clusters, s.n_clusters);

  for (std::size_t p = 0; p < s.years.size(); ++p) {
    const std::size_t t = s.years[p];
    const Matrix x = build_regressor(panel, proximity, t, lag);
    Matrix z;
    if (spec.with_instrument) z = build_instrument(panel, proximity, ins, t);
    const Adjacency& y = panel.graph.links(t);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t r = (p * ns + i) * nb + j;
        s.y[r] = y(i, j);
        s.regressor[r] = x(i, j);
        if (spec.with_instrument) s.instrument[r] = z(i, j);
        s.groups.first[r] = static_cast<std::uint32_t>(p * ns + i);
        s.groups.second[r] = static_cast<std::uint32_t>(j);
        s.dyad[r] = static_cast<std::uint32_t>(i * nb + j);
        s.cluster[r] = dyad_cluster[i * nb + j];
      }
  }
  return s;
}

std::vector<std::uint32_t> dyad_folds(std::size_t n_dyads, std::size_t folds, std::uint64_t seed, std::size_t rep) {
  if (folds < 2) throw ConfigError("dyad_folds: at least two folds required");
  if (n_dyads < folds) throw SizeError("dyad_folds: fewer dyads than folds");
  const std::uint64_t key = derive_key(seed, {static_cast<std::uint64_t>(rep)});
  std::vector<std::uint32_t> order(n_dyads);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<std::uint64_t> sort_key(n_dyads);
  for (std::size_t d = 0; d < n_dyads; ++d) sort_key[d] = counter_bits(key, d);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return sort_key[a] != sort_key[b] ? sort_key[a] < sort_key[b] : a < b;
  });
  std::vector<std::uint32_t> fold(n_dyads);
  for (std::size_t pos = 0; pos < n_dyads; ++pos) fold[order[pos]] = static_cast<std::uint32_t>(pos % folds);
  return fold;
}

EstimateReport ddml_iv_estimate(const EstimationSample& s, const DdmlConfig& cfg) {
  const std::size_t n = s.size();
  if (cfg.repetitions == 0) throw ConfigError("ddml: at least one repetition required");
  if (s.n_dyads() < cfg.folds) throw SizeError("ddml: fewer dyads than folds");
  if (s.regressor.size() != n || s.groups.first.size() != n || s.cluster.size() != n)
    throw SizeError("ddml: sample columns have different lengths");
  const bool iv = cfg.use_instrument;
  if (iv && s.instrument.size() != n) throw ConfigError("ddml: sample has no instrument");

  EstimateReport rep;
  rep.instrumented = iv;
  rep.n_obs = n;
  rep.n_clusters = s.n_clusters;
  rep.y_perp.assign(n, 0.0);
  rep.x_perp.assign(n, 0.0);
  rep.x_iv_perp.assign(n, 0.0);

  std::vector<double> yp(n), xp(n), zp(iv ? n : 0);
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto fold = dyad_folds(s.n_dyads(), cfg.folds, cfg.seed, r);
    parallel_for(cfg.folds, cfg.workers, [&](std::size_t f) {
      std::vector<std::uint8_t> train(n);
      for (std::size_t k = 0; k < n; ++k) train[k] = fold[s.dyad[k]] != f;
      auto held_out = [&](std::span<const double> v, std::vector<double>& out) {
        const TwoWayFit fit = fit_two_way(v, s.groups, train, cfg.within);
        for (std::size_t k = 0; k < n; ++k) {
          if (train[k]) continue;
          const std::uint32_t a = s.groups.first[k], b = s.groups.second[k];
          out[k] = v[k] - (fit.first_seen[a] ? fit.first[a] : 0.0) - (fit.second_seen[b] ? fit.second[b] : 0.0);
        }
      };
      held_out(s.y, yp);
      held_out(s.regressor, xp);
      if (iv) held_out(s.instrument, zp);
    });

    RepetitionResult rr;
    if (iv) {
      double szz = 0.0, szx = 0.0, s_zz_raw = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        szz += zp[k] * zp[k];
        szx += zp[k] * xp[k];
        s_zz_raw += s.instrument[k] * s.instrument[k];
      }
      if (!(szz > 1e-20 * std::max(1.0, s_zz_raw)) || szx == 0.0) {
        rep.identified = false;
        rep.weak_instrument = true;
        rep.theta_hat = rep.se_theta = std::numeric_limits<double>::quiet_NaN();
        rep.first_stage_coef = rep.first_stage_se = std::numeric_limits<double>::quiet_NaN();
        rep.f_statistic = 0.0;
        rep.repetitions.clear();
        return rep;
      }
      const ClusteredCoef fs = clustered_ols(xp, zp, s.cluster);
      const ClusteredCoef est = clustered_iv(yp, xp, zp, s.cluster);
      rr.theta = est.coef;
      rr.se = est.se;
      rr.first_stage_coef = fs.coef;
      rr.first_stage_se = fs.se;
      rr.f_statistic = fs.se > 0.0 ? (fs.coef / fs.se) * (fs.coef / fs.se) : 0.0;
      for (std::size_t k = 0; k < n; ++k) rep.x_iv_perp[k] += fs.coef * zp[k];
    } else {
      const ClusteredCoef est = clustered_ols(yp, xp, s.cluster);
      rr.theta = est.coef;
      rr.se = est.se;
      for (std::size_t k = 0; k < n; ++k) rep.x_iv_perp[k] += xp[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      rep.y_perp[k] += yp[k];
      rep.x_perp[k] += xp[k];
    }
    rep.repetitions.push_back(rr);
  }

  const double R = static_cast<double>(cfg.repetitions);
  for (std::size_t k = 0; k < n; ++k) {
    rep.y_perp[k] /= R;
    rep.x_perp[k] /= R;
    rep.x_iv_perp[k] /= R;
  }
  for (const auto& rr : rep.repetitions) {
    rep.theta_hat += rr.theta / R;
    rep.se_theta += rr.se / R;
    rep.first_stage_coef += rr.first_stage_coef / R;
    rep.first_stage_se += rr.first_stage_se / R;
    rep.f_statistic += rr.f_statistic / R;
  }
  rep.weak_instrument = iv && rep.f_statistic < cfg.weak_f;
  return rep;
}

// ---------------------------------------------------------------------------
// Contribution profiles

std::vector<ProfileRow> contribution_profile(double theta, const EstimationSample& s, const PanelDataset& panel,
                                             ProfileSide side, ProfileGrouping grouping, std::size_t groups) {
  if (groups == 0) throw DomainError("contribution_profile: at least one group required");
  const std::size_t ns = s.n_sellers, nb = s.n_buyers;
  const bool sellers = side == ProfileSide::sellers;
  const std::size_t nf = sellers ? ns : nb;
  // Per firm: sum over years of the within-year link means.
  std::vector<double> support_sum(nf, 0.0), asinh_sum(nf, 0.0);
  std::vector<std::size_t> years_with_links(nf, 0);
  std::vector<double> ys(nf), ya(nf);
  std::vector<std::size_t> yl(nf);
  for (std::size_t p = 0; p < s.years.size(); ++p) {
    std::fill(ys.begin(), ys.end(), 0.0);
    std::fill(ya.begin(), ya.end(), 0.0);
    std::fill(yl.begin(), yl.end(), 0);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t r = (p * ns + i) * nb + j;
        if (s.y[r] == 0.0) continue;
        const std::size_t f = sellers ? i : j;
        ys[f] += std::sinh(s.regressor[r]);
        ya[f] += s.regressor[r];
        ++yl[f];
      }
    for (std::size_t f = 0; f < nf; ++f) {
      if (yl[f] == 0) continue;
      support_sum[f] += ys[f] / static_cast<double>(yl[f]);
      asinh_sum[f] += ya[f] / static_cast<double>(yl[f]);
      ++years_with_links[f];
    }
  }
  const std::vector<double> size = sellers ? panel.sizes.seller_mean() : panel.sizes.buyer_mean();
  struct Firm {
    double key;
    double contribution;
    std::size_t index;
  };
  std::vector<Firm> firms;
  for (std::size_t f = 0; f < nf; ++f) {
    if (years_with_links[f] == 0) continue;
    const double yrs = static_cast<double>(years_with_links[f]);
    const double key = grouping == ProfileGrouping::support ? support_sum[f] / yrs : size.at(f);
    firms.push_back({key, theta * asinh_sum[f] / yrs, f});
  }
  std::sort(firms.begin(), firms.end(),
            [](const Firm& a, const Firm& b) { return a.key != b.key ? a.key < b.key : a.index < b.index; });
  std::vector<ProfileRow> rows(groups);
  const std::size_t n = firms.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t g = pos * groups / n;
    rows[g].firms += 1;
    rows[g].mean_key += firms[pos].key;
    rows[g].mean_contribution += firms[pos].contribution;
  }
  std::vector<ProfileRow> out;
  for (std::size_t g = 0; g < groups; ++g) {
    if (rows[g].firms == 0) continue;
    ProfileRow r = rows[g];
    r.group = g + 1;
    r.mean_key /= static_cast<double>(r.firms);
    r.mean_contribution /= static_cast<double>(r.firms);
    out.push_back(r);
  }
  return out;
}

}  // namespace transnet::panel
