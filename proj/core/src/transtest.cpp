#include "transnet/transtest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "transnet/parallel.hpp"
#include "transnet/rng.hpp"

namespace transnet::transtest {

// ---------------------------------------------------------------------------
// Bins

std::vector<std::uint32_t> quantile_bins(std::span<const double> values, std::size_t q, std::size_t& n_bins,
                                         std::vector<double>* edges) {
  if (values.empty()) throw SizeError("quantile_bins: no values");
  if (q == 0) throw DomainError("quantile_bins: at least one bin required");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> cut;  // upper edges of bins 0..q-2
  for (std::size_t k = 1; k < q; ++k) {
    auto rank = static_cast<std::size_t>(std::ceil(static_cast<double>(k) / static_cast<double>(q) * static_cast<double>(n)));
    cut.push_back(sorted[std::clamp<std::size_t>(rank, 1, n) - 1]);
  }
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    raw[i] = static_cast<std::uint32_t>(std::lower_bound(cut.begin(), cut.end(), values[i]) - cut.begin());
  // Relabel occupied bins consecutively; an empty bin is absorbed by the next.
  std::vector<std::uint32_t> used(q, 0);
  for (auto b : raw) used[b] = 1;
  std::vector<std::uint32_t> label(q, 0);
  std::uint32_t next = 0;
  for (std::size_t b = 0; b < q; ++b) {
    label[b] = next;
    if (used[b]) {
      if (edges) edges->push_back(b + 1 < q ? cut[b] : sorted.back());
      ++next;
    }
  }
  n_bins = next;
  for (auto& b : raw) b = label[b];
  return raw;
}

BinScheme make_bins(std::span<const double> seller_size, std::span<const double> buyer_size, std::size_t q) {
  BinScheme b;
  b.seller_bin = quantile_bins(seller_size, q, b.n_seller_bins, &b.seller_edges);
  b.buyer_bin = quantile_bins(buyer_size, q, b.n_buyer_bins, &b.buyer_edges);
  return b;
}

void add_pair_bins(BinScheme& bins, const Matrix& h, std::size_t q) {
  if (h.rows() != bins.seller_bin.size() || h.cols() != bins.buyer_bin.size())
    throw SizeError("add_pair_bins: pair covariate shape differs from the node bins");
  auto labels = quantile_bins(h.flat(), q, bins.n_pair_bins);
  bins.pair_bin = Grid<std::uint32_t>(h.rows(), h.cols(), std::move(labels));
}

// ---------------------------------------------------------------------------
// Saturated fit

namespace {

void check_shape(const Matrix& y, const BinScheme& bins) {
  if (y.rows() != bins.seller_bin.size() || y.cols() != bins.buyer_bin.size())
    throw SizeError("fit_saturated_lpm: outcome shape differs from the bin scheme");
  if (bins.has_pair_bins() && !bins.pair_bin.same_shape(y))
    throw SizeError("fit_saturated_lpm: pair bins have the wrong shape");
  for (double v : y.flat())
    if (!std::isfinite(v)) throw NumericError("fit_saturated_lpm: non-finite outcome");
}

std::vector<double> bin_counts(const std::vector<std::uint32_t>& bin, std::size_t n_bins) {
  std::vector<double> c(n_bins, 0.0);
  for (auto b : bin) {
    if (b >= n_bins) throw SizeError("bin label out of range");
    c[b] += 1.0;
  }
  return c;
}

SaturatedFit block_fit(const Matrix& y, const BinScheme& bins) {
  const std::size_t ns = y.rows(), nb = y.cols(), qs = bins.n_seller_bins, qb = bins.n_buyer_bins;
  const auto& sb = bins.seller_bin;
  const auto& bb = bins.buyer_bin;
  const auto cs = bin_counts(sb, qs), cb = bin_counts(bb, qb);

  Matrix rowsum(ns, qb), colsum(nb, qs), grand(qs, qb);
  for (std::size_t i = 0; i < ns; ++i) {
    const double* yi = y.row(i).data();
    double* rs = rowsum.row(i).data();
    const std::uint32_t a = sb[i];
    for (std::size_t j = 0; j < nb; ++j) {
      rs[bb[j]] += yi[j];
      colsum(j, a) += yi[j];
    }
    for (std::size_t b = 0; b < qb; ++b) grand(a, b) += rs[b];
  }
  SaturatedFit f;
  f.solver = FitSolver::block;
  f.seller_coef = Matrix(ns, qb);
  f.buyer_coef = Matrix(nb, qs);
  for (std::size_t a = 0; a < qs; ++a)
    for (std::size_t b = 0; b < qb; ++b)
      if (cs[a] > 0 && cb[b] > 0) grand(a, b) /= cs[a] * cb[b];
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t b = 0; b < qb; ++b)
      if (cb[b] > 0) f.seller_coef(i, b) = rowsum(i, b) / cb[b] - grand(sb[i], b);
  for (std::size_t j = 0; j < nb; ++j)
    for (std::size_t a = 0; a < qs; ++a)
      if (cs[a] > 0) f.buyer_coef(j, a) = colsum(j, a) / cs[a];

  f.fitted = Matrix(ns, nb);
  f.residual = Matrix(ns, nb);
  for (std::size_t i = 0; i < ns; ++i) {
    const double* so = f.seller_coef.row(i).data();
    const std::uint32_t a = sb[i];
    const double* yi = y.row(i).data();
    double* fi = f.fitted.row(i).data();
    double* ri = f.residual.row(i).data();
    for (std::size_t j = 0; j < nb; ++j) {
      fi[j] = so[bb[j]] + f.buyer_coef(j, a);
      ri[j] = yi[j] - fi[j];
    }
  }
  return f;
}

struct Design {
  const BinScheme& bins;
  std::size_t ns, nb, qs, qb, qh;
  std::size_t off_buyer() const { return ns * qb; }
  std::size_t off_pair() const { return ns * qb + nb * qs; }
  std::size_t params() const { return off_pair() + qh; }

  void apply(const std::vector<double>& theta, Matrix& out) const {
    for (std::size_t i = 0; i < ns; ++i) {
      const double* so = theta.data() + i * qb;
      const std::size_t a = bins.seller_bin[i];
      double* oi = out.row(i).data();
      for (std::size_t j = 0; j < nb; ++j) {
        double v = so[bins.buyer_bin[j]] + theta[off_buyer() + j * qs + a];
        if (qh) v += theta[off_pair() + bins.pair_bin(i, j)];
        oi[j] = v;
      }
    }
  }

  void transpose(const Matrix& v, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < ns; ++i) {
      double* so = out.data() + i * qb;
      const std::size_t a = bins.seller_bin[i];
      const double* vi = v.row(i).data();
      for (std::size_t j = 0; j < nb; ++j) {
        so[bins.buyer_bin[j]] += vi[j];
        out[off_buyer() + j * qs + a] += vi[j];
        if (qh) out[off_pair() + bins.pair_bin(i, j)] += vi[j];
      }
    }
  }

  std::vector<double> column_counts() const {
    std::vector<double> c(params(), 0.0);
    const auto cs = bin_counts(bins.seller_bin, qs), cb = bin_counts(bins.buyer_bin, qb);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t b = 0; b < qb; ++b) c[i * qb + b] = cb[b];
    for (std::size_t j = 0; j < nb; ++j)
      for (std::size_t a = 0; a < qs; ++a) c[off_buyer() + j * qs + a] = cs[a];
    if (qh)
      for (auto h : bins.pair_bin.flat()) c[off_pair() + h] += 1.0;
    return c;
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

SaturatedFit cg_fit(const Matrix& y, const BinScheme& bins, const FitOptions& opts) {
  const Design d{bins, y.rows(), y.cols(), bins.n_seller_bins, bins.n_buyer_bins, bins.n_pair_bins};
  const std::size_t np = d.params();
  const std::size_t max_iter = opts.max_iter ? opts.max_iter : 10 * np;
  const auto counts = d.column_counts();
  std::vector<double> minv(np);
  for (std::size_t k = 0; k < np; ++k) minv[k] = counts[k] > 0 ? 1.0 / counts[k] : 0.0;  // empty columns drop out

  std::vector<double> x(np, 0.0), r(np), z(np), p(np), ap(np);
  d.transpose(y, r);
  const double bnorm = std::sqrt(dot(r, r));
  SaturatedFit f;
  f.solver = FitSolver::conjugate_gradient;
  Matrix work(y.rows(), y.cols());
  if (bnorm > 0.0) {
    for (std::size_t k = 0; k < np; ++k) z[k] = minv[k] * r[k];
    p = z;
    double rz = dot(r, z);
    f.converged = false;
    for (std::size_t it = 1; it <= max_iter; ++it) {
      d.apply(p, work);
      d.transpose(work, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        f.converged = std::sqrt(dot(r, r)) <= opts.tol * bnorm;
        f.iterations = it;
        break;
      }
      const double step = rz / pap;
      for (std::size_t k = 0; k < np; ++k) {
        x[k] += step * p[k];
        r[k] -= step * ap[k];
      }
      f.iterations = it;
      if (std::sqrt(dot(r, r)) <= opts.tol * bnorm) {
        f.converged = true;
        break;
      }
      for (std::size_t k = 0; k < np; ++k) z[k] = minv[k] * r[k];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < np; ++k) p[k] = z[k] + beta * p[k];
    }
  }
  if (!f.converged) throw FitError("fit_saturated_lpm: conjugate gradients did not reach the tolerance");

  f.fitted = Matrix(y.rows(), y.cols());
  d.apply(x, f.fitted);
  f.residual = Matrix(y.rows(), y.cols());
  for (std::size_t k = 0; k < y.size(); ++k) f.residual.flat()[k] = y.flat()[k] - f.fitted.flat()[k];
  f.seller_coef = Matrix(d.ns, d.qb, std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d.off_buyer())));
  f.buyer_coef = Matrix(d.nb, d.qs,
                        std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(d.off_buyer()),
                                            x.begin() + static_cast<std::ptrdiff_t>(d.off_pair())));
  f.pair_coef.assign(x.begin() + static_cast<std::ptrdiff_t>(d.off_pair()), x.end());
  return f;
}

}  // namespace

SaturatedFit fit_saturated_lpm(const Matrix& outcome, const BinScheme& bins, const FitOptions& opts) {
  check_shape(outcome, bins);
  if (!(opts.tol > 0.0)) throw DomainError("fit_saturated_lpm: tolerance must be positive");
  FitSolver s = opts.solver;
  if (s == FitSolver::automatic) s = bins.has_pair_bins() ? FitSolver::conjugate_gradient : FitSolver::block;
  if (s == FitSolver::block && bins.has_pair_bins())
    throw FitError("fit_saturated_lpm: the block solver cannot absorb pair-covariate terms");
  return s == FitSolver::block ? block_fit(outcome, bins) : cg_fit(outcome, bins, opts);
}

double max_design_correlation(const SaturatedFit& fit, const Matrix& outcome, const BinScheme& bins) {
  const Design d{bins, outcome.rows(), outcome.cols(), bins.n_seller_bins, bins.n_buyer_bins, bins.n_pair_bins};
  std::vector<double> ip(d.params());
  d.transpose(fit.residual, ip);
  const auto counts = d.column_counts();
  double ynorm = 0.0;
  for (double v : outcome.flat()) ynorm += v * v;
  ynorm = std::sqrt(ynorm);
  if (ynorm == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < ip.size(); ++k)
    if (counts[k] > 0) worst = std::max(worst, std::abs(ip[k]) / (std::sqrt(counts[k]) * ynorm));
  return worst;
}

// ---------------------------------------------------------------------------
// Statistics

Matrix minnorm(const Matrix& residual) {
  Matrix out = residual;
  if (out.empty()) return out;
  const double m = *std::min_element(out.flat().begin(), out.flat().end());
  for (double& v : out.flat()) v -= m;
  return out;
}

Matrix minnorm(const Matrix& residual, double anchor) {
  Matrix out = residual;
  for (double& v : out.flat()) v -= anchor;
  return out;
}

Matrix residualize_minnorm(const Matrix& values, const Matrix& fitted) {
  if (!values.same_shape(fitted)) throw SizeError("residualize_minnorm: shape mismatch");
  Matrix r(values.rows(), values.cols());
  for (std::size_t k = 0; k < r.size(); ++k) r.flat()[k] = values.flat()[k] - fitted.flat()[k];
  return minnorm(r);
}

double t_statistic(const Matrix& y_nr, const Matrix& s_nr) {
  if (!y_nr.same_shape(s_nr)) throw SizeError("t_statistic: shape mismatch");
  double t = 0.0;
  for (std::size_t k = 0; k < y_nr.size(); ++k) t += y_nr.flat()[k] * s_nr.flat()[k];
  return t;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_check_shapes(const Matrix& y, const Matrix& r) {
  if (r.rows() != y.rows() || r.cols() != y.rows())
    throw SizeError("t_check_statistic: proximity residuals must be sellers x sellers");
}

}  // namespace

double t_check_statistic(const Matrix& y_nr, const Matrix& r_nr) {
  check_check_shapes(y_nr, r_nr);
  const std::size_t ns = y_nr.rows();
  Eigen::Map<const RowMat> y(y_nr.flat().data(), static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(y_nr.cols()));
  const RowMat g = y * y.transpose();  // g(i,k) = sum_j y_ij y_kj
  double t = 0.0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t k = 0; k < ns; ++k)
      if (k != i) t += r_nr(k, i) * g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  return t;
}

double t_check_statistic_buyer_order(const Matrix& y_nr, const Matrix& r_nr) {
  check_check_shapes(y_nr, r_nr);
  const std::size_t ns = y_nr.rows(), nb = y_nr.cols();
  double t = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t i = 0; i < ns; ++i) {
      double inner = 0.0;
      for (std::size_t k = 0; k < ns; ++k)
        if (k != i) inner += r_nr(k, i) * y_nr(k, j);
      t += y_nr(i, j) * inner;
    }
  }
  return t;
}

namespace {

/// S~ for real-valued links (deterministic bootstrap variant).
Matrix dense_support(const Matrix& y, const Matrix& r) {
  const std::size_t ns = y.rows(), nb = y.cols();
  Matrix s(ns, nb);
  const double inv_k = 1.0 / static_cast<double>(ns - 1);
  for (std::size_t i = 0; i < ns; ++i) {
    double* out = s.row(i).data();
    for (std::size_t k = 0; k < ns; ++k) {
      if (k == i || r(i, k) == 0.0) continue;
      const double w = r(i, k);
      const double* yk = y.row(k).data();
      for (std::size_t j = 0; j < nb; ++j) out[j] += w * yk[j];
    }
    for (std::size_t j = 0; j < nb; ++j) out[j] *= inv_k;
  }
  return s;
}

BinScheme seller_pair_scheme(const BinScheme& bins) {
  BinScheme s;
  s.seller_bin = bins.seller_bin;
  s.buyer_bin = bins.seller_bin;
  s.n_seller_bins = s.n_buyer_bins = bins.n_seller_bins;
  return s;
}

/// Min-normalized proximity residuals with the diagonal excluded.
Matrix proximity_residuals(const Matrix& r, const BinScheme& bins, const FitOptions& fit) {
  const SaturatedFit f = fit_saturated_lpm(r, seller_pair_scheme(bins), fit);
  const std::size_t n = r.rows();
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (i != k) m = std::min(m, f.residual(i, k));
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (i != k) out(i, k) = f.residual(i, k) - m;
  return out;
}

double min_of(const Matrix& m) { return *std::min_element(m.flat().begin(), m.flat().end()); }

/// Statistic of one sample. With anchors the residuals are shifted by the given
/// minima, otherwise by their own; anchors_out receives the own minima.
double statistic_from(const Matrix& y, const Matrix& support, const Matrix& r, const BinScheme& bins,
                      Variant variant, const FitOptions& fit, const Anchors* anchors, SaturatedFit* fit_y_out,
                      Anchors* anchors_out) {
  SaturatedFit fy = fit_saturated_lpm(y, bins, fit);
  Anchors own;
  own.y = min_of(fy.residual);
  double value = 0.0;
  if (variant == Variant::T) {
    const SaturatedFit fs = fit_saturated_lpm(support, bins, fit);
    own.support = min_of(fs.residual);
    const Anchors& a = anchors ? *anchors : own;
    value = t_statistic(minnorm(fy.residual, a.y), minnorm(fs.residual, a.support));
  } else {
    const double ay = anchors ? anchors->y : own.y;
    value = t_check_statistic(minnorm(fy.residual, ay), proximity_residuals(r, bins, fit));
  }
  if (fit_y_out) *fit_y_out = std::move(fy);
  if (anchors_out) *anchors_out = own;
  return value;
}

Matrix as_real(const Adjacency& y) {
  Matrix m(y.rows(), y.cols());
  for (std::size_t k = 0; k < y.size(); ++k) m.flat()[k] = y.flat()[k];
  return m;
}

void check_proximity(const Matrix& r, std::size_t ns) {
  if (r.rows() != ns || r.cols() != ns) throw SizeError("transitivity test: proximity does not match sellers");
  if (ns < 2) throw SizeError("transitivity test: at least two sellers required");
}

}  // namespace

DataStatistic data_statistic(const Adjacency& y, const Matrix& proximity, const BinScheme& bins, Variant variant,
                             const FitOptions& fit) {
  check_proximity(proximity, y.rows());
  DataStatistic out;
  const Matrix support = netcore::common_support(y, proximity);
  out.value = statistic_from(as_real(y), support, proximity, bins, variant, fit, nullptr, &out.fit_y, &out.anchors);
  return out;
}

TestConfig TestConfig::literal() {
  TestConfig c;
  c.anchor = MinAnchor::per_sample;
  c.null_model = NullModel::lpm_clamped;
  c.resample = true;
  return c;
}

Matrix quasi_independence_probabilities(const Adjacency& y, const BinScheme& bins) {
  const std::size_t ns = y.rows(), nb = y.cols();
  if (bins.seller_bin.size() != ns || bins.buyer_bin.size() != nb)
    throw SizeError("quasi_independence_probabilities: bins do not match the link matrix");
  if (bins.has_pair_bins()) throw ConfigError("quasi_independence_probabilities: pair bins are not supported");
  const std::size_t qs = bins.n_seller_bins, qb = bins.n_buyer_bins;
  Matrix row(ns, qb), col(nb, qs), block(qs, qb);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      if (!y(i, j)) continue;
      const std::uint32_t a = bins.seller_bin[i], b = bins.buyer_bin[j];
      row(i, b) += 1.0;
      col(j, a) += 1.0;
      block(a, b) += 1.0;
    }
  Matrix p(ns, nb);
  for (std::size_t i = 0; i < ns; ++i) {
    const std::uint32_t a = bins.seller_bin[i];
    for (std::size_t j = 0; j < nb; ++j) {
      const std::uint32_t b = bins.buyer_bin[j];
      const double yij = y(i, j);
      const double r = row(i, b) - yij, c = col(j, a) - yij;
      const double rest = block(a, b) - row(i, b) - col(j, a) + yij;
      p(i, j) = rest > 0.0 ? r * c / rest : 0.0;
    }
  }
  return p;
}

Matrix null_probabilities(const Adjacency& y, const SaturatedFit& fit_y, const BinScheme& bins, NullModel model) {
  if (model == NullModel::quasi_independence) return quasi_independence_probabilities(y, bins);
  if (!fit_y.fitted.same_shape(y)) throw SizeError("null_probabilities: fit does not match the link matrix");
  return fit_y.fitted;
}

std::vector<double> null_distribution(const Matrix& prob, const BinScheme& bins, const Matrix& proximity,
                                      const TestConfig& cfg, const Anchors& anchors,
                                      std::size_t* empty_bin_replicates) {
  if (cfg.replicates < 100) throw DomainError("null_distribution: at least 100 replicates required");
  const std::size_t ns = prob.rows(), nb = prob.cols();
  check_proximity(proximity, ns);
  if (bins.seller_bin.size() != ns || bins.buyer_bin.size() != nb)
    throw SizeError("null_distribution: bins do not match the probabilities");
  for (double v : prob.flat())
    if (std::isnan(v)) throw NumericError("null_distribution: NaN probability");
  const Anchors* shared = cfg.anchor == MinAnchor::shared ? &anchors : nullptr;
  std::vector<double> out(cfg.replicates);
  std::vector<std::uint8_t> empty(cfg.replicates, 0);

  parallel_for(cfg.replicates, cfg.workers, [&](std::size_t b) {
    const std::uint64_t key = derive_key(cfg.seed, {static_cast<std::uint64_t>(b)});
    std::vector<std::uint32_t> si(ns), sj(nb);
    if (cfg.resample) {
      CounterEngine e(derive_key(key, {0}));
      for (auto& v : si) v = static_cast<std::uint32_t>(e() % ns);
      for (auto& v : sj) v = static_cast<std::uint32_t>(e() % nb);
    } else {
      std::iota(si.begin(), si.end(), 0u);
      std::iota(sj.begin(), sj.end(), 0u);
    }

    BinScheme rb;
    rb.n_seller_bins = bins.n_seller_bins;
    rb.n_buyer_bins = bins.n_buyer_bins;
    rb.seller_bin.resize(ns);
    rb.buyer_bin.resize(nb);
    for (std::size_t a = 0; a < ns; ++a) rb.seller_bin[a] = bins.seller_bin[si[a]];
    for (std::size_t c = 0; c < nb; ++c) rb.buyer_bin[c] = bins.buyer_bin[sj[c]];
    if (bins.has_pair_bins()) {
      rb.n_pair_bins = bins.n_pair_bins;
      rb.pair_bin = Grid<std::uint32_t>(ns, nb);
      for (std::size_t a = 0; a < ns; ++a)
        for (std::size_t c = 0; c < nb; ++c) rb.pair_bin(a, c) = bins.pair_bin(si[a], sj[c]);
    }
    {
      std::vector<std::uint8_t> s_used(rb.n_seller_bins, 0), b_used(rb.n_buyer_bins, 0);
      for (auto v : rb.seller_bin) s_used[v] = 1;
      for (auto v : rb.buyer_bin) b_used[v] = 1;
      empty[b] = std::find(s_used.begin(), s_used.end(), 0) != s_used.end() ||
                 std::find(b_used.begin(), b_used.end(), 0) != b_used.end();
    }

    // Duplicated sellers share a location but keep r = 0 like the diagonal.
    Matrix r(ns, ns);
    for (std::size_t a = 0; a < ns; ++a)
      for (std::size_t c = 0; c < ns; ++c)
        if (a != c) r(a, c) = proximity(si[a], si[c]);

    Matrix p(ns, nb);
    for (std::size_t a = 0; a < ns; ++a) {
      const double* src = prob.row(si[a]).data();
      double* dst = p.row(a).data();
      for (std::size_t c = 0; c < nb; ++c) dst[c] = std::clamp(src[sj[c]], 0.0, 1.0);
    }

    if (cfg.draw == NullDraw::bernoulli) {
      const Adjacency ys = genmodels::sample_from_probabilities(p, derive_key(key, {1}), true);
      const Matrix support = netcore::common_support(ys, r);
      out[b] = statistic_from(as_real(ys), support, r, rb, cfg.variant, cfg.fit, shared, nullptr, nullptr);
    } else {
      const Matrix support = dense_support(p, r);
      out[b] = statistic_from(p, support, r, rb, cfg.variant, cfg.fit, shared, nullptr, nullptr);
    }
  });
  if (empty_bin_replicates)
    *empty_bin_replicates = static_cast<std::size_t>(std::count(empty.begin(), empty.end(), 1));
  return out;
}

void summarize(TestReport& rep) {
  const auto& d = rep.null_draws;
  if (d.empty()) throw SizeError("summarize: empty null distribution");
  const double n = static_cast<double>(d.size());
  rep.p_value = static_cast<double>(std::count_if(d.begin(), d.end(), [&](double v) { return v >= rep.t_data; })) / n;
  rep.null_p50 = netcore::nearest_rank_percentile(d, 50.0);
  rep.null_p95 = netcore::nearest_rank_percentile(d, 95.0);
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  rep.null_sd = d.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double gap = rep.t_data - rep.null_p95;
  if (rep.null_sd > 0.0)
    rep.z_distance = gap / rep.null_sd;
  else
    rep.z_distance = gap > 0 ? std::numeric_limits<double>::infinity()
                             : (gap < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
  rep.reject = rep.t_data > rep.null_p95;
}

TestReport run_test(const Adjacency& y, std::span<const double> seller_size, std::span<const double> buyer_size,
                    const Matrix& proximity, const TestConfig& cfg) {
  if (seller_size.size() != y.rows() || buyer_size.size() != y.cols())
    throw SizeError("run_test: sizes do not match the link matrix");
  const BinScheme bins = make_bins(seller_size, buyer_size, cfg.bins);
  TestReport rep;
  rep.seed = cfg.seed;
  rep.variant = cfg.variant;
  DataStatistic ds = data_statistic(y, proximity, bins, cfg.variant, cfg.fit);
  rep.t_data = ds.value;
  const Matrix prob = null_probabilities(y, ds.fit_y, bins, cfg.null_model);
  rep.null_draws = null_distribution(prob, bins, proximity, cfg, ds.anchors, &rep.replicates_with_empty_bins);
  summarize(rep);
  return rep;
}

double MonteCarloResult::rejection_fraction() const {
  if (rejected.empty()) return 0.0;
  return static_cast<double>(std::count(rejected.begin(), rejected.end(), 1)) / static_cast<double>(rejected.size());
}

MonteCarloResult monte_carlo_validation(const MonteCarloConfig& cfg) {
  if (cfg.runs == 0) throw DomainError("monte_carlo_validation: at least one run required");
  MonteCarloResult res;
  const std::size_t R = cfg.runs;
  res.dist_p50.resize(R);
  res.dist_p95.resize(R);
  res.z_distance.resize(R);
  res.p_value.resize(R);
  res.rejected.resize(R);
  res.density.resize(R);
  std::vector<std::uint8_t> nonconv(R, 0);
  parallel_for(R, cfg.workers, [&](std::size_t run) {
    genmodels::DgpConfig dgp = cfg.dgp;
    dgp.seed = derive_key(cfg.seed, {static_cast<std::uint64_t>(run), 0});
    const genmodels::CrossSection cs = genmodels::simulate_cross_section(dgp);
    nonconv[run] = !cs.converged;
    TestConfig tc = cfg.test;
    tc.seed = derive_key(cfg.seed, {static_cast<std::uint64_t>(run), 1});
    tc.workers = 1;
    const TestReport rep =
        run_test(cs.links, cs.nodes.seller_size, cs.nodes.buyer_size, cs.nodes.proximity.proximity, tc);
    res.dist_p50[run] = rep.t_data - rep.null_p50;
    res.dist_p95[run] = rep.t_data - rep.null_p95;
    res.z_distance[run] = rep.z_distance;
    res.p_value[run] = rep.p_value;
    res.rejected[run] = rep.reject;
    std::size_t links = 0;
    for (auto v : cs.links.flat()) links += v;
    res.density[run] = static_cast<double>(links) / static_cast<double>(cs.links.size());
  });
  res.nonconverged_dgp = static_cast<std::size_t>(std::count(nonconv.begin(), nonconv.end(), 1));
  return res;
}

}  // namespace transnet::transtest
