#include <benchmark/benchmark.h>

#include "transnet/calib.hpp"
#include "transnet/genmodels.hpp"
#include "transnet/netcore.hpp"
#include "transnet/rng.hpp"
#include "transnet/transtest.hpp"

using namespace transnet;

namespace {

genmodels::CrossSection cross_section(std::size_t ns, std::size_t nb) {
  genmodels::DgpConfig c;
  c.n_sellers = ns;
  c.n_buyers = nb;
  c.seed = 3;
  return genmodels::simulate_cross_section(c);
}

Matrix as_real(const Adjacency& a) {
  Matrix m(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) m.flat()[k] = a.flat()[k];
  return m;
}

void BM_TriadCount(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Adjacency a(n, n);
  CounterEngine rng(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.1) a(i, j) = a(j, i) = 1;
  for (auto _ : state) benchmark::DoNotOptimize(netcore::triad_count(a));
}
BENCHMARK(BM_TriadCount)->Arg(60)->Arg(435)->Arg(2000)->Unit(benchmark::kMicrosecond);

void BM_CommonSupport(benchmark::State& state) {
  const auto ns = static_cast<std::size_t>(state.range(0));
  const auto cs = cross_section(ns, ns * 5 / 3);
  for (auto _ : state) benchmark::DoNotOptimize(netcore::common_support(cs.links, cs.nodes.proximity.proximity));
}
BENCHMARK(BM_CommonSupport)->Arg(300)->Arg(435)->Unit(benchmark::kMillisecond);

void BM_FixedPoint(benchmark::State& state) {
  const auto ns = static_cast<std::size_t>(state.range(0));
  const auto cs = cross_section(ns, ns * 5 / 3);
  const auto model = genmodels::LinkModel::make(genmodels::PoissonParams{0.83, 0.19, 0.35, 20.0});
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(genmodels::solve_fixed_point(model, cs.covariates, cs.nodes.proximity.proximity, ++seed));
}
BENCHMARK(BM_FixedPoint)->Arg(300)->Arg(435)->Unit(benchmark::kMillisecond);

void BM_SaturatedFit(benchmark::State& state) {
  const auto cs = cross_section(300, 500);
  const auto bins = transtest::make_bins(cs.nodes.seller_size, cs.nodes.buyer_size, static_cast<std::size_t>(state.range(0)));
  const Matrix y = as_real(cs.links);
  for (auto _ : state) benchmark::DoNotOptimize(transtest::fit_saturated_lpm(y, bins));
}
BENCHMARK(BM_SaturatedFit)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_NullDistribution(benchmark::State& state) {
  const auto cs = cross_section(300, 500);
  transtest::TestConfig tc;
  tc.replicates = 100;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        transtest::run_test(cs.links, cs.nodes.seller_size, cs.nodes.buyer_size, cs.nodes.proximity.proximity, tc));
}
BENCHMARK(BM_NullDistribution)->Unit(benchmark::kMillisecond);

void BM_Loglik(benchmark::State& state) {
  const auto cs = cross_section(435, 794);
  calib::CalibrationProblem p;
  p.y = cs.links;
  p.cov = cs.covariates;
  p.support = netcore::common_support(p.y, cs.nodes.proximity.proximity);
  const genmodels::PoissonParams q{0.83, 0.19, 0.35, 20.0};
  double g[3];
  for (auto _ : state) {
    benchmark::DoNotOptimize(calib::loglik(q, p));
    calib::loglik_gradient(q, p, g);
    benchmark::DoNotOptimize(g[0]);
  }
}
BENCHMARK(BM_Loglik)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
