#include "transnet/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "transnet/calib.hpp"
#include "transnet/counterfact.hpp"
#include "transnet/csv.hpp"
#include "transnet/genmodels.hpp"
#include "transnet/ingest.hpp"
#include "transnet/netcore.hpp"
#include "transnet/panel.hpp"
#include "transnet/transtest.hpp"

#ifndef TRANSNET_VERSION
#define TRANSNET_VERSION "unknown"
#endif

namespace transnet::commands {

using nlohmann::json;
namespace fs = std::filesystem;

const char* version() noexcept { return TRANSNET_VERSION; }

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::input: return kInput;
    case ErrorKind::input_domain:
    case ErrorKind::size:
    case ErrorKind::numeric:
    case ErrorKind::fit: return kNumeric;
    case ErrorKind::convergence:
    case ErrorKind::calibration: return kConvergence;
  }
  return kInternal;
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"stats", "test", "estimate", "calibrate",
                                          "counterfactual", "montecarlo", "simulate"};
  return n;
}

namespace {

/// Collects outputs in memory, writes them and records their hashes.
class Outputs {
 public:
  explicit Outputs(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw InputError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw InputError("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + (dir_ / name).string() + "'");
    result_.files.push_back({name, config::sha256_hex(content)});
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  RunResult finish(const std::string& command, const config::RunConfig& cfg) {
    json files = json::array();
    for (const auto& f : result_.files) files.push_back({{"file", f.name}, {"sha256", f.sha256}});
    json m = {{"command", command},
              {"version", version()},
              {"seed", cfg.seed},
              {"config_hash", config::config_hash(cfg)},
              {"outputs", files},
              {"config", json::parse(config::to_json(cfg))}};
    m["config"].erase("workers");
    m["config"].erase("output_dir");
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
    if (!out) throw InputError("cannot write manifest");
    return result_;
  }

 private:
  fs::path dir_;
  RunResult result_;
};

/// CSV assembled in memory with shortest round-trip numbers.
class Table {
 public:
  explicit Table(std::vector<std::string> header) { row(header); }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out_ << ',';
      out_ << csv::escape(fields[k]);
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

std::string num(double x) { return csv::format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }
std::string num(int x) { return std::to_string(x); }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

ingest::Ingested load_data(const config::RunConfig& cfg, std::ostream& log, ingest::Report* report = nullptr) {
  const auto& d = cfg.data;
  if (d.transactions.empty() || d.locations.empty())
    throw ConfigError("data.transactions and data.locations are required for this command");
  ingest::Paths paths{d.transactions, d.locations, d.dest_exports, d.fx};
  ingest::Ingested in = ingest::ingest(paths, d.ingest, report);
  log << "ingested " << in.report.kept_rows << " of " << in.report.raw_rows << " rows: " << in.panel.n_sellers()
      << " sellers, " << in.panel.n_buyers() << " buyers, " << in.panel.n_years() << " years\n";
  return in;
}

json report_json(const ingest::Report& r) {
  return {{"raw_rows", r.raw_rows},
          {"malformed", r.malformed},
          {"below_floor", r.below_floor},
          {"missing_location", r.missing_location},
          {"outside_region", r.outside_region},
          {"inactive_seller", r.inactive_seller},
          {"kept_rows", r.kept_rows},
          {"reconciles", r.reconciles()},
          {"sellers_seen", r.sellers_seen},
          {"sellers_kept", r.sellers_kept},
          {"buyers_kept", r.buyers_kept},
          {"years", r.years},
          {"raw_value", r.raw_value},
          {"kept_value", r.kept_value},
          {"value_coverage", r.value_coverage},
          {"seller_coverage", r.seller_coverage},
          {"location_rows", r.location_rows},
          {"dest_export_rows", r.dest_export_rows},
          {"dest_export_unmatched", r.dest_export_unmatched},
          {"fx_rows", r.fx_rows},
          {"diagnostics", r.diagnostics}};
}

std::size_t year_position(const PanelDataset& p, const std::optional<int>& year) {
  if (!year) return p.n_years() - 1;
  try {
    return p.graph.year_index(*year);
  } catch (const Error&) {
    throw ConfigError("year " + std::to_string(*year) + " is not in the data");
  }
}

panel::SampleSpec sample_spec(const config::RunConfig& cfg, const PanelDataset& p) {
  panel::SampleSpec s = cfg.estimate.sample;
  if (s.with_instrument && s.instrument.country.empty()) {
    if (p.destinations.empty()) throw ConfigError("estimate: the instrument needs destination exports and fx data");
    s.instrument.country = p.destinations.front();
  }
  if (cfg.estimate.first_year) s.first_year = year_position(p, cfg.estimate.first_year);
  return s;
}

json estimate_json(const panel::EstimateReport& r, const panel::EstimationSample& s, const PanelDataset& p) {
  json reps = json::array();
  for (const auto& x : r.repetitions)
    reps.push_back({{"theta", finite_or_null(x.theta)},
                    {"se", finite_or_null(x.se)},
                    {"first_stage_coef", finite_or_null(x.first_stage_coef)},
                    {"first_stage_se", finite_or_null(x.first_stage_se)},
                    {"f_statistic", finite_or_null(x.f_statistic)}});
  json years = json::array();
  for (std::size_t t : s.years) years.push_back(p.graph.years()[t]);
  return {{"theta_hat", finite_or_null(r.theta_hat)},
          {"se_theta", finite_or_null(r.se_theta)},
          {"first_stage_coef", finite_or_null(r.first_stage_coef)},
          {"first_stage_se", finite_or_null(r.first_stage_se)},
          {"f_statistic", finite_or_null(r.f_statistic)},
          {"n_obs", r.n_obs},
          {"n_clusters", r.n_clusters},
          {"instrumented", r.instrumented},
          {"identified", r.identified},
          {"weak_instrument", r.weak_instrument},
          {"outcome_years", years},
          {"repetitions", reps}};
}

// ---------------------------------------------------------------------------

RunResult cmd_stats(const config::RunConfig& cfg, std::ostream& log) {
  Outputs out(cfg.output_dir);
  ingest::Report rep;
  ingest::Ingested in;
  try {
    in = load_data(cfg, log, &rep);
  } catch (const InputError&) {
    out.write_json("ingest_report.json", report_json(rep));
    throw;
  }
  out.write_json("ingest_report.json", report_json(in.report));
  const netcore::DegreeStats st = netcore::network_stats(in.panel.graph);
  json years = json::array();
  Table hist({"year", "side", "degree", "count"});
  for (const auto& y : st.years) {
    years.push_back({{"year", y.year},
                     {"active_links", y.active_links},
                     {"active_buyers", y.active_buyers},
                     {"active_sellers", y.active_sellers},
                     {"new_links", y.new_links},
                     {"discontinued_links", y.discontinued_links},
                     {"continued_links", y.continued_links},
                     {"density", y.density},
                     {"total_value", y.total_value},
                     {"sales_per_seller", y.sales_per_seller}});
    for (int side = 0; side < 2; ++side) {
      std::map<std::size_t, std::size_t> counts;
      for (std::size_t d : side == 0 ? y.outdegree : y.indegree) ++counts[d];
      for (const auto& [d, n] : counts) hist.row({num(y.year), side == 0 ? "seller" : "buyer", num(d), num(n)});
    }
  }
  const auto& b = st.buyer_level;
  json j = {{"years", years},
            {"mean_active_links", st.mean_active_links},
            {"mean_active_buyers", st.mean_active_buyers},
            {"mean_active_sellers", st.mean_active_sellers},
            {"mean_new_links", st.mean_new_links},
            {"mean_discontinued_links", st.mean_discontinued_links},
            {"mean_density", st.mean_density},
            {"mean_total_value", st.mean_total_value},
            {"mean_sales_per_seller", st.mean_sales_per_seller},
            {"buyer_level",
             {{"sellers_per_buyer", b.sellers_per_buyer},
              {"new_per_buyer", b.new_per_buyer},
              {"discontinued_per_buyer", b.discontinued_per_buyer},
              {"purchases_per_buyer", b.purchases_per_buyer},
              {"value_per_relationship", b.value_per_relationship},
              {"buyers_counted", b.buyers_counted}}}};
  out.write_json("stats.json", j);
  out.write("degree_histogram.csv", hist.str());
  return out.finish("stats", cfg);
}

RunResult cmd_test(const config::RunConfig& cfg, std::ostream& log) {
  const ingest::Ingested in = load_data(cfg, log);
  const PanelDataset& p = in.panel;
  const std::size_t t = year_position(p, cfg.test.year);
  transtest::TestConfig tc = cfg.test.test;
  tc.seed = cfg.seed;
  tc.workers = cfg.resolved_workers();
  const auto srow = p.sizes.seller_size.row(t);
  const auto brow = p.sizes.buyer_size.row(t);
  const transtest::TestReport r = transtest::run_test(p.graph.links(t), srow, brow, p.proximity.proximity, tc);
  log << "T = " << r.t_data << ", null p95 = " << r.null_p95 << ", z = " << r.z_distance
      << (r.reject ? " (reject)" : " (no rejection)") << "\n";
  Outputs out(cfg.output_dir);
  out.write_json("test.json", {{"year", p.graph.years()[t]},
                               {"t_data", r.t_data},
                               {"p_value", r.p_value},
                               {"null_p50", r.null_p50},
                               {"null_p95", r.null_p95},
                               {"null_sd", r.null_sd},
                               {"z_distance", r.z_distance},
                               {"reject", r.reject},
                               {"replicates", r.null_draws.size()},
                               {"replicates_with_empty_bins", r.replicates_with_empty_bins},
                               {"seed", r.seed}});
  Table draws({"replicate", "t"});
  for (std::size_t b = 0; b < r.null_draws.size(); ++b) draws.row({num(b), num(r.null_draws[b])});
  out.write("null_draws.csv", draws.str());
  return out.finish("test", cfg);
}

struct Estimation {
  panel::EstimationSample sample;
  panel::EstimateReport report;
};

Estimation estimate(const config::RunConfig& cfg, const PanelDataset& p) {
  Estimation e;
  e.sample = panel::build_sample(p, p.proximity.proximity, sample_spec(cfg, p));
  panel::DdmlConfig dc = cfg.estimate.ddml;
  dc.seed = cfg.seed;
  dc.workers = cfg.resolved_workers();
  e.report = panel::ddml_iv_estimate(e.sample, dc);
  return e;
}

RunResult cmd_estimate(const config::RunConfig& cfg, std::ostream& log) {
  const ingest::Ingested in = load_data(cfg, log);
  const PanelDataset& p = in.panel;
  const Estimation e = estimate(cfg, p);
  log << "theta = " << e.report.theta_hat << " (se " << e.report.se_theta << "), F = " << e.report.f_statistic
      << "\n";
  if (e.report.weak_instrument) log << "warning: weak instrument (F below " << cfg.estimate.ddml.weak_f << ")\n";
  Outputs out(cfg.output_dir);
  out.write_json("estimate.json", estimate_json(e.report, e.sample, p));
  Table prof({"side", "grouping", "group", "firms", "mean_key", "mean_contribution"});
  if (e.report.identified) {
    for (auto side : {panel::ProfileSide::sellers, panel::ProfileSide::buyers})
      for (auto grouping : {panel::ProfileGrouping::support, panel::ProfileGrouping::size})
        for (const auto& row : panel::contribution_profile(e.report.theta_hat, e.sample, p, side, grouping,
                                                           cfg.estimate.profile_groups))
          prof.row({side == panel::ProfileSide::sellers ? "seller" : "buyer",
                    grouping == panel::ProfileGrouping::support ? "support" : "size", num(row.group),
                    num(row.firms), num(row.mean_key), num(row.mean_contribution)});
  }
  out.write("profiles.csv", prof.str());
  return out.finish("estimate", cfg);
}

json moments_json(const calib::Moments& m) {
  return {{"density", m.density},
          {"outdeg_p25", m.outdeg_p25},
          {"outdeg_p50", m.outdeg_p50},
          {"outdeg_p75", m.outdeg_p75},
          {"indeg_p25", m.indeg_p25},
          {"indeg_p50", m.indeg_p50},
          {"indeg_p75", m.indeg_p75}};
}

RunResult cmd_calibrate(const config::RunConfig& cfg, std::ostream& log) {
  const ingest::Ingested in = load_data(cfg, log);
  const PanelDataset& p = in.panel;
  const Estimation e = estimate(cfg, p);
  if (!e.report.identified) throw CalibrationError("calibrate: the panel estimate is not identified");
  std::size_t pos = e.sample.years.size() - 1;
  if (cfg.calibrate.year) {
    const std::size_t t = year_position(p, cfg.calibrate.year);
    const auto it = std::find(e.sample.years.begin(), e.sample.years.end(), t);
    if (it == e.sample.years.end()) throw ConfigError("calibrate.year: not an outcome year of the estimation sample");
    pos = static_cast<std::size_t>(it - e.sample.years.begin());
  }
  calib::CalibrationProblem prob = calib::make_problem(p, e.sample, e.report, pos);
  if (cfg.calibrate.theta_hat) prob.theta_hat = *cfg.calibrate.theta_hat;
  calib::CalibrationOptions opts = cfg.calibrate.options;
  opts.mle.workers = cfg.resolved_workers();
  const calib::CalibrationResult r = calib::hybrid_calibrate(prob, opts);
  log << "calibrated alpha " << r.params.alpha << " eta " << r.params.eta << " beta " << r.params.beta << " gamma "
      << r.params.gamma << (r.converged ? "" : " (not converged)") << "\n";
  const calib::FitReport fit =
      calib::fit_report(genmodels::LinkModel::make(r.params), prob.cov, p.proximity.proximity, prob.y,
                        cfg.calibrate.fit_draws, cfg.seed, cfg.resolved_workers());

  Outputs out(cfg.output_dir);
  out.write_json("calibration.json",
                 {{"year", p.graph.years()[e.sample.years[pos]]},
                  {"theta_hat", prob.theta_hat},
                  {"params",
                   {{"alpha", r.params.alpha}, {"eta", r.params.eta}, {"beta", r.params.beta}, {"gamma", r.params.gamma}}},
                  {"loglik", r.loglik},
                  {"theta_gap", r.theta_gap},
                  {"grad_norm", r.grad_norm},
                  {"mle_grad_norm", r.mle_grad_norm},
                  {"mle_converged", r.mle_converged},
                  {"iterations", r.iterations},
                  {"converged", r.converged},
                  {"gamma_path", r.gamma_path},
                  {"fit",
                   {{"observed", moments_json(fit.observed)},
                    {"simulated", moments_json(fit.simulated)},
                    {"density_sd", fit.density_sd},
                    {"draws", fit.draws},
                    {"nonconverged", fit.nonconverged}}}});
  Table moments({"moment", "observed", "simulated"});
  const json o = moments_json(fit.observed), s = moments_json(fit.simulated);
  for (const auto& [k, v] : o.items()) moments.row({k, num(v.get<double>()), num(s.at(k).get<double>())});
  out.write("fit_moments.csv", moments.str());
  if (!r.converged) throw CalibrationError("calibrate: gamma iteration did not converge (outputs written)");
  return out.finish("calibrate", cfg);
}

genmodels::PoissonParams counterfactual_params(const config::RunConfig& cfg) {
  const auto& f = cfg.counterfactual;
  if (f.params) return *f.params;
  if (f.calibration.empty())
    throw ConfigError("counterfactual: set counterfactual.params or counterfactual.calibration");
  std::ifstream in(f.calibration);
  if (!in) throw InputError("cannot open calibration '" + f.calibration + "'");
  try {
    const json j = json::parse(in);
    const json& p = j.at("params");
    return {p.at("alpha").get<double>(), p.at("eta").get<double>(), p.at("beta").get<double>(),
            p.at("gamma").get<double>()};
  } catch (const json::exception& e) {
    throw InputError("calibration file '" + f.calibration + "': " + e.what());
  }
}

RunResult cmd_counterfactual(const config::RunConfig& cfg, std::ostream& log) {
  const genmodels::PoissonParams params = counterfactual_params(cfg);
  genmodels::validate(params);
  const ingest::Ingested in = load_data(cfg, log);
  const PanelDataset& p = in.panel;
  const std::size_t t = year_position(p, cfg.counterfactual.year);
  const auto cov = genmodels::poisson_covariates(p.sizes.seller_size.row(t), p.sizes.buyer_size.row(t));
  const auto& f = cfg.counterfactual;
  const counterfact::EquilibriumOptions eo{f.tol, f.max_iter};
  const std::size_t workers = cfg.resolved_workers();
  const Matrix& r = p.proximity.proximity;

  const counterfact::Ensemble base = counterfact::build_ensemble(params, cov, r, f.draws, cfg.seed, workers, eo);
  counterfact::ScenarioConfig s1{f.xi, counterfact::Scenario::full, false};
  counterfact::ScenarioConfig s2{f.xi, counterfact::Scenario::frozen, f.freeze_at_mean};
  const counterfact::Ensemble c1 = counterfact::run_counterfactual(base, r, s1, workers, eo);
  const counterfact::Ensemble c2 = counterfact::run_counterfactual(base, r, s2, workers, eo);

  auto summary = [](const counterfact::Ensemble& e) {
    const auto s = counterfact::summarize(e);
    return json{{"draws", s.draws},
                {"nonconverged", s.nonconverged},
                {"mean_density", s.mean_density},
                {"density_se", s.density_se},
                {"mean_support", s.mean_support},
                {"support_se", s.support_se},
                {"mean_iterations", s.mean_iterations},
                {"max_iterations", s.max_iterations}};
  };
  Outputs out(cfg.output_dir);
  out.write_json("counterfactual.json",
                 {{"year", p.graph.years()[t]},
                  {"xi", f.xi},
                  {"params", {{"alpha", params.alpha}, {"eta", params.eta}, {"beta", params.beta}, {"gamma", params.gamma}}},
                  {"freeze_at_mean", f.freeze_at_mean},
                  {"baseline", summary(base)},
                  {"full", summary(c1)},
                  {"frozen", summary(c2)}});
  Table dec({"side", "scenario", "decile", "nodes", "baseline_degree", "change", "relative_change", "change_se"});
  for (auto side : {counterfact::Side::sellers, counterfact::Side::buyers})
    for (int sc = 0; sc < 2; ++sc)
      for (const auto& row : counterfact::compare(base, sc == 0 ? c1 : c2, side))
        dec.row({side == counterfact::Side::sellers ? "seller" : "buyer", sc == 0 ? "full" : "frozen",
                 num(row.decile), num(row.nodes), num(row.baseline_degree), num(row.change),
                 num(row.relative_change), num(row.change_se)});
  out.write("deciles.csv", dec.str());
  const std::size_t bad = base.nonconverged() + c1.nonconverged();
  log << "baseline density " << counterfact::summarize(base).mean_density << ", full "
      << counterfact::summarize(c1).mean_density << ", frozen " << counterfact::summarize(c2).mean_density
      << (bad ? " (" + std::to_string(bad) + " non-converged draws)" : std::string()) << "\n";
  return out.finish("counterfactual", cfg);
}

RunResult cmd_montecarlo(const config::RunConfig& cfg, std::ostream& log) {
  transtest::MonteCarloConfig mc;
  mc.dgp = cfg.montecarlo.dgp;
  mc.runs = cfg.montecarlo.runs;
  mc.test = cfg.test.test;
  mc.seed = cfg.seed;
  mc.workers = cfg.resolved_workers();
  const transtest::MonteCarloResult r = transtest::monte_carlo_validation(mc);
  double mean_z = 0.0;
  for (double z : r.z_distance) mean_z += z / static_cast<double>(r.z_distance.size());
  log << "rejection fraction " << r.rejection_fraction() << ", mean z " << mean_z << "\n";
  Outputs out(cfg.output_dir);
  out.write_json("montecarlo.json", {{"runs", mc.runs},
                                     {"rejection_fraction", r.rejection_fraction()},
                                     {"mean_z_distance", mean_z},
                                     {"nonconverged_dgp", r.nonconverged_dgp}});
  Table runs({"run", "density", "dist_p50", "dist_p95", "z_distance", "p_value", "rejected"});
  for (std::size_t k = 0; k < mc.runs; ++k)
    runs.row({num(k), num(r.density[k]), num(r.dist_p50[k]), num(r.dist_p95[k]), num(r.z_distance[k]),
              num(r.p_value[k]), num(static_cast<std::size_t>(r.rejected[k]))});
  out.write("montecarlo_runs.csv", runs.str());
  return out.finish("montecarlo", cfg);
}

RunResult cmd_simulate(const config::RunConfig& cfg, std::ostream& log) {
  genmodels::DgpConfig dgp = cfg.simulate.dgp;
  dgp.seed = cfg.seed;
  const genmodels::SimulatedPanel sim = genmodels::simulate_dgp_panel(dgp);
  const PanelDataset& p = sim.panel;
  const auto& g = p.graph;
  Table tx({"year", "seller_id", "buyer_id", "value_usd"});
  Table dest({"year", "seller_id", "dest_code", "value_usd"});
  std::size_t rows = 0;
  for (std::size_t t = 0; t < p.n_years(); ++t) {
    const Matrix& v = g.values(t);
    const Matrix chi = p.dest_share(t);
    for (std::size_t i = 0; i < p.n_sellers(); ++i) {
      double us = 0.0;
      for (std::size_t j = 0; j < p.n_buyers(); ++j)
        if (v(i, j) > 0.0) {
          tx.row({num(g.years()[t]), g.sellers().label(i), g.buyers().label(j), num(v(i, j))});
          us += v(i, j);
          ++rows;
        }
      // Exports sized so that ingested destination shares equal the simulated ones.
      double exposed = 0.0;
      for (std::size_t c = 0; c < p.destinations.size(); ++c) exposed += chi(i, c);
      for (std::size_t c = 0; c < p.destinations.size(); ++c)
        if (chi(i, c) > 0.0 && us > 0.0)
          dest.row({num(g.years()[t]), g.sellers().label(i), p.destinations[c], num(chi(i, c) / (1.0 - exposed) * us)});
    }
  }
  Table loc({"seller_id", "lat", "lon", "region"});
  for (std::size_t i = 0; i < p.n_sellers(); ++i)
    loc.row({g.sellers().label(i), num(p.seller_locations[i].lat), num(p.seller_locations[i].lon),
             p.seller_regions[i]});
  Table fx({"year", "dest_code", "lcu_per_usd"});
  for (std::size_t t = 0; t < p.n_years(); ++t)
    for (std::size_t c = 0; c < p.destinations.size(); ++c)
      fx.row({num(g.years()[t]), p.destinations[c], num(p.fx(t, c))});

  static constexpr const char* kModels[] = {"poisson", "balls_bins", "logistic", "lpm"};
  Outputs out(cfg.output_dir);
  out.write("transactions.csv", tx.str());
  out.write("locations.csv", loc.str());
  out.write("dest_exports.csv", dest.str());
  out.write("fx.csv", fx.str());
  const auto& tr = sim.truth;
  out.write_json("truth.json",
                 {{"model", kModels[static_cast<int>(tr.model)]},
                  {"transitivity", tr.transitivity},
                  {"theta", tr.theta},
                  {"poisson", {{"alpha", tr.poisson.alpha}, {"eta", tr.poisson.eta}, {"beta", tr.poisson.beta}, {"gamma", tr.poisson.gamma}}},
                  {"balls", {{"beta", tr.balls.beta}, {"gamma", tr.balls.gamma}}}});
  log << "simulated " << rows << " transactions over " << p.n_years() << " years\n";
  return out.finish("simulate", cfg);
}

}  // namespace

RunResult run(const std::string& command, const config::RunConfig& cfg, std::ostream& log) {
  if (command == "stats") return cmd_stats(cfg, log);
  if (command == "test") return cmd_test(cfg, log);
  if (command == "estimate") return cmd_estimate(cfg, log);
  if (command == "calibrate") return cmd_calibrate(cfg, log);
  if (command == "counterfactual") return cmd_counterfactual(cfg, log);
  if (command == "montecarlo") return cmd_montecarlo(cfg, log);
  if (command == "simulate") return cmd_simulate(cfg, log);
  throw ConfigError("unknown command '" + command + "'");
}

int run_guarded(const std::string& command, const config::RunConfig& cfg, std::ostream& log) {
  try {
    run(command, cfg, log);
    return kOk;
  } catch (const Error& e) {
    log << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace transnet::commands
