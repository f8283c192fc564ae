#include "transnet/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "transnet/errors.hpp"
#include "transnet/parallel.hpp"

namespace transnet::config {

using nlohmann::json;

namespace {

template <class E, std::size_t N>
using Names = std::array<std::pair<E, const char*>, N>;

constexpr Names<transtest::Variant, 2> kVariant{{{transtest::Variant::T, "T"}, {transtest::Variant::T_check, "T_check"}}};
constexpr Names<transtest::NullDraw, 2> kDraw{
    {{transtest::NullDraw::bernoulli, "bernoulli"}, {transtest::NullDraw::deterministic, "deterministic"}}};
constexpr Names<transtest::MinAnchor, 2> kAnchor{
    {{transtest::MinAnchor::shared, "shared"}, {transtest::MinAnchor::per_sample, "per_sample"}}};
constexpr Names<transtest::NullModel, 2> kNull{{{transtest::NullModel::quasi_independence, "quasi_independence"},
                                                {transtest::NullModel::lpm_clamped, "lpm_clamped"}}};
constexpr Names<panel::ClusterScheme, 2> kClusters{
    {{panel::ClusterScheme::seller_buyer_size, "seller_buyer_size"},
     {panel::ClusterScheme::buyer_size_seller_distance, "buyer_size_seller_distance"}}};
constexpr Names<netcore::ProximityMode, 2> kProximity{
    {{netcore::ProximityMode::continuous_rank, "continuous_rank"},
     {netcore::ProximityMode::quantile_threshold, "quantile_threshold"}}};
constexpr Names<genmodels::DgpModel, 4> kModel{{{genmodels::DgpModel::poisson, "poisson"},
                                                {genmodels::DgpModel::balls_bins, "balls_bins"},
                                                {genmodels::DgpModel::logistic, "logistic"},
                                                {genmodels::DgpModel::lpm, "lpm"}}};
constexpr Names<genmodels::InitialState, 2> kInitial{
    {{genmodels::InitialState::empty, "empty"}, {genmodels::InitialState::equilibrium, "equilibrium"}}};

template <class E, std::size_t N>
std::string name_of(const Names<E, N>& names, E v) {
  for (const auto& [e, n] : names)
    if (e == v) return n;
  throw ConfigError("config: unnamed enum value");
}

template <class E, std::size_t N>
E value_of(const Names<E, N>& names, const json& j, const std::string& path) {
  const std::string s = j.get<std::string>();
  for (const auto& [e, n] : names)
    if (s == n) return e;
  std::string opts;
  for (const auto& [e, n] : names) opts += std::string(opts.empty() ? "" : ", ") + n;
  throw ConfigError(path + ": unknown value '" + s + "' (expected one of " + opts + ")");
}

json opt_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json poisson_json(const genmodels::PoissonParams& p) {
  return {{"alpha", p.alpha}, {"eta", p.eta}, {"beta", p.beta}, {"gamma", p.gamma}};
}

json proximity_json(const netcore::ProximitySpec& s) {
  return {{"mode", name_of(kProximity, s.mode)}, {"quantile", s.quantile}};
}

json dgp_json(const genmodels::DgpConfig& d) {
  return {
      {"model", name_of(kModel, d.model)},
      {"n_sellers", d.n_sellers},
      {"n_buyers", d.n_buyers},
      {"sizes", {{"mu", d.sizes.mu}, {"sigma", d.sizes.sigma}, {"year_sigma", d.sizes.year_sigma}}},
      {"geo",
       {{"lat_min", d.geo.lat_min},
        {"lat_max", d.geo.lat_max},
        {"lon_min", d.geo.lon_min},
        {"lon_max", d.geo.lon_max},
        {"towns", d.geo.towns},
        {"town_spread_deg", d.geo.town_spread_deg}}},
      {"proximity", proximity_json(d.proximity)},
      {"transitivity", d.transitivity},
      {"horizon", d.horizon},
      {"lag", d.lag},
      {"first_year", d.first_year},
      {"initial", name_of(kInitial, d.initial)},
      {"poisson", poisson_json(d.poisson)},
      {"balls", {{"beta", d.balls.beta}, {"gamma", d.balls.gamma}}},
      {"logistic", {{"alpha", d.logistic.alpha}, {"delta", d.logistic.delta}, {"scale", d.logistic.scale}}},
      {"lpm",
       {{"theta", d.lpm.theta},
        {"seller_base", d.lpm.seller_base},
        {"seller_elasticity", d.lpm.seller_elasticity},
        {"buyer_base", d.lpm.buyer_base},
        {"buyer_elasticity", d.lpm.buyer_elasticity}}},
      {"instrument",
       {{"destinations", d.instrument.destinations},
        {"exposure_prob", d.instrument.exposure_prob},
        {"share_max", d.instrument.share_max},
        {"fx_sigma", d.instrument.fx_sigma},
        {"diversion", d.instrument.diversion}}},
  };
}

json test_json(const transtest::TestConfig& t) {
  return {{"bins", t.bins},
          {"replicates", t.replicates},
          {"variant", name_of(kVariant, t.variant)},
          {"draw", name_of(kDraw, t.draw)},
          {"anchor", name_of(kAnchor, t.anchor)},
          {"null_model", name_of(kNull, t.null_model)},
          {"resample", t.resample},
          {"fit_tol", t.fit.tol}};
}

json to_object(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  const ingest::Options& io = c.data.ingest;
  j["data"] = {{"transactions", c.data.transactions},
               {"locations", c.data.locations},
               {"dest_exports", c.data.dest_exports},
               {"fx", c.data.fx},
               {"value_floor", io.value_floor},
               {"min_active_years", io.min_active_years},
               {"region", io.region},
               {"proximity", proximity_json(io.proximity)},
               {"max_malformed_fraction", io.max_malformed_fraction}};
  j["test"] = test_json(c.test.test);
  j["test"]["year"] = opt_json(c.test.year);
  const auto& e = c.estimate;
  j["estimate"] = {{"lag", e.sample.lag},
                   {"instrument_country", e.sample.instrument.country},
                   {"clusters", name_of(kClusters, e.sample.clusters)},
                   {"first_year", opt_json(e.first_year)},
                   {"use_instrument", e.ddml.use_instrument},
                   {"folds", e.ddml.folds},
                   {"repetitions", e.ddml.repetitions},
                   {"weak_f", e.ddml.weak_f},
                   {"within_tol", e.ddml.within.tol},
                   {"max_sweeps", e.ddml.within.max_sweeps},
                   {"profile_groups", e.profile_groups}};
  const auto& k = c.calibrate;
  j["calibrate"] = {{"year", opt_json(k.year)},
                    {"theta_hat", opt_json(k.theta_hat)},
                    {"gamma_tol", k.options.gamma_tol},
                    {"damping", k.options.damping},
                    {"theta_tol", k.options.theta_tol},
                    {"gamma_max", k.options.gamma_max},
                    {"max_outer", k.options.max_outer},
                    {"init", poisson_json(k.options.init)},
                    {"grad_tol", k.options.mle.grad_tol},
                    {"max_iter", k.options.mle.max_iter},
                    {"fit_draws", k.fit_draws}};
  const auto& f = c.counterfactual;
  j["counterfactual"] = {{"xi", f.xi},
                         {"draws", f.draws},
                         {"freeze_at_mean", f.freeze_at_mean},
                         {"year", opt_json(f.year)},
                         {"params", f.params ? poisson_json(*f.params) : json(nullptr)},
                         {"calibration", f.calibration},
                         {"tol", f.tol},
                         {"max_iter", f.max_iter}};
  j["montecarlo"] = {{"runs", c.montecarlo.runs}, {"dgp", dgp_json(c.montecarlo.dgp)}};
  j["simulate"] = {{"dgp", dgp_json(c.simulate.dgp)}};
  return j;
}

/// Rejects keys absent from the defaults and values whose JSON type differs.
/// Defaults that are null mark optional fields, checked when read.
void check_shape(const json& user, const json& def, const std::string& path) {
  if (def.is_null()) return;
  if (def.is_object()) {
    if (!user.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, val] : user.items()) {
      const std::string p = path.empty() ? key : path + "." + key;
      if (!def.contains(key)) throw ConfigError(p + ": unknown key");
      check_shape(val, def.at(key), p);
    }
    return;
  }
  const bool ok = (def.is_number() && user.is_number()) || (def.is_boolean() && user.is_boolean()) ||
                  (def.is_string() && user.is_string()) || (def.is_array() && user.is_array());
  if (!ok) throw ConfigError(path + ": expected " + std::string(def.type_name()) + ", got " + user.type_name());
  if (def.is_number_unsigned() && !(user.is_number_unsigned() || (user.is_number_integer() && user.get<long long>() >= 0)))
    throw ConfigError(path + ": expected a non-negative integer");
  if (def.is_number_integer() && !user.is_number_integer()) throw ConfigError(path + ": expected an integer");
  if (def.is_array())
    for (const auto& v : user)
      if (!v.is_string()) throw ConfigError(path + ": expected an array of strings");
}

void merge(json& base, const json& user) {
  for (const auto& [key, val] : user.items()) {
    if (base.contains(key) && base[key].is_object() && val.is_object()) merge(base[key], val);
    else base[key] = val;
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

std::optional<int> get_opt_int(const json& j, const char* key, const std::string& path) {
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer or null");
  return v.get<int>();
}

std::optional<double> get_opt_double(const json& j, const char* key, const std::string& path) {
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number or null");
  return v.get<double>();
}

genmodels::PoissonParams read_poisson(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  check_shape(j, poisson_json({}), path);
  genmodels::PoissonParams p;
  if (j.contains("alpha")) p.alpha = j["alpha"].get<double>();
  if (j.contains("eta")) p.eta = j["eta"].get<double>();
  if (j.contains("beta")) p.beta = j["beta"].get<double>();
  if (j.contains("gamma")) p.gamma = j["gamma"].get<double>();
  return p;
}

netcore::ProximitySpec read_proximity(const json& j, const std::string& path) {
  netcore::ProximitySpec s;
  s.mode = value_of(kProximity, j.at("mode"), path + ".mode");
  s.quantile = get<double>(j, "quantile", path);
  if (!(s.quantile > 0.0 && s.quantile <= 100.0)) throw ConfigError(path + ".quantile: must lie in (0, 100]");
  return s;
}

genmodels::DgpConfig read_dgp(const json& j, const std::string& path) {
  genmodels::DgpConfig d;
  d.model = value_of(kModel, j.at("model"), path + ".model");
  d.n_sellers = get<std::size_t>(j, "n_sellers", path);
  d.n_buyers = get<std::size_t>(j, "n_buyers", path);
  const json& s = j.at("sizes");
  d.sizes = {get<double>(s, "mu", path), get<double>(s, "sigma", path), get<double>(s, "year_sigma", path)};
  const json& g = j.at("geo");
  d.geo = {get<double>(g, "lat_min", path), get<double>(g, "lat_max", path), get<double>(g, "lon_min", path),
           get<double>(g, "lon_max", path), get<std::size_t>(g, "towns", path),
           get<double>(g, "town_spread_deg", path)};
  d.proximity = read_proximity(j.at("proximity"), path + ".proximity");
  d.transitivity = get<bool>(j, "transitivity", path);
  d.horizon = get<std::size_t>(j, "horizon", path);
  d.lag = get<std::size_t>(j, "lag", path);
  d.first_year = get<int>(j, "first_year", path);
  d.initial = value_of(kInitial, j.at("initial"), path + ".initial");
  d.poisson = read_poisson(j.at("poisson"), path + ".poisson");
  d.balls.beta = get<double>(j.at("balls"), "beta", path);
  d.balls.gamma = get<double>(j.at("balls"), "gamma", path);
  const json& l = j.at("logistic");
  d.logistic.alpha = get<double>(l, "alpha", path);
  d.logistic.delta = get<double>(l, "delta", path);
  d.logistic.scale = get<double>(l, "scale", path);
  const json& m = j.at("lpm");
  d.lpm = {get<double>(m, "theta", path), get<double>(m, "seller_base", path),
           get<double>(m, "seller_elasticity", path), get<double>(m, "buyer_base", path),
           get<double>(m, "buyer_elasticity", path)};
  const json& in = j.at("instrument");
  d.instrument.destinations = get<std::vector<std::string>>(in, "destinations", path);
  d.instrument.exposure_prob = get<double>(in, "exposure_prob", path);
  d.instrument.share_max = get<double>(in, "share_max", path);
  d.instrument.fx_sigma = get<double>(in, "fx_sigma", path);
  d.instrument.diversion = get<double>(in, "diversion", path);
  try {
    genmodels::validate(d);
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return d;
}

RunConfig from_object(const json& j) {
  RunConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "");
  c.workers = get<std::size_t>(j, "workers", "");
  c.output_dir = get<std::string>(j, "output_dir", "");

  const json& d = j.at("data");
  c.data.transactions = get<std::string>(d, "transactions", "data");
  c.data.locations = get<std::string>(d, "locations", "data");
  c.data.dest_exports = get<std::string>(d, "dest_exports", "data");
  c.data.fx = get<std::string>(d, "fx", "data");
  c.data.ingest.value_floor = get<double>(d, "value_floor", "data");
  c.data.ingest.min_active_years = get<std::size_t>(d, "min_active_years", "data");
  c.data.ingest.region = get<std::string>(d, "region", "data");
  c.data.ingest.proximity = read_proximity(d.at("proximity"), "data.proximity");
  c.data.ingest.max_malformed_fraction = get<double>(d, "max_malformed_fraction", "data");
  if (c.data.ingest.value_floor < 0.0) throw ConfigError("data.value_floor: must be non-negative");
  if (c.data.ingest.min_active_years == 0) throw ConfigError("data.min_active_years: must be at least 1");

  const json& t = j.at("test");
  c.test.year = get_opt_int(t, "year", "test");
  auto& tc = c.test.test;
  tc.bins = get<std::size_t>(t, "bins", "test");
  tc.replicates = get<std::size_t>(t, "replicates", "test");
  tc.variant = value_of(kVariant, t.at("variant"), "test.variant");
  tc.draw = value_of(kDraw, t.at("draw"), "test.draw");
  tc.anchor = value_of(kAnchor, t.at("anchor"), "test.anchor");
  tc.null_model = value_of(kNull, t.at("null_model"), "test.null_model");
  tc.resample = get<bool>(t, "resample", "test");
  tc.fit.tol = get<double>(t, "fit_tol", "test");
  if (tc.bins < 1) throw ConfigError("test.bins: must be at least 1");
  if (tc.replicates < 1) throw ConfigError("test.replicates: must be at least 1");

  const json& e = j.at("estimate");
  auto& es = c.estimate;
  es.sample.lag = get<std::size_t>(e, "lag", "estimate");
  es.sample.instrument.lag = es.sample.lag;
  es.sample.instrument.country = get<std::string>(e, "instrument_country", "estimate");
  es.sample.clusters = value_of(kClusters, e.at("clusters"), "estimate.clusters");
  es.first_year = get_opt_int(e, "first_year", "estimate");
  es.ddml.use_instrument = get<bool>(e, "use_instrument", "estimate");
  es.sample.with_instrument = es.ddml.use_instrument;
  es.ddml.folds = get<std::size_t>(e, "folds", "estimate");
  es.ddml.repetitions = get<std::size_t>(e, "repetitions", "estimate");
  es.ddml.weak_f = get<double>(e, "weak_f", "estimate");
  es.ddml.within.tol = get<double>(e, "within_tol", "estimate");
  es.ddml.within.max_sweeps = get<std::size_t>(e, "max_sweeps", "estimate");
  es.profile_groups = get<std::size_t>(e, "profile_groups", "estimate");
  if (es.sample.lag < 1) throw ConfigError("estimate.lag: must be at least 1");
  if (es.ddml.folds < 2) throw ConfigError("estimate.folds: must be at least 2");
  if (es.ddml.repetitions < 1) throw ConfigError("estimate.repetitions: must be at least 1");
  if (es.profile_groups < 1) throw ConfigError("estimate.profile_groups: must be at least 1");

  const json& k = j.at("calibrate");
  auto& kc = c.calibrate;
  kc.year = get_opt_int(k, "year", "calibrate");
  kc.theta_hat = get_opt_double(k, "theta_hat", "calibrate");
  kc.options.gamma_tol = get<double>(k, "gamma_tol", "calibrate");
  kc.options.damping = get<double>(k, "damping", "calibrate");
  kc.options.theta_tol = get<double>(k, "theta_tol", "calibrate");
  kc.options.gamma_max = get<double>(k, "gamma_max", "calibrate");
  kc.options.max_outer = get<std::size_t>(k, "max_outer", "calibrate");
  kc.options.init = read_poisson(k.at("init"), "calibrate.init");
  kc.options.mle.grad_tol = get<double>(k, "grad_tol", "calibrate");
  kc.options.mle.max_iter = get<std::size_t>(k, "max_iter", "calibrate");
  kc.fit_draws = get<std::size_t>(k, "fit_draws", "calibrate");
  if (!(kc.options.damping > 0.0 && kc.options.damping <= 1.0))
    throw ConfigError("calibrate.damping: must lie in (0, 1]");
  if (!(kc.options.gamma_tol > 0.0)) throw ConfigError("calibrate.gamma_tol: must be positive");
  if (kc.fit_draws < 50) throw ConfigError("calibrate.fit_draws: at least 50 draws required");

  const json& f = j.at("counterfactual");
  auto& fc = c.counterfactual;
  fc.xi = get<double>(f, "xi", "counterfactual");
  fc.draws = get<std::size_t>(f, "draws", "counterfactual");
  fc.freeze_at_mean = get<bool>(f, "freeze_at_mean", "counterfactual");
  fc.year = get_opt_int(f, "year", "counterfactual");
  if (!f.at("params").is_null()) fc.params = read_poisson(f.at("params"), "counterfactual.params");
  fc.calibration = get<std::string>(f, "calibration", "counterfactual");
  fc.tol = get<double>(f, "tol", "counterfactual");
  fc.max_iter = get<std::size_t>(f, "max_iter", "counterfactual");
  if (!(fc.xi > 0.0)) throw ConfigError("counterfactual.xi: must be positive");
  if (fc.draws < 1) throw ConfigError("counterfactual.draws: must be at least 1");
  if (!(fc.tol > 0.0)) throw ConfigError("counterfactual.tol: must be positive");

  c.montecarlo.runs = get<std::size_t>(j.at("montecarlo"), "runs", "montecarlo");
  if (c.montecarlo.runs < 1) throw ConfigError("montecarlo.runs: must be at least 1");
  c.montecarlo.dgp = read_dgp(j.at("montecarlo").at("dgp"), "montecarlo.dgp");
  c.simulate.dgp = read_dgp(j.at("simulate").at("dgp"), "simulate.dgp");
  return c;
}

json parse_json(std::string_view text) {
  try {
    return text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

std::size_t RunConfig::resolved_workers() const { return workers > 0 ? workers : default_workers(); }

RunConfig parse(std::string_view json_text) {
  const json user = parse_json(json_text);
  json merged = to_object(RunConfig{});
  check_shape(user, merged, "");
  merge(merged, user);
  return from_object(merged);
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void apply_override(std::string& json_text, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json doc = parse_json(json_text);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + key + "': empty path component");
    if (!node->is_object()) throw ConfigError("override '" + key + "': path crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
  json_text = doc.dump();
}

std::string to_json(const RunConfig& c) { return to_object(c).dump(2); }

std::string defaults_json() { return to_json(RunConfig{}); }

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("sha256: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string config_hash(const RunConfig& c) {
  json j = to_object(c);
  j.erase("workers");
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

}  // namespace transnet::config
