#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "transnet/commands.hpp"
#include "transnet/config.hpp"
#include "transnet/csv.hpp"

using namespace transnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& p) {
  csv::Reader r(p);
  std::size_t n = 0;
  while (r.next()) ++n;
  return n;
}

/// A small simulated panel on disk shared by every test in this file.
class Commands : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root = new fs::path(transnet::testing::scratch_dir("commands"));
    config::RunConfig sim = config::parse(R"({"simulate": {"dgp": {"n_sellers": 60, "n_buyers": 100, "horizon": 4,
        "initial": "equilibrium"}}})");
    sim.seed = 21;
    sim.output_dir = (*root / "data").string();
    commands::run("simulate", sim, std::cerr);
  }
  static void TearDownTestSuite() { delete root; }

  static config::RunConfig base_config(const std::string& out) {
    const fs::path d = *root / "data";
    json j = {{"seed", 5},
              {"data",
               {{"transactions", (d / "transactions.csv").string()},
                {"locations", (d / "locations.csv").string()},
                {"dest_exports", (d / "dest_exports.csv").string()},
                {"fx", (d / "fx.csv").string()},
                {"value_floor", 0},
                {"min_active_years", 1}}},
              {"test", {{"replicates", 100}}},
              {"estimate", {{"folds", 2}, {"repetitions", 1}, {"profile_groups", 5}}},
              {"counterfactual", {{"draws", 4}, {"params", {{"alpha", 0.83}, {"eta", 0.19}, {"beta", 0.35}, {"gamma", 20}}}}},
              {"montecarlo", {{"runs", 2}, {"dgp", {{"n_sellers", 30}, {"n_buyers", 40}}}}}};
    config::RunConfig c = config::parse(j.dump());
    c.output_dir = (*root / out).string();
    return c;
  }

  static fs::path* root;
};

fs::path* Commands::root = nullptr;

}  // namespace

TEST_F(Commands, SimulateThenStatsReconciles) {
  const config::RunConfig c = base_config("stats");
  ASSERT_EQ(commands::run_guarded("stats", c, std::cerr), commands::kOk);
  const json rep = json::parse(slurp(fs::path(c.output_dir) / "ingest_report.json"));
  const std::size_t tx_rows = data_rows(*root / "data" / "transactions.csv");
  EXPECT_EQ(rep.at("raw_rows").get<std::size_t>(), tx_rows);
  EXPECT_EQ(rep.at("kept_rows").get<std::size_t>(), tx_rows);
  EXPECT_EQ(rep.at("sellers_kept").get<std::size_t>(), data_rows(*root / "data" / "locations.csv"));
  EXPECT_EQ(rep.at("dest_export_unmatched").get<std::size_t>(), 0u);
  const json st = json::parse(slurp(fs::path(c.output_dir) / "stats.json"));
  std::size_t links = 0;
  for (const auto& y : st.at("years")) links += y.at("active_links").get<std::size_t>();
  EXPECT_EQ(links, tx_rows);
}

TEST_F(Commands, ManifestHashesMatchFiles) {
  const config::RunConfig c = base_config("manifest");
  ASSERT_EQ(commands::run_guarded("stats", c, std::cerr), commands::kOk);
  const json m = json::parse(slurp(fs::path(c.output_dir) / "manifest.json"));
  EXPECT_EQ(m.at("command"), "stats");
  EXPECT_EQ(m.at("seed"), 5);
  EXPECT_EQ(m.at("config_hash"), config::config_hash(c));
  EXPECT_EQ(m.at("outputs").size(), 3u);
  for (const auto& f : m.at("outputs"))
    EXPECT_EQ(f.at("sha256"), config::sha256_hex(slurp(fs::path(c.output_dir) / f.at("file").get<std::string>())));
  EXPECT_FALSE(m.at("config").contains("workers"));
  EXPECT_FALSE(m.at("config").contains("output_dir"));
}

TEST_F(Commands, RerunsAreByteIdenticalAcrossWorkers) {
  for (const std::string cmd : {"stats", "test", "estimate", "calibrate", "counterfactual", "montecarlo"}) {
    config::RunConfig a = base_config("rerun_a_" + cmd), b = base_config("rerun_b_" + cmd);
    a.workers = 1;
    b.workers = 3;
    const auto ra = commands::run(cmd, a, std::cerr);
    const auto rb = commands::run(cmd, b, std::cerr);
    ASSERT_EQ(ra.files.size(), rb.files.size()) << cmd;
    for (std::size_t k = 0; k < ra.files.size(); ++k) {
      EXPECT_EQ(ra.files[k].name, rb.files[k].name);
      EXPECT_EQ(ra.files[k].sha256, rb.files[k].sha256) << cmd << " " << ra.files[k].name;
    }
    EXPECT_EQ(slurp(fs::path(a.output_dir) / "manifest.json"), slurp(fs::path(b.output_dir) / "manifest.json"))
        << cmd;
  }
}

TEST_F(Commands, SeedChangesStochasticOutputs) {
  config::RunConfig a = base_config("seed_a"), b = base_config("seed_b");
  b.seed = 6;
  const auto ra = commands::run("test", a, std::cerr);
  const auto rb = commands::run("test", b, std::cerr);
  EXPECT_NE(ra.files[1].sha256, rb.files[1].sha256);  // null_draws.csv
}

TEST_F(Commands, ExitCodes) {
  std::ostringstream log;
  config::RunConfig c = base_config("exit");
  EXPECT_EQ(commands::run_guarded("nonsense", c, log), commands::kConfig);
  config::RunConfig missing = c;
  missing.data.transactions = (*root / "absent.csv").string();
  EXPECT_EQ(commands::run_guarded("stats", missing, log), commands::kInput);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "ingest_report.json"));
  config::RunConfig noparams = c;
  noparams.counterfactual.params.reset();
  EXPECT_EQ(commands::run_guarded("counterfactual", noparams, log), commands::kConfig);
  config::RunConfig badparams = c;
  badparams.counterfactual.params->alpha = -1;
  EXPECT_EQ(commands::run_guarded("counterfactual", badparams, log), commands::kNumeric);
  config::RunConfig unreachable = c;
  unreachable.calibrate.theta_hat = 1e9;
  unreachable.calibrate.options.gamma_max = 50;
  EXPECT_EQ(commands::run_guarded("calibrate", unreachable, log), commands::kConvergence);
  EXPECT_NE(log.str().find("error ("), std::string::npos);
}

TEST(ExitCodeTable, EveryKindIsMapped) {
  EXPECT_EQ(commands::exit_code(ErrorKind::config), 2);
  EXPECT_EQ(commands::exit_code(ErrorKind::input), 3);
  EXPECT_EQ(commands::exit_code(ErrorKind::input_domain), 4);
  EXPECT_EQ(commands::exit_code(ErrorKind::size), 4);
  EXPECT_EQ(commands::exit_code(ErrorKind::numeric), 4);
  EXPECT_EQ(commands::exit_code(ErrorKind::fit), 4);
  EXPECT_EQ(commands::exit_code(ErrorKind::convergence), 5);
  EXPECT_EQ(commands::exit_code(ErrorKind::calibration), 5);
  EXPECT_EQ(commands::names().size(), 7u);
}
