// transnet command-line tool: one subcommand per analysis step.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "transnet/commands.hpp"
#include "transnet/config.hpp"

namespace {

constexpr const char* kExitCodes =
    "Exit codes: 0 ok, 1 internal error, 2 configuration or usage, 3 input data,\n"
    "4 numeric/domain/size failure, 5 convergence or calibration failure.\n"
    "TRANSNET_THREADS sets the default worker count.\n";

const char* describe(const std::string& name) {
  if (name == "stats") return "ingest transaction data and report network statistics";
  if (name == "test") return "cross-sectional transitivity test on one year";
  if (name == "estimate") return "DDML-IV panel estimate of the common-support effect";
  if (name == "calibrate") return "fit the generalized Poisson link model";
  if (name == "counterfactual") return "trade-cost counterfactual with and without transitivity";
  if (name == "montecarlo") return "size/power Monte Carlo of the transitivity test";
  if (name == "simulate") return "write a synthetic panel in the ingestion format";
  return "";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw transnet::ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Replicate loops allocate and free multi-megabyte matrices; keep them on the
  // heap instead of mapping and zeroing fresh pages each time.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"transnet: transitivity analysis of seller-buyer networks"};
  app.set_version_flag("--version", transnet::commands::version());
  app.require_subcommand(1);
  app.footer(std::string(kExitCodes) + "\nDefault configuration (keys accepted by --config and --set):\n" +
             transnet::config::defaults_json());

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string out_dir;
  bool print_config = false;

  for (const auto& name : transnet::commands::names()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a configuration value, e.g. test.replicates=200")
        ->allow_extra_args(false);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("-w,--workers", workers, "worker threads (0 = default)");
    sub->add_option("-o,--out", out_dir, "output directory");
    sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : transnet::commands::kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  CLI::App* sub = app.get_subcommands().front();
  transnet::config::RunConfig cfg;
  try {
    std::string text = config_path.empty() ? "{}" : read_file(config_path);
    for (const auto& o : overrides) transnet::config::apply_override(text, o);
    cfg = transnet::config::parse(text);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--workers")) cfg.workers = workers;
    if (sub->count("--out")) cfg.output_dir = out_dir;
  } catch (const transnet::Error& e) {
    std::cerr << "error (" << transnet::to_string(e.kind()) << "): " << e.what() << "\n";
    return transnet::commands::exit_code(e.kind());
  }
  if (print_config) {
    std::cout << transnet::config::to_json(cfg) << "\n";
    return 0;
  }
  return transnet::commands::run_guarded(command, cfg, std::cerr);
}
