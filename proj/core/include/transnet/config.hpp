#pragma once

// Run configuration: one JSON document with a block per command. Every field
// has a default; unknown keys and wrong types are rejected before any work.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "transnet/calib.hpp"
#include "transnet/genmodels.hpp"
#include "transnet/ingest.hpp"
#include "transnet/panel.hpp"
#include "transnet/transtest.hpp"

namespace transnet::config {

struct DataBlock {
  std::string transactions;
  std::string locations;
  std::string dest_exports;
  std::string fx;
  ingest::Options ingest;
};

struct TestBlock {
  std::optional<int> year;  // calendar year of the cross-section; last year when unset
  transtest::TestConfig test;
};

struct EstimateBlock {
  panel::SampleSpec sample;  // instrument.country empty -> first destination
  panel::DdmlConfig ddml;
  std::optional<int> first_year;
  std::size_t profile_groups = 100;
};

struct CalibrateBlock {
  std::optional<int> year;          // cross-section year; last outcome year when unset
  std::optional<double> theta_hat;  // overrides the panel estimate
  calib::CalibrationOptions options;
  std::size_t fit_draws = 50;
};

struct CounterfactualBlock {
  double xi = 1.0 / 0.9;
  std::size_t draws = 250;
  bool freeze_at_mean = false;
  std::optional<int> year;                           // covariate year; last when unset
  std::optional<genmodels::PoissonParams> params;    // explicit parameters
  std::string calibration;                           // or a calibration.json to read them from
  double tol = 1e-10;
  std::size_t max_iter = 500;
};

struct MonteCarloBlock {
  std::size_t runs = 500;
  genmodels::DgpConfig dgp;
};

struct SimulateBlock {
  genmodels::DgpConfig dgp;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0 -> TRANSNET_THREADS or hardware concurrency
  std::string output_dir = "out";
  DataBlock data;
  TestBlock test;
  EstimateBlock estimate;
  CalibrateBlock calibrate;
  CounterfactualBlock counterfactual;
  MonteCarloBlock montecarlo;
  SimulateBlock simulate;

  std::size_t resolved_workers() const;
};

/// Parses a JSON document on top of the defaults. Throws ConfigError on syntax
/// errors, unknown keys, wrong types or invalid enum names and values.
RunConfig parse(std::string_view json_text);
RunConfig load(const std::string& path);

/// Applies "a.b.c=value" (value parsed as JSON, else taken as a string).
void apply_override(std::string& json_text, std::string_view assignment);

/// Fully resolved configuration as sorted, indented JSON.
std::string to_json(const RunConfig& c);
/// Defaults as JSON, for --help and documentation.
std::string defaults_json();

/// SHA-256 (hex) of the resolved semantic configuration. workers and
/// output_dir are excluded because they do not change results.
std::string config_hash(const RunConfig& c);

/// SHA-256 (hex) of raw bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace transnet::config
