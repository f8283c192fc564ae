#pragma once

// Small fixtures shared by the unit tests.

#include <cstdint>
#include <filesystem>
#include <string>

#include "transnet/grid.hpp"
#include "transnet/rng.hpp"

namespace transnet::testing {

/// Bernoulli(p) seller x buyer adjacency.
inline Adjacency random_adjacency(std::size_t rows, std::size_t cols, double p, std::uint64_t seed) {
  Adjacency a(rows, cols);
  CounterEngine rng(seed);
  for (auto& v : a.flat()) v = rng.uniform() < p ? 1 : 0;
  return a;
}

/// Symmetric square adjacency without self-loops.
inline Adjacency random_symmetric(std::size_t n, double p, std::uint64_t seed) {
  Adjacency a(n, n);
  CounterEngine rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform() < p ? 1 : 0;
  return a;
}

/// Symmetric matrix with entries in [0,1) and a zero diagonal.
inline Matrix random_proximity(std::size_t n, std::uint64_t seed) {
  Matrix r(n, n);
  CounterEngine rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) r(i, k) = r(k, i) = rng.uniform();
  return r;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("transnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace transnet::testing
