#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace transnet {

// Counter-based random numbers. Every random quantity is a pure function of
// (key, counter), so replicates, draws and dyads can be evaluated in any order
// or on any number of workers and still produce the same values.

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child key from a parent key and a list of integer tags.
constexpr std::uint64_t derive_key(std::uint64_t key, std::initializer_list<std::uint64_t> tags) noexcept {
  for (std::uint64_t t : tags) key = mix64(key ^ mix64(t + 0x632be59bd9b4e019ULL));
  return key;
}

constexpr std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key ^ mix64(counter));
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(counter_bits(key, counter) >> 11) * 0x1.0p-53;
}

/// UniformRandomBitGenerator over a keyed counter stream, for use with the
/// standard distributions when a sequential stream is more convenient.
class CounterEngine {
 public:
  using result_type = std::uint64_t;
  explicit CounterEngine(std::uint64_t key, std::uint64_t start = 0) noexcept
      : key_(key), counter_(start) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return counter_bits(key_, counter_++); }
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace transnet
