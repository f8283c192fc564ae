#include "transnet/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "transnet/errors.hpp"
#include "transnet/parallel.hpp"

namespace transnet {

double CounterEngine::normal() noexcept {
  // Box-Muller, one variate per call; u1 is shifted off zero.
  const double u1 = (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t default_workers() {
  if (const char* env = std::getenv("TRANSNET_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::input_domain: return "input_domain";
    case ErrorKind::size: return "size";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::config: return "config";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::input: return "input";
    case ErrorKind::fit: return "fit";
    case ErrorKind::calibration: return "calibration";
  }
  return "unknown";
}

}  // namespace transnet
