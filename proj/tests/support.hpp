#ifndef GRANULATION_TESTS_SUPPORT_HPP_
#define GRANULATION_TESTS_SUPPORT_HPP_

#include <cmath>
#include <random>

#include "granulation/moments.hpp"

namespace test {

/// Moments of a random discrete population with 0 <= s <= p, so every
/// realizability invariant holds by construction.
inline granulation::MomentState random_realizable_state(std::mt19937_64& rng, int atoms = 5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  granulation::MomentState m;
  for (int a = 0; a < atoms; ++a) {
    const double w = 0.1 + u(rng);
    const double p = 0.2 + 2.0 * u(rng);
    const double s = p * u(rng);
    for (std::size_t k = 0; k < 9; ++k)
      m.values[k] += w * std::pow(p, granulation::kMomentOrders[k][0]) *
                     std::pow(s, granulation::kMomentOrders[k][1]);
  }
  return m;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace test

#endif  // GRANULATION_TESTS_SUPPORT_HPP_
