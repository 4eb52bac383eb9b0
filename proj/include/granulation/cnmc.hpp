#ifndef GRANULATION_CNMC_HPP_
#define GRANULATION_CNMC_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "granulation/moments.hpp"
#include "granulation/parallel.hpp"

namespace granulation::cnmc {

using Rng = std::mt19937_64;

struct Particle {
  double p = 1.0;  // total mass
  double s = 0.0;  // drug mass, 0 <= s <= p
};

/// Constant-number population standing in for f(p, s). The N particles
/// represent a physical number concentration `concentration`; each merge
/// grows the represented volume instead of shrinking N.
struct Ensemble {
  std::vector<Particle> particles;
  double concentration = 1.0;
  double time = 0.0;

  std::size_t size() const { return particles.size(); }
};

Ensemble init_monodisperse(std::size_t n, double p0, double s0, double c0);

/// M_ij = concentration * mean_k(p_k^i s_k^j).
MomentState ensemble_moments(const Ensemble& ensemble);

/// Mean time between events: 2 / ((N-1) k0 C), so the expected per-event
/// drop C/N reproduces dC/dt = -k0 C^2 / 2.
double event_interval(const Ensemble& ensemble, const KernelSpec& kernel);

/**
 * One coagulation event: a pair chosen by acceptance-rejection on the kernel
 * (always accepted for the constant kernel) merges into (p1+p2, s1+s2); one of
 * the N-1 survivors, the merged particle included, is duplicated uniformly to
 * refill slot N. The concentration is rescaled so that the total-mass density
 * C * mean(p) is unchanged. Returns the time increment.
 */
double coagulation_event(Ensemble& ensemble, const KernelSpec& kernel, Rng& rng);

struct Snapshot {
  double time = 0.0;
  MomentState moments;
};

/// Event loop up to t_end. A snapshot at each requested output time (ascending,
/// within [0, t_end]) holds the population after every event at or before it.
std::vector<Snapshot> run_batch(Ensemble& ensemble, const KernelSpec& kernel, double t_end,
                                std::span<const double> output_times, Rng& rng);

/// Snapshots from independent replicates, replicate r seeded with seeds[r].
/// Replicates run concurrently under Exec::parallel.
std::vector<std::vector<Snapshot>> run_replicates(const Ensemble& initial, const KernelSpec& kernel,
                                                  double t_end,
                                                  std::span<const double> output_times,
                                                  std::span<const std::uint64_t> seeds,
                                                  Exec exec = Exec::parallel);

}  // namespace granulation::cnmc

#endif  // GRANULATION_CNMC_HPP_
