#include "granulation/cnmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace granulation::cnmc {

namespace {

// Kernel value relative to its majorant; acceptance-rejection accepts a
// candidate pair with this probability.
double acceptance_ratio(const KernelSpec& kernel, const Particle&, const Particle&) {
  switch (kernel.variant) {
    case KernelVariant::constant: return 1.0;
  }
  return 1.0;
}

double total_mass(const Ensemble& e) {
  return std::accumulate(e.particles.begin(), e.particles.end(), 0.0,
                         [](double acc, const Particle& q) { return acc + q.p; });
}

}  // namespace

Ensemble init_monodisperse(std::size_t n, double p0, double s0, double c0) {
  if (n < 2) throw InvalidArgument("cnmc: need at least two particles");
  if (!(p0 > 0.0) || !(s0 >= 0.0) || !(s0 <= p0))
    throw InvalidArgument("cnmc: require p0 > 0 and 0 <= s0 <= p0");
  if (!(c0 > 0.0)) throw InvalidArgument("cnmc: concentration must be positive");
  Ensemble e;
  e.particles.assign(n, Particle{p0, s0});
  e.concentration = c0;
  e.time = 0.0;
  return e;
}

MomentState ensemble_moments(const Ensemble& e) {
  MomentState m;
  for (const Particle& q : e.particles) {
    const double p2 = q.p * q.p;
    const double s2 = q.s * q.s;
    m.values[0] += 1.0;
    m.values[1] += q.p;
    m.values[2] += q.s;
    m.values[3] += q.p * q.s;
    m.values[4] += p2;
    m.values[5] += s2;
    m.values[6] += q.p * s2;
    m.values[7] += p2 * q.s;
    m.values[8] += p2 * s2;
  }
  const double scale = e.concentration / static_cast<double>(e.size());
  for (double& v : m.values) v *= scale;
  return m;
}

double event_interval(const Ensemble& e, const KernelSpec& kernel) {
  const auto n = static_cast<double>(e.size());
  return 2.0 / ((n - 1.0) * kernel.k0 * e.concentration);
}

double coagulation_event(Ensemble& e, const KernelSpec& kernel, Rng& rng) {
  const std::size_t n = e.size();
  if (n < 2) throw InvalidArgument("cnmc: need at least two particles");
  const double dt = event_interval(e, kernel);

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t i = 0;
  std::size_t j = 0;
  while (true) {
    i = first(rng);
    j = second(rng);
    if (j >= i) ++j;
    const double ratio = acceptance_ratio(kernel, e.particles[i], e.particles[j]);
    if (ratio >= 1.0 || unit(rng) < ratio) break;
  }

  const double mass_before = total_mass(e);
  e.particles[i].p += e.particles[j].p;
  e.particles[i].s += e.particles[j].s;
  // slot j is now empty; refill it with a copy of a random survivor
  std::size_t d = second(rng);
  if (d >= j) ++d;
  e.particles[j] = e.particles[d];

  e.concentration *= mass_before / (mass_before + e.particles[j].p);
  e.time += dt;
  return dt;
}

std::vector<Snapshot> run_batch(Ensemble& e, const KernelSpec& kernel, double t_end,
                                std::span<const double> output_times, Rng& rng) {
  kernel.validate();
  if (!(t_end >= 0.0)) throw InvalidArgument("run_batch: t_end must be >= 0");
  if (!std::is_sorted(output_times.begin(), output_times.end()))
    throw InvalidArgument("run_batch: output times must be ascending");
  for (double t : output_times)
    if (t < e.time || t > t_end) throw InvalidArgument("run_batch: output time outside run");

  std::vector<Snapshot> out;
  out.reserve(output_times.size());
  std::size_t next = 0;
  while (e.time < t_end) {
    const double dt = event_interval(e, kernel);
    while (next < output_times.size() && output_times[next] < e.time + dt)
      out.push_back({output_times[next++], ensemble_moments(e)});
    coagulation_event(e, kernel, rng);
  }
  while (next < output_times.size()) out.push_back({output_times[next++], ensemble_moments(e)});
  return out;
}

std::vector<std::vector<Snapshot>> run_replicates(const Ensemble& initial,
                                                  const KernelSpec& kernel, double t_end,
                                                  std::span<const double> output_times,
                                                  std::span<const std::uint64_t> seeds,
                                                  Exec exec) {
  std::vector<std::vector<Snapshot>> results(seeds.size());
  for_each_index(seeds.size(), exec, [&](std::size_t r) {
    Ensemble e = initial;
    Rng rng(seeds[r]);
    results[r] = run_batch(e, kernel, t_end, output_times, rng);
  });
  return results;
}

}  // namespace granulation::cnmc
