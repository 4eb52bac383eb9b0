#include "granulation/moments.hpp"

#include <cmath>
#include <sstream>

namespace granulation {

namespace {

constexpr double binomial(int n, int k) {
  // n <= 2 for the tracked moments
  if (k < 0 || k > n) return 0.0;
  if (k == 0 || k == n) return 1.0;
  return static_cast<double>(n);
}

// Steps needed to cover `duration` with step dt; rejects non-multiples.
long step_count(double dt, double duration) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw InvalidArgument("integration step must be positive");
  if (duration < 0.0 || !std::isfinite(duration))
    throw InvalidArgument("integration horizon must be non-negative");
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "horizon " << duration << " is not a multiple of dt " << dt;
    throw InvalidArgument(msg.str());
  }
  return static_cast<long>(rounded);
}

MomentState axpy(const MomentState& x, double a, const MomentDerivative& d) {
  MomentState out;
  for (std::size_t k = 0; k < 9; ++k) out.values[k] = x.values[k] + a * d.values[k];
  return out;
}

bool leq(double a, double b, double scale, double rel_tol) {
  return a <= b + rel_tol * scale;
}

std::string describe_missing(unsigned missing) {
  static constexpr std::array<const char*, 7> names = {
      "non-negativity", "m01 <= m10", "m02 <= m11 <= m20", "m12 <= m21",
      "m11^2 <= m20 m02", "m10^2 <= m00 m20", "m01^2 <= m00 m02"};
  std::string out;
  for (std::size_t b = 0; b < names.size(); ++b) {
    if (missing & (1u << b)) {
      if (!out.empty()) out += ", ";
      out += names[b];
    }
  }
  return out;
}

}  // namespace

void FeedSpec::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw InvalidArgument("feed: alpha must be >= 0");
  if (!(c_f >= 0.0) || !std::isfinite(c_f))
    throw InvalidArgument("feed: c_f must be >= 0");
  if (!(s_f >= 0.0) || !(s_f <= p_f) || !std::isfinite(p_f))
    throw InvalidArgument("feed: require 0 <= s_f <= p_f");
}

void KernelSpec::validate() const {
  if (!(k0 > 0.0) || !std::isfinite(k0))
    throw InvalidArgument("kernel: k0 must be > 0");
}

IntegrationError::IntegrationError(double time, const std::string& what)
    : std::runtime_error(what), time_(time) {}

unsigned satisfied_invariants(const MomentState& x, double rel_tol) {
  unsigned bits = 0;
  bool finite = true;
  bool nonneg = true;
  for (double v : x.values) {
    finite = finite && std::isfinite(v);
    nonneg = nonneg && v >= 0.0;
  }
  if (!finite) return 0;
  if (nonneg) bits |= kFiniteNonNegative;

  if (leq(x.m01(), x.m10(), x.m10(), rel_tol)) bits |= kOrderDrug;
  if (leq(x.m02(), x.m11(), x.m11(), rel_tol) && leq(x.m11(), x.m20(), x.m20(), rel_tol))
    bits |= kOrderSecond;
  if (leq(x.m12(), x.m21(), x.m21(), rel_tol)) bits |= kOrderThird;

  const double mixed = x.m20() * x.m02();
  if (leq(x.m11() * x.m11(), mixed, mixed, rel_tol)) bits |= kSchwarzMixed;
  const double mass = x.m00() * x.m20();
  if (leq(x.m10() * x.m10(), mass, mass, rel_tol)) bits |= kSchwarzMass;
  const double drug = x.m00() * x.m02();
  if (leq(x.m01() * x.m01(), drug, drug, rel_tol)) bits |= kSchwarzDrug;
  return bits;
}

MomentState feed_moments(const FeedSpec& feed) {
  feed.validate();
  MomentState out;
  for (std::size_t k = 0; k < kMomentOrders.size(); ++k) {
    const auto [i, j] = kMomentOrders[k];
    out.values[k] = feed.c_f * std::pow(feed.p_f, i) * std::pow(feed.s_f, j);
  }
  return out;
}

MomentDerivative coagulation_rate_binomial(const MomentState& x, const KernelSpec& kernel) {
  MomentDerivative d;
  const double half_k = 0.5 * kernel.k0;
  for (std::size_t k = 0; k < kMomentOrders.size(); ++k) {
    const auto [i, j] = kMomentOrders[k];
    double birth = 0.0;
    for (int a = 0; a <= i; ++a)
      for (int b = 0; b <= j; ++b)
        birth += binomial(i, a) * binomial(j, b) * x(a, b) * x(i - a, j - b);
    d.values[k] = half_k * birth - kernel.k0 * x.values[k] * x.m00();
  }
  return d;
}

MomentDerivative coagulation_rate(const MomentState& x, const KernelSpec& kernel) {
  // binomial sums with the self-pairing death term cancelled
  const double k0 = kernel.k0;
  MomentDerivative d;
  d.values[0] = -0.5 * k0 * x.m00() * x.m00();
  d.values[1] = 0.0;
  d.values[2] = 0.0;
  d.values[3] = k0 * x.m10() * x.m01();
  d.values[4] = k0 * x.m10() * x.m10();
  d.values[5] = k0 * x.m01() * x.m01();
  d.values[6] = k0 * (2.0 * x.m01() * x.m11() + x.m10() * x.m02());
  d.values[7] = k0 * (2.0 * x.m10() * x.m11() + x.m01() * x.m20());
  d.values[8] = k0 * (2.0 * x.m01() * x.m21() + x.m02() * x.m20() + 2.0 * x.m10() * x.m12() +
                      2.0 * x.m11() * x.m11());
  return d;
}

MomentDerivative flow_rate(const MomentState& x, const FeedSpec& feed) {
  MomentDerivative d;
  if (feed.alpha == 0.0) return d;
  double p_pow[3] = {1.0, feed.p_f, feed.p_f * feed.p_f};
  double s_pow[3] = {1.0, feed.s_f, feed.s_f * feed.s_f};
  for (std::size_t k = 0; k < kMomentOrders.size(); ++k) {
    const auto [i, j] = kMomentOrders[k];
    d.values[k] = feed.alpha * (feed.c_f * p_pow[i] * s_pow[j] - x.values[k]);
  }
  return d;
}

MomentDerivative moment_rhs(const MomentState& x, const FeedSpec& feed,
                            const KernelSpec& kernel) {
  MomentDerivative d = coagulation_rate(x, kernel);
  const MomentDerivative f = flow_rate(x, feed);
  for (std::size_t k = 0; k < 9; ++k) d.values[k] += f.values[k];
  return d;
}

FeedSchedule FeedSchedule::constant(const FeedSpec& feed) {
  return FeedSchedule{1.0, {feed}};
}

const FeedSpec& FeedSchedule::at(double t) const {
  if (segments.empty()) throw InvalidArgument("feed schedule is empty");
  // small slack so a sample landing exactly on a boundary picks the later segment
  const double pos = t / segment_length + 1e-9;
  const auto idx = pos <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(pos);
  return segments[std::min(idx, segments.size() - 1)];
}

MomentState rk4_step(const MomentState& x, const FeedSpec& feed, const KernelSpec& kernel,
                     double dt) {
  const MomentDerivative k1 = moment_rhs(x, feed, kernel);
  const MomentDerivative k2 = moment_rhs(axpy(x, 0.5 * dt, k1), feed, kernel);
  const MomentDerivative k3 = moment_rhs(axpy(x, 0.5 * dt, k2), feed, kernel);
  const MomentDerivative k4 = moment_rhs(axpy(x, dt, k3), feed, kernel);
  MomentState out;
  for (std::size_t k = 0; k < 9; ++k)
    out.values[k] = x.values[k] + dt / 6.0 *
                                      (k1.values[k] + 2.0 * k2.values[k] +
                                       2.0 * k3.values[k] + k4.values[k]);
  return out;
}

MomentState advance(const MomentState& state, const FeedSpec& feed, const KernelSpec& kernel,
                    double dt, double duration) {
  const long n = step_count(dt, duration);
  MomentState x = state;
  for (long s = 0; s < n; ++s) x = rk4_step(x, feed, kernel, dt);
  return x;
}

Trajectory integrate(const MomentState& initial, const FeedSchedule& schedule,
                     const KernelSpec& kernel, double dt, double t_end) {
  kernel.validate();
  for (const auto& f : schedule.segments) f.validate();
  if (!(t_end > 0.0)) throw InvalidArgument("t_end must be positive");
  const long n = step_count(dt, t_end);

  // Only invariants the caller's state starts with are enforced: non-realizable
  // inputs (such as the published initial vector) are still integrable.
  const unsigned required = satisfied_invariants(initial) | kFiniteNonNegative;

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(n) + 1);
  traj.states.reserve(static_cast<std::size_t>(n) + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(initial);

  MomentState x = initial;
  for (long s = 0; s < n; ++s) {
    const double t0 = static_cast<double>(s) * dt;
    x = rk4_step(x, schedule.at(t0), kernel, dt);
    const double t1 = static_cast<double>(s + 1) * dt;
    const unsigned missing = required & ~satisfied_invariants(x);
    if (missing) {
      std::ostringstream msg;
      msg << "moment invariant violated at t=" << t1 << " (" << describe_missing(missing)
          << "); reduce dt";
      throw IntegrationError(t1, msg.str());
    }
    traj.times.push_back(t1);
    traj.states.push_back(x);
  }
  return traj;
}

Summary summary(const MomentState& x) {
  if (!(x.m00() > kMinNumberDensity))
    throw DegeneratePopulation("summary: m00 <= 1e-12, ratios undefined");
  return {x.m01() / x.m00(), x.m10() / x.m00(), x.m02() / x.m00()};
}

MomentState reference_initial_state() {
  return MomentState{{1.9, 2.0, 0.2, 0.2, 2.3, 0.02, 0.03, 0.3, 0.05}};
}

}  // namespace granulation
