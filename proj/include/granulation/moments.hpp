#ifndef GRANULATION_MOMENTS_HPP_
#define GRANULATION_MOMENTS_HPP_

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace granulation {

/// Index pairs (i, j) of the tracked mixed moments M_ij, in state-vector order.
inline constexpr std::array<std::array<int, 2>, 9> kMomentOrders = {{
    {0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {1, 2}, {2, 1}, {2, 2}}};

/// Position of M_ij inside MomentState::values, or -1 if (i, j) is not tracked.
constexpr int moment_slot(int i, int j) {
  for (std::size_t k = 0; k < kMomentOrders.size(); ++k)
    if (kMomentOrders[k][0] == i && kMomentOrders[k][1] == j)
      return static_cast<int>(k);
  return -1;
}

/**
 * The nine mixed moments M_ij = ∫∫ p^i s^j f(p,s) dp ds of the bivariate
 * (total mass p, drug mass s) particle density, ordered as kMomentOrders.
 */
struct MomentState {
  std::array<double, 9> values{};

  double& operator()(int i, int j) { return values[moment_slot(i, j)]; }
  double operator()(int i, int j) const { return values[moment_slot(i, j)]; }

  double m00() const { return values[0]; }
  double m10() const { return values[1]; }
  double m01() const { return values[2]; }
  double m11() const { return values[3]; }
  double m20() const { return values[4]; }
  double m02() const { return values[5]; }
  double m12() const { return values[6]; }
  double m21() const { return values[7]; }
  double m22() const { return values[8]; }

  friend bool operator==(const MomentState&, const MomentState&) = default;
};

/// Time derivative of a MomentState.
struct MomentDerivative {
  std::array<double, 9> values{};

  double operator()(int i, int j) const { return values[moment_slot(i, j)]; }
};

/// Continuous-flow feed: inflow/outflow rate alpha, feed number concentration
/// c_f and the monodisperse feed particle (p_f, s_f). s_f is the manipulated
/// variable.
struct FeedSpec {
  double alpha = 0.0;
  double c_f = 0.0;
  double p_f = 1.0;
  double s_f = 0.0;

  /// Throws InvalidArgument unless alpha >= 0, c_f >= 0 and 0 <= s_f <= p_f.
  void validate() const;
};

enum class KernelVariant { constant };

struct KernelSpec {
  KernelVariant variant = KernelVariant::constant;
  double k0 = 0.06;

  void validate() const;
};

/// Bad input to any operation in this library.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ratio requested on a population with (numerically) zero number density.
class DegeneratePopulation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A MomentState invariant broke during integration (usually dt too large).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(double time, const std::string& what);
  double time() const { return time_; }

 private:
  double time_;
};

/// Realizability conditions for a moment vector, as bit flags.
enum InvariantBits : unsigned {
  kFiniteNonNegative = 1u << 0,
  kOrderDrug = 1u << 1,           // m01 <= m10
  kOrderSecond = 1u << 2,         // m02 <= m11 <= m20
  kOrderThird = 1u << 3,          // m12 <= m21
  kSchwarzMixed = 1u << 4,        // m11^2 <= m20 m02
  kSchwarzMass = 1u << 5,         // m10^2 <= m00 m20
  kSchwarzDrug = 1u << 6,         // m01^2 <= m00 m02
  kAllInvariants = (1u << 7) - 1u,
};

/// Bitmask of the invariants `state` satisfies, with relative slack `rel_tol`.
unsigned satisfied_invariants(const MomentState& state, double rel_tol = 1e-9);

/// Moments of the monodisperse feed: entry (i,j) = c_f p_f^i s_f^j.
MomentState feed_moments(const FeedSpec& feed);

/// Coagulation part of the moment equations for the constant kernel:
/// (k0/2) sum_{a<=i,b<=j} C(i,a) C(j,b) M_ab M_{i-a,j-b} - k0 M_ij M_00.
/// Evaluated term by term from the binomial sums.
MomentDerivative coagulation_rate_binomial(const MomentState& state, const KernelSpec& kernel);

/// Same closure with the sums expanded by hand (the hot path).
MomentDerivative coagulation_rate(const MomentState& state, const KernelSpec& kernel);

/// Flow part: alpha (c_f p_f^i s_f^j - M_ij).
MomentDerivative flow_rate(const MomentState& state, const FeedSpec& feed);

/// Full right-hand side: coagulation plus continuous feed/withdrawal.
MomentDerivative moment_rhs(const MomentState& state, const FeedSpec& feed,
                            const KernelSpec& kernel);

/// Piecewise-constant feed held for `segment_length` per entry; the last entry
/// stays in force past the end of the list.
struct FeedSchedule {
  double segment_length = 1.0;
  std::vector<FeedSpec> segments;

  static FeedSchedule constant(const FeedSpec& feed);
  const FeedSpec& at(double t) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MomentState> states;
};

/// One fixed RK4 step of length dt under a constant feed.
MomentState rk4_step(const MomentState& state, const FeedSpec& feed,
                     const KernelSpec& kernel, double dt);

/// Advance `state` by `duration` (a multiple of dt) under a constant feed,
/// without storing intermediate samples or checking invariants.
MomentState advance(const MomentState& state, const FeedSpec& feed,
                    const KernelSpec& kernel, double dt, double duration);

/// Fixed-step RK4 from t = 0 to t_end, sampled at every step (t = 0 included).
/// Every invariant the initial state satisfies must hold at every sample;
/// a violation throws IntegrationError carrying the offending time.
Trajectory integrate(const MomentState& initial, const FeedSchedule& schedule,
                     const KernelSpec& kernel, double dt, double t_end);

struct Summary {
  double mean_drug = 0.0;    // M01/M00
  double mean_mass = 0.0;    // M10/M00
  double drug_second = 0.0;  // M02/M00
};

inline constexpr double kMinNumberDensity = 1e-12;

/// Population averages; throws DegeneratePopulation when m00 <= 1e-12.
Summary summary(const MomentState& state);

/// The initial state used throughout the published experiments.
MomentState reference_initial_state();

}  // namespace granulation

#endif  // GRANULATION_MOMENTS_HPP_
