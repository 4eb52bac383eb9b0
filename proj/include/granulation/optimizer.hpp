#ifndef GRANULATION_OPTIMIZER_HPP_
#define GRANULATION_OPTIMIZER_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace granulation::opt {

using Vector = std::vector<double>;
using ScalarFn = std::function<double(std::span<const double>)>;

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// min f(u)  s.t.  g_k(u) <= 0,  lo <= u <= hi.
struct NlpProblem {
  ScalarFn objective;
  std::vector<ScalarFn> constraints;
  std::vector<Bounds> bounds;

  std::size_t dimension() const { return bounds.size(); }
  void validate() const;
  double max_residual(std::span<const double> u) const;
};

struct NlpOptions {
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  int penalty_rounds = 4;
  double feasibility_tol = 1e-6;
  double x_tol = 1e-9;
  double f_tol = 1e-13;
  int max_iterations = 4000;    // per Nelder-Mead run
  double initial_step = 0.05;   // fraction of each box width
};

enum class NlpStatus { converged, infeasible, max_iterations };

struct NlpSolution {
  Vector u;
  double objective = 0.0;
  double max_residual = 0.0;
  int iterations = 0;
  NlpStatus status = NlpStatus::max_iterations;

  bool converged() const { return status == NlpStatus::converged; }
  bool feasible(double tol) const { return max_residual <= tol; }
};

std::string to_string(NlpStatus status);

/// f(u) + weight * sum_k max(0, g_k(u))^2.
ScalarFn penalize(const NlpProblem& problem, double weight);

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Bound-constrained Nelder-Mead. Trial points leaving the box are mirrored
/// back across the violated face and then clamped.
NelderMeadResult nelder_mead(const ScalarFn& f, std::span<const Bounds> bounds,
                             std::span<const double> start, const NlpOptions& options);

/// Best solution over all starts. Each start runs a penalty continuation:
/// `penalty_rounds` Nelder-Mead solves with weights initial_penalty *
/// penalty_growth^r, the constraint shifts updated between rounds
/// (method of multipliers). A problem without a point meeting
/// feasibility_tol comes back with status infeasible and its least residual.
NlpSolution minimize(const NlpProblem& problem, std::span<const Vector> starts,
                     const NlpOptions& options = {});

}  // namespace granulation::opt

#endif  // GRANULATION_OPTIMIZER_HPP_
