#include "granulation/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "granulation/moments.hpp"

namespace granulation::opt {

namespace {

double reflect_into(double x, const Bounds& b) {
  if (x < b.lo) x = 2.0 * b.lo - x;
  if (x > b.hi) x = 2.0 * b.hi - x;
  return std::clamp(x, b.lo, b.hi);
}

Vector project_box(Vector x, std::span<const Bounds> bounds) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = reflect_into(x[j], bounds[j]);
  return x;
}

bool inside(std::span<const double> x, std::span<const Bounds> bounds) {
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!(x[j] >= bounds[j].lo && x[j] <= bounds[j].hi)) return false;
  return true;
}

// Non-finite values rank last so the simplex walks away from them.
double sanitize(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

struct Candidate {
  Vector u;
  double objective;
  double residual;
  int iterations;
  bool nm_converged;
};

// Feasible beats infeasible; among feasible the lower objective wins; among
// infeasible the lower residual wins.
bool better(const Candidate& a, const Candidate& b, double tol) {
  const bool fa = a.residual <= tol;
  const bool fb = b.residual <= tol;
  if (fa != fb) return fa;
  if (fa) return a.objective < b.objective;
  if (a.residual != b.residual) return a.residual < b.residual;
  return a.objective < b.objective;
}

}  // namespace

std::string to_string(NlpStatus status) {
  switch (status) {
    case NlpStatus::converged: return "converged";
    case NlpStatus::infeasible: return "infeasible";
    case NlpStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

void NlpProblem::validate() const {
  if (!objective) throw InvalidArgument("nlp: objective missing");
  if (bounds.empty()) throw InvalidArgument("nlp: no decision variables");
  for (const auto& b : bounds)
    if (!(b.lo <= b.hi)) throw InvalidArgument("nlp: bound lo > hi");
  for (const auto& g : constraints)
    if (!g) throw InvalidArgument("nlp: empty constraint function");
}

double NlpProblem::max_residual(std::span<const double> u) const {
  double r = 0.0;
  for (const auto& g : constraints) {
    const double v = g(u);
    r = std::isfinite(v) ? std::max(r, v) : std::numeric_limits<double>::infinity();
  }
  return r;
}

ScalarFn penalize(const NlpProblem& problem, double weight) {
  if (!(weight > 0.0)) throw InvalidArgument("penalize: weight must be positive");
  return [objective = problem.objective, constraints = problem.constraints,
          weight](std::span<const double> u) {
    double v = objective(u);
    for (const auto& g : constraints) {
      const double viol = std::max(0.0, g(u));
      v += weight * viol * viol;
    }
    return v;
  };
}

NelderMeadResult nelder_mead(const ScalarFn& f, std::span<const Bounds> bounds,
                             std::span<const double> start, const NlpOptions& options) {
  const std::size_t n = bounds.size();
  std::vector<Vector> simplex(n + 1, project_box(Vector(start.begin(), start.end()), bounds));
  for (std::size_t j = 0; j < n; ++j) {
    const double h = options.initial_step * (bounds[j].hi - bounds[j].lo);
    Vector& v = simplex[j + 1];
    v[j] = v[j] + h <= bounds[j].hi ? v[j] + h : v[j] - h;
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = sanitize(f(simplex[i]));

  std::vector<std::size_t> order(n + 1);
  NelderMeadResult result;
  auto eval = [&](const Vector& x) { return sanitize(f(x)); };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n >= 1 ? n - 1 : 0];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[best][j]));
    const double spread = values[worst] - values[best];
    result.iterations = iter;
    if (diameter <= options.x_tol || spread <= options.f_tol) {
      result.converged = true;
      break;
    }

    Vector centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      Vector x(n);
      for (std::size_t j = 0; j < n; ++j)
        x[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
      return project_box(std::move(x), bounds);
    };

    const Vector reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Vector expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Vector contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j)
        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  if (!result.converged) result.iterations = options.max_iterations;
  return result;
}

NlpSolution minimize(const NlpProblem& problem, std::span<const Vector> starts,
                     const NlpOptions& options) {
  problem.validate();
  const std::size_t n = problem.dimension();
  const std::span<const Bounds> bounds(problem.bounds);

  std::vector<Candidate> candidates;
  for (const Vector& start : starts) {
    if (start.size() != n) throw InvalidArgument("minimize: start has wrong dimension");
    if (!inside(start, bounds)) continue;
    candidates.push_back({start, problem.objective(start), problem.max_residual(start), 0, true});
  }
  if (candidates.empty()) throw InvalidArgument("minimize: no start lies inside the bounds");

  const std::size_t n_starts = candidates.size();
  const std::size_t m = problem.constraints.size();
  for (std::size_t s = 0; s < n_starts; ++s) {
    Vector x = candidates[s].u;
    std::vector<double> shift(m, 0.0);  // multiplier estimates
    int iterations = 0;
    bool nm_converged = true;
    const int rounds = m == 0 ? 1 : std::max(options.penalty_rounds, 1);
    double weight = options.initial_penalty;
    for (int r = 0; r < rounds; ++r, weight *= options.penalty_growth) {
      const ScalarFn merit = [&](std::span<const double> u) {
        double v = problem.objective(u);
        for (std::size_t k = 0; k < m; ++k) {
          const double t = std::max(0.0, problem.constraints[k](u) + shift[k] / (2.0 * weight));
          v += weight * t * t - shift[k] * shift[k] / (4.0 * weight);
        }
        return v;
      };
      const NelderMeadResult nm = nelder_mead(merit, bounds, x, options);
      x = nm.x;
      iterations += nm.iterations;
      nm_converged = nm.converged;
      bool strictly_feasible = true;
      for (std::size_t k = 0; k < m; ++k) {
        const double g = problem.constraints[k](x);
        strictly_feasible = strictly_feasible && g <= 0.0 && shift[k] == 0.0;
        shift[k] = std::max(0.0, shift[k] + 2.0 * weight * g);
      }
      // No active constraint and no multiplier: a heavier penalty leaves x a
      // local minimizer of the next merit, so further rounds cannot move it.
      if (strictly_feasible) break;
    }
    candidates.push_back(
        {x, problem.objective(x), problem.max_residual(x), iterations, nm_converged});
  }

  std::size_t pick = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (better(candidates[c], candidates[pick], options.feasibility_tol)) pick = c;
  int total_iterations = 0;
  for (const auto& c : candidates) total_iterations += c.iterations;

  const Candidate& best = candidates[pick];
  NlpSolution sol;
  sol.u = best.u;
  sol.objective = best.objective;
  sol.max_residual = best.residual;
  sol.iterations = total_iterations;
  if (best.residual > options.feasibility_tol)
    sol.status = NlpStatus::infeasible;
  else
    sol.status = best.nm_converged ? NlpStatus::converged : NlpStatus::max_iterations;
  return sol;
}

}  // namespace granulation::opt
