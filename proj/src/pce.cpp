#include "granulation/pce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "granulation/moments.hpp"

namespace granulation::pce {

std::string to_string(Family family) {
  switch (family) {
    case Family::hermite: return "hermite";
    case Family::legendre: return "legendre";
    case Family::laguerre: return "laguerre";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "hermite") return Family::hermite;
  if (name == "legendre") return Family::legendre;
  if (name == "laguerre") return Family::laguerre;
  throw InvalidArgument("unknown polynomial family '" + name + "'");
}

void poly_eval_all(Family family, int max_degree, double w, std::span<double> out) {
  if (max_degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  if (out.size() < static_cast<std::size_t>(max_degree) + 1)
    throw InvalidArgument("poly_eval_all: output span too small");
  out[0] = 1.0;
  if (max_degree == 0) return;
  switch (family) {
    case Family::hermite:
      out[1] = w;
      for (int d = 1; d < max_degree; ++d) out[d + 1] = w * out[d] - d * out[d - 1];
      break;
    case Family::legendre:
      out[1] = w;
      for (int d = 1; d < max_degree; ++d)
        out[d + 1] = ((2.0 * d + 1.0) * w * out[d] - d * out[d - 1]) / (d + 1.0);
      break;
    case Family::laguerre:
      out[1] = 1.0 - w;
      for (int d = 1; d < max_degree; ++d)
        out[d + 1] = ((2.0 * d + 1.0 - w) * out[d] - d * out[d - 1]) / (d + 1.0);
      break;
  }
}

double poly_eval(Family family, int degree, double w) {
  std::vector<double> buf(static_cast<std::size_t>(std::max(degree, 0)) + 1);
  poly_eval_all(family, degree, w, buf);
  return buf[static_cast<std::size_t>(degree)];
}

double norm_sq(Family family, int degree) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  switch (family) {
    case Family::hermite: return std::tgamma(degree + 1.0);
    case Family::legendre: return 1.0 / (2.0 * degree + 1.0);
    case Family::laguerre: return 1.0;
  }
  return 1.0;
}

QuadratureRule gauss_rule(Family family, int node_count) {
  if (node_count < 1) throw InvalidArgument("gauss_rule: node_count must be >= 1");
  const auto n = static_cast<Eigen::Index>(node_count);
  // Jacobi matrix of the monic recurrence p_{k+1} = (x - a_k) p_k - b_k p_{k-1}.
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double kd = static_cast<double>(k);
    diag(k) = family == Family::laguerre ? 2.0 * kd + 1.0 : 0.0;
    if (k + 1 < n) {
      const double m = kd + 1.0;
      double b = 0.0;
      switch (family) {
        case Family::hermite: b = m; break;
        case Family::legendre: b = m * m / (4.0 * m * m - 1.0); break;
        case Family::laguerre: b = m * m; break;
      }
      sub(k) = std::sqrt(b);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw QuadratureError("gauss_rule: tridiagonal eigensolver did not converge for " +
                          to_string(family) + " with " + std::to_string(node_count) +
                          " nodes");

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    rule.nodes[k] = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
  }
  // Symmetric weights: snap tiny asymmetries so the middle node is exactly 0.
  if (family != Family::laguerre) {
    for (Eigen::Index k = 0; k < n / 2; ++k) {
      const auto lo = static_cast<std::size_t>(k);
      const auto hi = static_cast<std::size_t>(n - 1 - k);
      const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
      const double wt = 0.5 * (rule.weights[hi] + rule.weights[lo]);
      rule.nodes[lo] = -x;
      rule.nodes[hi] = x;
      rule.weights[lo] = rule.weights[hi] = wt;
    }
    if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

int BasisSet::max_degree() const {
  int d = 0;
  for (const auto& idx : indices)
    for (int a : idx) d = std::max(d, a);
  return d;
}

double BasisSet::evaluate(std::size_t i, std::span<const double> w) const {
  const MultiIndex& idx = indices.at(i);
  double v = 1.0;
  for (std::size_t j = 0; j < idx.size(); ++j) v *= poly_eval(family, idx[j], w[j]);
  return v;
}

std::size_t total_degree_count(int n_dims, int order) {
  // C(n+m, m) computed incrementally to stay exact in integers
  std::size_t c = 1;
  for (int k = 1; k <= order; ++k)
    c = c * static_cast<std::size_t>(n_dims + k) / static_cast<std::size_t>(k);
  return c;
}

BasisSet index_set(int n_dims, Truncation truncation, Family family) {
  if (n_dims < 1) throw InvalidArgument("index_set: n_dims must be >= 1");
  if (truncation.degree < 0) throw InvalidArgument("index_set: degree must be >= 0");
  BasisSet basis;
  basis.dimension = n_dims;
  basis.family = family;
  basis.truncation = truncation;

  const int d = truncation.degree;
  MultiIndex current(static_cast<std::size_t>(n_dims), 0);
  // odometer over [0, d]^n; total-degree keeps the subset with sum <= d
  while (true) {
    const int total = std::accumulate(current.begin(), current.end(), 0);
    if (truncation.kind == Truncation::Kind::tensor || total <= d)
      basis.indices.push_back(current);
    int pos = n_dims - 1;
    while (pos >= 0 && current[static_cast<std::size_t>(pos)] == d) {
      current[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++current[static_cast<std::size_t>(pos)];
  }
  std::stable_sort(basis.indices.begin(), basis.indices.end(),
                   [](const MultiIndex& a, const MultiIndex& b) {
                     const int sa = std::accumulate(a.begin(), a.end(), 0);
                     const int sb = std::accumulate(b.begin(), b.end(), 0);
                     return sa < sb;
                   });
  basis.norms.reserve(basis.indices.size());
  for (const auto& idx : basis.indices) {
    double n = 1.0;
    for (int a : idx) n *= norm_sq(family, a);
    basis.norms.push_back(n);
  }
  return basis;
}

TensorGrid tensor_grid(std::span<const QuadratureRule> rules) {
  TensorGrid grid;
  grid.dimension = static_cast<int>(rules.size());
  if (rules.empty()) throw InvalidArgument("tensor_grid: need at least one rule");
  std::size_t count = 1;
  for (const auto& r : rules) count *= r.nodes.size();
  grid.points.resize(count * rules.size());
  grid.weights.resize(count);
  for (std::size_t q = 0; q < count; ++q) {
    std::size_t rem = q;
    double w = 1.0;
    for (std::size_t j = rules.size(); j-- > 0;) {
      const std::size_t m = rules[j].nodes.size();
      const std::size_t k = rem % m;
      rem /= m;
      grid.points[q * rules.size() + j] = rules[j].nodes[k];
      w *= rules[j].weights[k];
    }
    grid.weights[q] = w;
  }
  return grid;
}

TensorGrid tensor_grid(const QuadratureRule& rule, int dimension) {
  if (dimension < 1) throw InvalidArgument("tensor_grid: dimension must be >= 1");
  std::vector<QuadratureRule> rules(static_cast<std::size_t>(dimension), rule);
  return tensor_grid(rules);
}

double PceModel::evaluate(std::span<const double> w) const {
  double v = 0.0;
  for (std::size_t i = 0; i < coefficients.size(); ++i)
    v += coefficients[i] * basis->evaluate(i, w);
  return v;
}

double pce_mean(const PceModel& model) {
  return model.coefficients.empty() ? 0.0 : model.coefficients.front();
}

double pce_variance(const PceModel& model) {
  double v = 0.0;
  for (std::size_t i = 1; i < model.coefficients.size(); ++i)
    v += model.coefficients[i] * model.coefficients[i] * model.basis->norms[i];
  return v;
}

NodeEvaluationError::NodeEvaluationError(std::size_t node, std::vector<double> point,
                                         const std::string& what)
    : std::runtime_error(what), node_(node), point_(std::move(point)) {}

std::vector<PceModel> project_values(std::shared_ptr<const BasisSet> basis,
                                     const TensorGrid& grid, std::span<const double> values,
                                     std::size_t outputs) {
  if (!basis) throw InvalidArgument("project: null basis");
  if (grid.dimension != basis->dimension)
    throw InvalidArgument("project: grid and basis dimensions differ");
  if (values.size() != grid.node_count() * outputs)
    throw InvalidArgument("project: value count does not match grid");

  const std::size_t dim = static_cast<std::size_t>(basis->dimension);
  const int max_deg = basis->max_degree();
  const std::size_t stride = static_cast<std::size_t>(max_deg) + 1;

  std::vector<PceModel> models(outputs);
  for (auto& m : models) {
    m.basis = basis;
    m.coefficients.assign(basis->size(), 0.0);
  }
  std::vector<double> univariate(dim * stride);
  for (std::size_t q = 0; q < grid.node_count(); ++q) {
    const auto x = grid.point(q);
    for (std::size_t j = 0; j < dim; ++j)
      poly_eval_all(basis->family, max_deg, x[j],
                    std::span<double>(univariate.data() + j * stride, stride));
    for (std::size_t i = 0; i < basis->size(); ++i) {
      const MultiIndex& idx = basis->indices[i];
      double phi = grid.weights[q];
      for (std::size_t j = 0; j < dim; ++j)
        phi *= univariate[j * stride + static_cast<std::size_t>(idx[j])];
      for (std::size_t o = 0; o < outputs; ++o)
        models[o].coefficients[i] += phi * values[q * outputs + o];
    }
  }
  for (auto& m : models)
    for (std::size_t i = 0; i < basis->size(); ++i) m.coefficients[i] /= basis->norms[i];
  return models;
}

PceModel project(const Evaluator& evaluator, std::shared_ptr<const BasisSet> basis,
                 std::span<const QuadratureRule> rules, Exec exec) {
  if (!basis) throw InvalidArgument("project: null basis");
  if (rules.size() != static_cast<std::size_t>(basis->dimension))
    throw InvalidArgument("project: need one quadrature rule per basis dimension");
  const std::size_t needed = static_cast<std::size_t>(basis->max_degree()) + 1;
  for (const auto& r : rules)
    if (r.nodes.size() < needed)
      throw InvalidArgument("project: quadrature rule has fewer nodes than max degree + 1");

  const TensorGrid grid = tensor_grid(rules);
  std::vector<double> values(grid.node_count());
  for_each_index(grid.node_count(), exec, [&](std::size_t q) {
    const auto x = grid.point(q);
    try {
      values[q] = evaluator(x);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "evaluator failed at quadrature node " << q << ": " << e.what();
      throw NodeEvaluationError(q, std::vector<double>(x.begin(), x.end()), msg.str());
    }
  });
  return std::move(project_values(std::move(basis), grid, values, 1).front());
}

void to_json(nlohmann::json& j, const PceModel& model) {
  j = nlohmann::json{{"family", to_string(model.basis->family)},
                     {"dimension", model.basis->dimension},
                     {"truncation", model.basis->truncation.kind == Truncation::Kind::tensor
                                        ? "tensor"
                                        : "total_degree"},
                     {"degree", model.basis->truncation.degree},
                     {"indices", model.basis->indices},
                     {"norms", model.basis->norms},
                     {"coefficients", model.coefficients},
                     {"mean", pce_mean(model)},
                     {"variance", pce_variance(model)}};
}

}  // namespace granulation::pce
