#ifndef GRANULATION_PCE_HPP_
#define GRANULATION_PCE_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "granulation/parallel.hpp"

namespace granulation::pce {

/// Orthogonal family paired with its probability weight:
/// hermite   - standard normal, probabilists' He_d
/// legendre  - uniform on [-1, 1]
/// laguerre  - unit exponential (Gamma with shape 1)
enum class Family { hermite, legendre, laguerre };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Value of the degree-d polynomial at w by three-term recurrence.
double poly_eval(Family family, int degree, double w);

/// Fills out[0..max_degree] with all degrees at once.
void poly_eval_all(Family family, int max_degree, double w, std::span<double> out);

/// E[phi_d^2] under the family's probability weight.
double norm_sq(Family family, int degree);

struct QuadratureRule {
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;  // sum to 1
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gauss rule for the family's probability weight, from the eigen-decomposition
/// of the Jacobi matrix. Exact for polynomials of degree <= 2 * node_count - 1.
QuadratureRule gauss_rule(Family family, int node_count);

using MultiIndex = std::vector<int>;

struct Truncation {
  enum class Kind { tensor, total_degree };
  Kind kind = Kind::tensor;
  int degree = 2;  // per-dimension max (tensor) or total order m (total_degree)

  static Truncation tensor(int d) { return {Kind::tensor, d}; }
  static Truncation total(int m) { return {Kind::total_degree, m}; }
};

/// Ordered multivariate basis. Indices are sorted by total degree, then
/// lexicographically, so indices[0] is the constant polynomial.
struct BasisSet {
  int dimension = 0;
  Family family = Family::hermite;
  Truncation truncation;
  std::vector<MultiIndex> indices;
  std::vector<double> norms;  // E[phi_i^2] per index

  std::size_t size() const { return indices.size(); }
  int max_degree() const;
  /// Product of univariate polynomials for index i at point w.
  double evaluate(std::size_t i, std::span<const double> w) const;
};

BasisSet index_set(int n_dims, Truncation truncation, Family family = Family::hermite);

/// Number of total-degree-m polynomials in n variables: (n+m)!/(n! m!).
std::size_t total_degree_count(int n_dims, int order);

/// Full tensor grid built from one univariate rule per dimension.
struct TensorGrid {
  int dimension = 0;
  std::vector<double> points;   // row-major, node_count() x dimension
  std::vector<double> weights;  // node_count()

  std::size_t node_count() const { return weights.size(); }
  std::span<const double> point(std::size_t q) const {
    return {points.data() + q * static_cast<std::size_t>(dimension),
            static_cast<std::size_t>(dimension)};
  }
};

/// Tensor product of `rule` with itself `dimension` times. The last dimension
/// varies fastest.
TensorGrid tensor_grid(const QuadratureRule& rule, int dimension);
TensorGrid tensor_grid(std::span<const QuadratureRule> rules);

/// Coefficients of one scalar quantity over a basis.
struct PceModel {
  std::shared_ptr<const BasisSet> basis;
  std::vector<double> coefficients;

  double evaluate(std::span<const double> w) const;
};

double pce_mean(const PceModel& model);
double pce_variance(const PceModel& model);

/// An evaluator threw at a quadrature node.
class NodeEvaluationError : public std::runtime_error {
 public:
  NodeEvaluationError(std::size_t node, std::vector<double> point, const std::string& what);
  std::size_t node() const { return node_; }
  const std::vector<double>& point() const { return point_; }

 private:
  std::size_t node_;
  std::vector<double> point_;
};

/// Projection of precomputed node values: a_i = sum_q w_q f_q phi_i(x_q) / norm_i.
/// `values` is node-major with `outputs` quantities per node; one model per output.
std::vector<PceModel> project_values(std::shared_ptr<const BasisSet> basis,
                                     const TensorGrid& grid, std::span<const double> values,
                                     std::size_t outputs = 1);

using Evaluator = std::function<double(std::span<const double>)>;

/// Non-intrusive projection of `evaluator` onto `basis` over the tensor grid of
/// `rules` (one per dimension). Node evaluations run concurrently under
/// Exec::parallel; results are identical either way.
PceModel project(const Evaluator& evaluator, std::shared_ptr<const BasisSet> basis,
                 std::span<const QuadratureRule> rules, Exec exec = Exec::parallel);

void to_json(nlohmann::json& j, const PceModel& model);

}  // namespace granulation::pce

#endif  // GRANULATION_PCE_HPP_
