#ifndef GRANULATION_CONTROLLER_HPP_
#define GRANULATION_CONTROLLER_HPP_

#include <array>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "granulation/moments.hpp"
#include "granulation/optimizer.hpp"
#include "granulation/parallel.hpp"
#include "granulation/pce.hpp"

namespace granulation::control {

/// How the chance constraint Pr[p1 <= M02/M00 <= p2] >= eps is made deterministic.
/// paper_literal: kappa * Var -/+ E  (as published)
/// cantelli:      kappa * sqrt(Var) -/+ E  (one-sided Cantelli bound)
enum class Reformulation { paper_literal, cantelli };

/// Which horizon steps the tracking/variance cost is summed over.
enum class CostHorizon { all_steps, terminal };

std::string to_string(Reformulation r);
Reformulation reformulation_from_string(const std::string& s);

struct ControlConfig {
  double target_drug = 0.2;      // S
  double target_mass = 1.2;      // P
  double variance_weight = 100;  // sigma
  double epsilon = 0.85;
  double var_lo = 0.0;   // p1*
  double var_hi = 0.06;  // p2*
  int horizon = 3;
  double sample_time = 1.0;
  double u_lo = 0.0;
  double u_hi = 1.0;  // capped at the feed particle mass p_f
  Reformulation reformulation = Reformulation::paper_literal;
  CostHorizon cost_horizon = CostHorizon::all_steps;
  int move_block = 1;  // consecutive steps sharing one free move

  int quadrature_nodes = 6;
  pce::Truncation truncation = pce::Truncation::tensor(2);
  double integrator_dt = 0.01;
  opt::NlpOptions solver = default_solver_options();

  static opt::NlpOptions default_solver_options();
  void validate() const;
  /// Number of free moves in the decision vector.
  int decision_size() const { return (horizon + move_block - 1) / move_block; }
  /// Expands a decision vector to one move per horizon step.
  std::vector<double> expand(std::span<const double> decision) const;
};

/// Gaussian perturbation of the feed concentration: c_f = nominal + std * w,
/// w ~ N(0,1) independently per sampling period.
struct NoiseSpec {
  double std = 0.1;
  double measurement_std = 0.0;  // declared for completeness; no estimator consumes it

  void validate() const;
};

enum Quantity : std::size_t { kDrugMean = 0, kMassMean = 1, kDrugSecond = 2 };
inline constexpr std::size_t kQuantityCount = 3;

struct StepStats {
  std::array<double, kQuantityCount> mean{};
  std::array<double, kQuantityCount> variance{};
};

/// Per horizon step (index 0 is one sample time ahead).
struct PredictionStats {
  std::vector<StepStats> steps;
};

/// m00 collapsed at a quadrature node while predicting.
class DegeneratePrediction : public std::runtime_error {
 public:
  DegeneratePrediction(int step, std::size_t node, const std::string& what);
  int step() const { return step_; }
  std::size_t node() const { return node_; }

 private:
  int step_;
  std::size_t node_;
};

/// Exact one-period transition of the drug moments along one tree edge.
/// The mass moments (M00, M10, M20) evolve independently of s_f, so for a
/// fixed feed concentration the RK4 map over one sample period is
///   y1' = A z,   y2' = C y2 + Q[z, z],   z = (M01, M11, M21, s_f),
/// with y1 = (M01, M11, M21) and y2 = (M02, M12, M22).
struct EdgeMap {
  std::array<double, 3> mass{};                 // M00, M10, M20 at the end
  std::array<std::array<double, 4>, 3> linear{};    // A
  std::array<std::array<double, 3>, 3> carry{};     // C
  std::array<std::array<double, 10>, 3> quadratic{};  // upper triangle of Q per row

  MomentState apply(const MomentState& start, double s_f) const;
};

/// Tree of edge maps for one (state, feed, noise) triple; reusable across
/// every control sequence the optimizer tries at that sampling instant.
struct PredictionPlan {
  MomentState root;
  bool nominal = false;  // zero noise: one node per level at the nominal feed
  FeedSpec feed;
  std::vector<std::vector<EdgeMap>> levels;  // levels[k][node], node-major as the grid
};

/**
 * Horizon-indexed Hermite expansions of the summary ratios. Step k depends on
 * the noises w_1..w_k; its coefficients come from the k-dimensional tensor
 * Gauss-Hermite grid over those noises.
 *
 * predict_direct() integrates the moment ODE at every grid node and is kept
 * as the reference. plan()/predict() compute the same node states through
 * precomputed EdgeMaps (equal up to rounding).
 *
 * Holds only precomputed rules, grids and bases; all members are const and
 * safe to call from several threads.
 */
class PcePredictor {
 public:
  PcePredictor(const ControlConfig& config, const KernelSpec& kernel);

  PredictionPlan plan(const MomentState& state, const FeedSpec& feed, const NoiseSpec& noise,
                      Exec exec = Exec::serial) const;
  PredictionStats predict(const PredictionPlan& plan, std::span<const double> controls) const;
  std::vector<std::array<pce::PceModel, kQuantityCount>> fit(
      const PredictionPlan& plan, std::span<const double> controls) const;

  /// plan() followed by predict().
  PredictionStats predict(const MomentState& state, std::span<const double> controls,
                          const FeedSpec& feed, const NoiseSpec& noise,
                          Exec exec = Exec::serial) const;

  PredictionStats predict_direct(const MomentState& state, std::span<const double> controls,
                                 const FeedSpec& feed, const NoiseSpec& noise,
                                 Exec exec = Exec::serial) const;
  std::vector<std::array<pce::PceModel, kQuantityCount>> fit_direct(
      const MomentState& state, std::span<const double> controls, const FeedSpec& feed,
      const NoiseSpec& noise, Exec exec = Exec::serial) const;

  const pce::QuadratureRule& rule() const { return rule_; }
  const ControlConfig& config() const { return config_; }

 private:
  PredictionStats nominal(const MomentState& state, std::span<const double> controls,
                          const FeedSpec& feed) const;
  std::array<pce::PceModel, kQuantityCount> project_level(int step,
                                                          std::span<const MomentState> states)
      const;
  EdgeMap edge_map(const MomentState& parent, const FeedSpec& feed) const;

  ControlConfig config_;
  KernelSpec kernel_;
  pce::QuadratureRule rule_;
  std::vector<std::shared_ptr<const pce::BasisSet>> bases_;  // per step
  std::vector<pce::TensorGrid> grids_;                         // per step
};

PredictionStats build_predictions(const MomentState& state, std::span<const double> controls,
                                  const NoiseSpec& noise, const ControlConfig& config,
                                  const KernelSpec& kernel, const FeedSpec& feed,
                                  Exec exec = Exec::serial);

/// sqrt(eps / (1 - eps)).
double kappa(double epsilon);

struct ChanceResidual {
  double lower = 0.0;  // <= 0 means the p1* side holds
  double upper = 0.0;  // <= 0 means the p2* side holds
};

std::vector<ChanceResidual> chance_residuals(const PredictionStats& stats,
                                             const ControlConfig& config);

/// Sum over the cost horizon of (E[drug]-S)^2 + (E[mass]-P)^2 + sigma Var[drug].
double smpc_objective(const PredictionStats& stats, const ControlConfig& config);

/// Nominal tracking cost without the variance term.
double nmpc_objective(const PredictionStats& stats, const ControlConfig& config);

struct StepDiagnostics {
  std::vector<double> decision;  // free moves, the next step's warm start after shifting
  std::vector<double> controls;  // full planned sequence
  double objective = 0.0;
  std::vector<ChanceResidual> residuals;
  PredictionStats predicted;
  int iterations = 0;
  bool infeasible = false;
  opt::NlpStatus status = opt::NlpStatus::converged;
};

struct ControlMove {
  double applied = 0.0;
  StepDiagnostics diagnostics;
};

void to_json(nlohmann::json& j, const StepDiagnostics& d);

/// One receding-horizon SMPC move. `warm_start` is a decision vector of
/// config.decision_size() entries, or empty.
ControlMove smpc_step(const MomentState& state, const ControlConfig& config,
                      const NoiseSpec& noise, const KernelSpec& kernel, const FeedSpec& feed,
                      std::span<const double> warm_start, Exec exec = Exec::serial);

/// One receding-horizon NMPC move on nominal predictions with hard bounds on M02/M00.
ControlMove nmpc_step(const MomentState& state, const ControlConfig& config,
                      const KernelSpec& kernel, const FeedSpec& feed,
                      std::span<const double> warm_start);

/// Decision vector for the next step: drop the applied move, repeat the last.
std::vector<double> shift_warm_start(std::span<const double> decision);

}  // namespace granulation::control

#endif  // GRANULATION_CONTROLLER_HPP_
