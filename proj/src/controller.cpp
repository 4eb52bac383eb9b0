#include "granulation/controller.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace granulation::control {

std::string to_string(Reformulation r) {
  return r == Reformulation::cantelli ? "cantelli" : "paper_literal";
}

Reformulation reformulation_from_string(const std::string& s) {
  if (s == "paper_literal") return Reformulation::paper_literal;
  if (s == "cantelli") return Reformulation::cantelli;
  throw InvalidArgument("unknown reformulation '" + s + "'");
}

opt::NlpOptions ControlConfig::default_solver_options() {
  opt::NlpOptions o;
  o.x_tol = 1e-6;
  o.f_tol = 1e-12;
  o.max_iterations = 600;
  return o;
}

void ControlConfig::validate() const {
  if (!(var_lo < var_hi)) throw InvalidArgument("control: require p1* < p2*");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("control: epsilon must be in (0,1)");
  if (horizon < 1) throw InvalidArgument("control: horizon must be >= 1");
  if (!(sample_time > 0.0)) throw InvalidArgument("control: sample time must be positive");
  if (!(u_lo <= u_hi) || u_lo < 0.0) throw InvalidArgument("control: bad control bounds");
  if (!(variance_weight >= 0.0)) throw InvalidArgument("control: sigma must be >= 0");
  if (move_block < 1) throw InvalidArgument("control: move_block must be >= 1");
  if (quadrature_nodes < truncation.degree + 1)
    throw InvalidArgument("control: quadrature nodes must exceed the expansion degree");
  if (!(integrator_dt > 0.0)) throw InvalidArgument("control: integrator dt must be positive");
}

std::vector<double> ControlConfig::expand(std::span<const double> decision) const {
  if (decision.size() != static_cast<std::size_t>(decision_size()))
    throw InvalidArgument("control: decision vector has wrong length");
  std::vector<double> out(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) out[static_cast<std::size_t>(k)] = decision[k / move_block];
  return out;
}

void NoiseSpec::validate() const {
  if (!(std >= 0.0) || !(measurement_std >= 0.0))
    throw InvalidArgument("noise: standard deviations must be >= 0");
}

DegeneratePrediction::DegeneratePrediction(int step, std::size_t node, const std::string& what)
    : std::runtime_error(what), step_(step), node_(node) {}

namespace {

std::array<double, kQuantityCount> ratios(const Summary& s) {
  return {s.mean_drug, s.mean_mass, s.drug_second};
}

FeedSpec feed_with(const FeedSpec& base, double c_f, double s_f) {
  FeedSpec f = base;
  f.c_f = c_f;
  f.s_f = s_f;
  return f;
}

void check_controls(std::span<const double> controls, const ControlConfig& config,
                    const FeedSpec& feed) {
  if (controls.size() != static_cast<std::size_t>(config.horizon))
    throw InvalidArgument("predict: need one control per horizon step");
  for (double u : controls)
    if (!(u >= config.u_lo && u <= config.u_hi && u <= feed.p_f))
      throw InvalidArgument("predict: control outside bounds");
}

}  // namespace

namespace {

constexpr std::array<int, 3> kMassSlots = {0, 1, 4};   // M00, M10, M20
constexpr std::array<int, 3> kDrug1Slots = {2, 3, 7};  // M01, M11, M21
constexpr std::array<int, 3> kDrug2Slots = {5, 6, 8};  // M02, M12, M22

constexpr std::size_t pair_index(std::size_t a, std::size_t b) {
  // upper-triangular packing of a <= b over 4 variables
  return a * 4 - a * (a - 1) / 2 + (b - a);
}

std::array<double, kQuantityCount> node_ratios(const MomentState& x, int step, std::size_t node) {
  try {
    return ratios(summary(x));
  } catch (const DegeneratePopulation& e) {
    std::ostringstream msg;
    msg << "prediction step " << step << " node " << node << ": " << e.what();
    throw DegeneratePrediction(step, node, msg.str());
  }
}

double perturbed_concentration(const FeedSpec& feed, const NoiseSpec& noise, double node_value,
                               int step, std::size_t node) {
  const double c_f = feed.c_f + noise.std * node_value;
  if (c_f < 0.0) {
    std::ostringstream msg;
    msg << "prediction step " << step << " node " << node
        << ": perturbed feed concentration is negative";
    throw DegeneratePrediction(step, node, msg.str());
  }
  return c_f;
}

}  // namespace

MomentState EdgeMap::apply(const MomentState& start, double s_f) const {
  const std::array<double, 4> z = {start.values[kDrug1Slots[0]], start.values[kDrug1Slots[1]],
                                   start.values[kDrug1Slots[2]], s_f};
  MomentState out;
  for (std::size_t r = 0; r < 3; ++r) {
    out.values[kMassSlots[r]] = mass[r];
    double y1 = 0.0;
    for (std::size_t a = 0; a < 4; ++a) y1 += linear[r][a] * z[a];
    out.values[kDrug1Slots[r]] = y1;
    double y2 = 0.0;
    for (std::size_t c = 0; c < 3; ++c) y2 += carry[r][c] * start.values[kDrug2Slots[c]];
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a; b < 4; ++b) y2 += quadratic[r][pair_index(a, b)] * z[a] * z[b];
    out.values[kDrug2Slots[r]] = y2;
  }
  return out;
}

PcePredictor::PcePredictor(const ControlConfig& config, const KernelSpec& kernel)
    : config_(config), kernel_(kernel) {
  config_.validate();
  kernel_.validate();
  rule_ = pce::gauss_rule(pce::Family::hermite, config_.quadrature_nodes);
  for (int k = 1; k <= config_.horizon; ++k) {
    bases_.push_back(std::make_shared<const pce::BasisSet>(
        pce::index_set(k, config_.truncation, pce::Family::hermite)));
    grids_.push_back(pce::tensor_grid(rule_, k));
  }
}

PredictionStats PcePredictor::nominal(const MomentState& state,
                                      std::span<const double> controls,
                                      const FeedSpec& feed) const {
  PredictionStats stats;
  MomentState x = state;
  for (int k = 0; k < config_.horizon; ++k) {
    x = advance(x, feed_with(feed, feed.c_f, controls[k]), kernel_, config_.integrator_dt,
                config_.sample_time);
    StepStats s;
    s.mean = node_ratios(x, k + 1, 0);
    stats.steps.push_back(s);
  }
  return stats;
}

std::array<pce::PceModel, kQuantityCount> PcePredictor::project_level(
    int step, std::span<const MomentState> states) const {
  std::vector<double> values(states.size() * kQuantityCount);
  for (std::size_t node = 0; node < states.size(); ++node) {
    const auto r = node_ratios(states[node], step, node);
    std::copy(r.begin(), r.end(), values.begin() + static_cast<long>(node * kQuantityCount));
  }
  const auto k = static_cast<std::size_t>(step - 1);
  auto fitted = pce::project_values(bases_[k], grids_[k], values, kQuantityCount);
  return {std::move(fitted[0]), std::move(fitted[1]), std::move(fitted[2])};
}

EdgeMap PcePredictor::edge_map(const MomentState& parent, const FeedSpec& feed) const {
  auto run = [&](const std::array<double, 4>& z, int unit_y2) {
    MomentState probe;
    for (int s : kMassSlots) probe.values[s] = parent.values[s];
    for (std::size_t a = 0; a < 3; ++a) probe.values[kDrug1Slots[a]] = z[a];
    if (unit_y2 >= 0) probe.values[kDrug2Slots[static_cast<std::size_t>(unit_y2)]] = 1.0;
    return advance(probe, feed_with(feed, feed.c_f, z[3]), kernel_, config_.integrator_dt,
                   config_.sample_time);
  };
  auto unit = [](std::size_t a) {
    std::array<double, 4> z{};
    z[a] = 1.0;
    return z;
  };

  EdgeMap map;
  std::array<MomentState, 4> single;
  for (std::size_t a = 0; a < 4; ++a) {
    single[a] = run(unit(a), -1);
    for (std::size_t r = 0; r < 3; ++r) {
      map.linear[r][a] = single[a].values[kDrug1Slots[r]];
      map.quadratic[r][pair_index(a, a)] = single[a].values[kDrug2Slots[r]];
    }
  }
  for (std::size_t r = 0; r < 3; ++r) map.mass[r] = single[0].values[kMassSlots[r]];
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      std::array<double, 4> z{};
      z[a] = z[b] = 1.0;
      const MomentState both = run(z, -1);
      for (std::size_t r = 0; r < 3; ++r)
        map.quadratic[r][pair_index(a, b)] = both.values[kDrug2Slots[r]] -
                                             map.quadratic[r][pair_index(a, a)] -
                                             map.quadratic[r][pair_index(b, b)];
    }
  }
  for (int c = 0; c < 3; ++c) {
    const MomentState carried = run({0.0, 0.0, 0.0, 0.0}, c);
    for (std::size_t r = 0; r < 3; ++r)
      map.carry[r][static_cast<std::size_t>(c)] = carried.values[kDrug2Slots[r]];
  }
  return map;
}

PredictionPlan PcePredictor::plan(const MomentState& state, const FeedSpec& feed,
                                  const NoiseSpec& noise, Exec exec) const {
  noise.validate();
  feed.validate();
  PredictionPlan plan;
  plan.root = state;
  plan.feed = feed;
  plan.nominal = noise.std == 0.0;

  // Zero noise collapses the tree to a single chain at the nominal feed.
  const std::size_t q = plan.nominal ? 1 : rule_.nodes.size();
  // Only the mass block of each node state matters for the maps.
  std::vector<MomentState> parents{state};
  for (int k = 0; k < config_.horizon; ++k) {
    std::vector<EdgeMap> maps(parents.size() * q);
    for_each_index(maps.size(), exec, [&](std::size_t node) {
      const double c_f =
          plan.nominal ? feed.c_f
                       : perturbed_concentration(feed, noise, rule_.nodes[node % q], k + 1, node);
      maps[node] = edge_map(parents[node / q], feed_with(feed, c_f, 0.0));
    });
    std::vector<MomentState> next(maps.size());
    for (std::size_t node = 0; node < maps.size(); ++node)
      for (std::size_t r = 0; r < 3; ++r) next[node].values[kMassSlots[r]] = maps[node].mass[r];
    plan.levels.push_back(std::move(maps));
    parents = std::move(next);
  }
  return plan;
}

std::vector<std::array<pce::PceModel, kQuantityCount>> PcePredictor::fit(
    const PredictionPlan& plan, std::span<const double> controls) const {
  check_controls(controls, config_, plan.feed);
  if (plan.nominal) throw InvalidArgument("fit: zero-noise plan has no expansion");
  std::vector<MomentState> level{plan.root};
  std::vector<std::array<pce::PceModel, kQuantityCount>> models;
  const std::size_t q = rule_.nodes.size();
  for (int k = 0; k < config_.horizon; ++k) {
    const auto& maps = plan.levels[static_cast<std::size_t>(k)];
    std::vector<MomentState> next(maps.size());
    for (std::size_t node = 0; node < maps.size(); ++node)
      next[node] = maps[node].apply(level[node / q], controls[k]);
    models.push_back(project_level(k + 1, next));
    level = std::move(next);
  }
  return models;
}

namespace {

PredictionStats stats_from(const std::vector<std::array<pce::PceModel, kQuantityCount>>& models) {
  PredictionStats stats;
  for (const auto& step : models) {
    StepStats s;
    for (std::size_t i = 0; i < kQuantityCount; ++i) {
      s.mean[i] = pce::pce_mean(step[i]);
      s.variance[i] = pce::pce_variance(step[i]);
    }
    stats.steps.push_back(s);
  }
  return stats;
}

}  // namespace

PredictionStats PcePredictor::predict(const PredictionPlan& plan,
                                      std::span<const double> controls) const {
  check_controls(controls, config_, plan.feed);
  if (plan.nominal) {
    PredictionStats stats;
    MomentState x = plan.root;
    for (int k = 0; k < config_.horizon; ++k) {
      x = plan.levels[static_cast<std::size_t>(k)].front().apply(x, controls[k]);
      StepStats s;
      s.mean = node_ratios(x, k + 1, 0);
      stats.steps.push_back(s);
    }
    return stats;
  }
  return stats_from(fit(plan, controls));
}

PredictionStats PcePredictor::predict(const MomentState& state, std::span<const double> controls,
                                      const FeedSpec& feed, const NoiseSpec& noise,
                                      Exec exec) const {
  check_controls(controls, config_, feed);
  return predict(plan(state, feed, noise, exec), controls);
}

std::vector<std::array<pce::PceModel, kQuantityCount>> PcePredictor::fit_direct(
    const MomentState& state, std::span<const double> controls, const FeedSpec& feed,
    const NoiseSpec& noise, Exec exec) const {
  check_controls(controls, config_, feed);
  noise.validate();
  const std::size_t q = rule_.nodes.size();
  std::vector<MomentState> level{state};
  std::vector<std::array<pce::PceModel, kQuantityCount>> models;
  for (int k = 0; k < config_.horizon; ++k) {
    std::vector<MomentState> next(level.size() * q);
    for_each_index(next.size(), exec, [&](std::size_t node) {
      const double c_f = perturbed_concentration(feed, noise, rule_.nodes[node % q], k + 1, node);
      next[node] = advance(level[node / q], feed_with(feed, c_f, controls[k]), kernel_,
                           config_.integrator_dt, config_.sample_time);
    });
    models.push_back(project_level(k + 1, next));
    level = std::move(next);
  }
  return models;
}

PredictionStats PcePredictor::predict_direct(const MomentState& state,
                                             std::span<const double> controls,
                                             const FeedSpec& feed, const NoiseSpec& noise,
                                             Exec exec) const {
  check_controls(controls, config_, feed);
  noise.validate();
  if (noise.std == 0.0) return nominal(state, controls, feed);
  return stats_from(fit_direct(state, controls, feed, noise, exec));
}

PredictionStats build_predictions(const MomentState& state, std::span<const double> controls,
                                  const NoiseSpec& noise, const ControlConfig& config,
                                  const KernelSpec& kernel, const FeedSpec& feed, Exec exec) {
  const PcePredictor predictor(config, kernel);
  // Zero noise: integrate the nominal trajectory itself, identical to the plant.
  if (noise.std == 0.0) return predictor.predict_direct(state, controls, feed, noise, exec);
  return predictor.predict(state, controls, feed, noise, exec);
}

double kappa(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("kappa: epsilon must be in (0,1)");
  return std::sqrt(epsilon / (1.0 - epsilon));
}

std::vector<ChanceResidual> chance_residuals(const PredictionStats& stats,
                                             const ControlConfig& config) {
  const double k = kappa(config.epsilon);
  std::vector<ChanceResidual> out;
  out.reserve(stats.steps.size());
  for (const auto& s : stats.steps) {
    const double var = std::max(0.0, s.variance[kDrugSecond]);
    const double spread = config.reformulation == Reformulation::cantelli ? std::sqrt(var) : var;
    const double e = s.mean[kDrugSecond];
    out.push_back({k * spread - e + config.var_lo, k * spread + e - config.var_hi});
  }
  return out;
}

namespace {

double tracking_cost(const PredictionStats& stats, const ControlConfig& config, double sigma) {
  double cost = 0.0;
  const std::size_t first =
      config.cost_horizon == CostHorizon::terminal && !stats.steps.empty()
          ? stats.steps.size() - 1
          : 0;
  for (std::size_t k = first; k < stats.steps.size(); ++k) {
    const auto& s = stats.steps[k];
    const double ed = s.mean[kDrugMean] - config.target_drug;
    const double em = s.mean[kMassMean] - config.target_mass;
    cost += ed * ed + em * em + sigma * s.variance[kDrugMean];
  }
  return cost;
}

// Memoizes the last prediction: the penalty merit evaluates the objective and
// every constraint at the same point.
struct PredictionCache {
  std::vector<double> decision;
  PredictionStats stats;
  std::vector<ChanceResidual> residuals;
};

ControlMove solve_step(const MomentState& state, const ControlConfig& config,
                       const NoiseSpec& noise, const KernelSpec& kernel, const FeedSpec& feed,
                       std::span<const double> warm_start, Exec exec, double sigma) {
  config.validate();
  feed.validate();
  const PcePredictor predictor(config, kernel);
  const PredictionPlan plan = predictor.plan(state, feed, noise, exec);
  const double hi = std::min(config.u_hi, feed.p_f);
  const auto n = static_cast<std::size_t>(config.decision_size());

  auto cache = std::make_shared<PredictionCache>();
  auto lookup = [&, cache](std::span<const double> d) -> const PredictionCache& {
    if (cache->decision.size() != d.size() ||
        !std::equal(d.begin(), d.end(), cache->decision.begin())) {
      cache->decision.assign(d.begin(), d.end());
      cache->stats = predictor.predict(plan, config.expand(d));
      cache->residuals = chance_residuals(cache->stats, config);
    }
    return *cache;
  };

  opt::NlpProblem problem;
  problem.bounds.assign(n, opt::Bounds{config.u_lo, hi});
  problem.objective = [&](std::span<const double> d) {
    return tracking_cost(lookup(d).stats, config, sigma);
  };
  // Backed off by the solver's feasibility tolerance so an accepted point
  // satisfies the untightened constraint.
  const double margin = config.solver.feasibility_tol;
  for (int k = 0; k < config.horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    problem.constraints.push_back(
        [&, idx](std::span<const double> d) { return lookup(d).residuals[idx].lower + margin; });
    problem.constraints.push_back(
        [&, idx](std::span<const double> d) { return lookup(d).residuals[idx].upper + margin; });
  }

  std::vector<opt::Vector> starts;
  if (warm_start.size() == n) {
    opt::Vector w(warm_start.begin(), warm_start.end());
    for (double& v : w) v = std::clamp(v, config.u_lo, hi);
    starts.push_back(std::move(w));
  } else if (!warm_start.empty()) {
    throw InvalidArgument("controller: warm start has wrong length");
  }
  starts.emplace_back(n, 0.5 * (config.u_lo + hi));
  starts.emplace_back(n, config.u_lo);
  starts.emplace_back(n, hi);

  const opt::NlpSolution sol = opt::minimize(problem, starts, config.solver);

  ControlMove move;
  move.diagnostics.decision = sol.u;
  move.diagnostics.controls = config.expand(sol.u);
  move.applied = move.diagnostics.controls.front();
  const PredictionCache& at = lookup(sol.u);
  move.diagnostics.objective = sol.objective;
  move.diagnostics.residuals = at.residuals;
  move.diagnostics.predicted = at.stats;
  move.diagnostics.iterations = sol.iterations;
  move.diagnostics.status = sol.status;
  move.diagnostics.infeasible = sol.status == opt::NlpStatus::infeasible;
  return move;
}

}  // namespace

double smpc_objective(const PredictionStats& stats, const ControlConfig& config) {
  return tracking_cost(stats, config, config.variance_weight);
}

double nmpc_objective(const PredictionStats& stats, const ControlConfig& config) {
  return tracking_cost(stats, config, 0.0);
}

ControlMove smpc_step(const MomentState& state, const ControlConfig& config,
                      const NoiseSpec& noise, const KernelSpec& kernel, const FeedSpec& feed,
                      std::span<const double> warm_start, Exec exec) {
  return solve_step(state, config, noise, kernel, feed, warm_start, exec,
                    config.variance_weight);
}

ControlMove nmpc_step(const MomentState& state, const ControlConfig& config,
                      const KernelSpec& kernel, const FeedSpec& feed,
                      std::span<const double> warm_start) {
  // Var = 0 on nominal predictions, so both reformulations reduce to p1* <= E <= p2*.
  return solve_step(state, config, NoiseSpec{0.0, 0.0}, kernel, feed, warm_start, Exec::serial,
                    0.0);
}

std::vector<double> shift_warm_start(std::span<const double> decision) {
  std::vector<double> out(decision.begin(), decision.end());
  if (out.size() > 1) {
    std::rotate(out.begin(), out.begin() + 1, out.end());
    out.back() = out[out.size() - 2];
  }
  return out;
}

void to_json(nlohmann::json& j, const StepDiagnostics& d) {
  nlohmann::json residuals = nlohmann::json::array();
  for (const auto& r : d.residuals) residuals.push_back({{"lower", r.lower}, {"upper", r.upper}});
  nlohmann::json predicted = nlohmann::json::array();
  for (const auto& s : d.predicted.steps)
    predicted.push_back({{"mean_drug", s.mean[kDrugMean]},
                         {"mean_mass", s.mean[kMassMean]},
                         {"drug_second", s.mean[kDrugSecond]},
                         {"var_drug", s.variance[kDrugMean]},
                         {"var_mass", s.variance[kMassMean]},
                         {"var_drug_second", s.variance[kDrugSecond]}});
  j = nlohmann::json{{"move", d.controls.empty() ? 0.0 : d.controls.front()},
                     {"controls", d.controls},
                     {"objective", d.objective},
                     {"residuals", residuals},
                     {"predicted", predicted},
                     {"iterations", d.iterations},
                     {"status", opt::to_string(d.status)},
                     {"infeasible", d.infeasible}};
}

}  // namespace granulation::control
