#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"

#include "granulation/controller.hpp"

using namespace granulation;
using namespace granulation::control;

namespace {

const KernelSpec kKernel{KernelVariant::constant, 0.06};
const FeedSpec kFeed{0.5, 1.0, 1.0, 0.1};

PredictionStats one_step(double e_drug, double e_mass, double var_drug, double e_second,
                         double var_second) {
  PredictionStats s;
  StepStats k;
  k.mean = {e_drug, e_mass, e_second};
  k.variance = {var_drug, 0.0, var_second};
  s.steps.push_back(k);
  return s;
}

ControlConfig fast_config() {
  ControlConfig c;
  c.integrator_dt = 0.05;
  return c;
}

// steady state of the plant under a constant drug feed
MomentState steady_state(double s_f) {
  FeedSpec f = kFeed;
  f.s_f = s_f;
  return advance(reference_initial_state(), f, kKernel, 0.01, 80.0);
}

}  // namespace

TEST_SUITE("controller") {

TEST_CASE("kappa") {
  CHECK(kappa(0.85) == doctest::Approx(2.380476).epsilon(1e-6));
  CHECK(kappa(0.5) == 1.0);
  CHECK(kappa(1e-12) < 1e-5);
  CHECK_THROWS_AS(kappa(0.0), InvalidArgument);
  CHECK_THROWS_AS(kappa(1.0), InvalidArgument);
}

TEST_CASE("chance residual examples") {
  ControlConfig c;
  auto r = chance_residuals(one_step(0.2, 1.2, 0, 0.03, 0.0), c);
  CHECK(r[0].lower == doctest::Approx(-0.03));
  CHECK(r[0].upper == doctest::Approx(-0.03));

  c.reformulation = Reformulation::cantelli;
  r = chance_residuals(one_step(0.2, 1.2, 0, 0.03, 2.5e-5), c);
  CHECK(r[0].upper == doctest::Approx(2.380476 * 0.005 + 0.03 - 0.06).epsilon(1e-6));
  CHECK(r[0].upper == doctest::Approx(-0.0181).epsilon(1e-2));

  c.reformulation = Reformulation::paper_literal;
  r = chance_residuals(one_step(0.2, 1.2, 0, 0.07, 0.0), c);
  CHECK(r[0].upper == doctest::Approx(0.01));

  // literal form multiplies the variance itself
  r = chance_residuals(one_step(0.2, 1.2, 0, 0.03, 2.5e-5), c);
  CHECK(r[0].upper == doctest::Approx(kappa(0.85) * 2.5e-5 + 0.03 - 0.06));
  CHECK(r[0].lower == doctest::Approx(kappa(0.85) * 2.5e-5 - 0.03 + 0.0));

  CHECK(reformulation_from_string(to_string(Reformulation::cantelli)) == Reformulation::cantelli);
  CHECK_THROWS_AS(reformulation_from_string("chebyshev"), InvalidArgument);
}

TEST_CASE("objective examples") {
  ControlConfig c;
  c.horizon = 1;
  CHECK(smpc_objective(one_step(0.2, 1.2, 0, 0.03, 0), c) == 0.0);
  CHECK(smpc_objective(one_step(0.25, 1.2, 1e-4, 0.03, 0), c) == doctest::Approx(0.0125));
  CHECK(nmpc_objective(one_step(0.25, 1.2, 1e-4, 0.03, 0), c) == doctest::Approx(0.0025));

  c.variance_weight = 0.0;
  c.horizon = 3;
  const std::vector<double> u = {0.3, 0.1, 0.25};
  const PredictionStats s = build_predictions(reference_initial_state(), u, NoiseSpec{0.0, 0.0},
                                              c, kKernel, kFeed);
  CHECK(smpc_objective(s, c) == nmpc_objective(s, c));

  c.cost_horizon = CostHorizon::terminal;
  ControlConfig all = c;
  all.cost_horizon = CostHorizon::all_steps;
  CHECK(smpc_objective(s, c) <= smpc_objective(s, all));
}

TEST_CASE("config validation") {
  ControlConfig c;
  CHECK_NOTHROW(c.validate());
  c.var_lo = 0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ControlConfig{};
  c.epsilon = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ControlConfig{};
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ControlConfig{};
  c.sample_time = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ControlConfig{};
  c.quadrature_nodes = 2;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(NoiseSpec({-0.1, 0.0}).validate(), InvalidArgument);

  c = ControlConfig{};
  c.move_block = 2;
  CHECK(c.decision_size() == 2);
  const std::vector<double> d = {0.1, 0.4};
  CHECK(c.expand(d) == std::vector<double>{0.1, 0.1, 0.4});
}

TEST_CASE("zero-noise predictions equal the nominal trajectory exactly") {
  ControlConfig c;
  const std::vector<double> u = {0.3, 0.1, 0.25};
  const MomentState x0 = reference_initial_state();
  const PredictionStats s = build_predictions(x0, u, NoiseSpec{0.0, 0.0}, c, kKernel, kFeed);
  MomentState x = x0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    FeedSpec f = kFeed;
    f.s_f = u[k];
    const Trajectory t = integrate(x, FeedSchedule::constant(f), kKernel, c.integrator_dt, 1.0);
    x = t.states.back();
    const Summary r = summary(x);
    CHECK(s.steps[k].mean[kDrugMean] == r.mean_drug);
    CHECK(s.steps[k].mean[kMassMean] == r.mean_mass);
    CHECK(s.steps[k].mean[kDrugSecond] == r.drug_second);
    for (double v : s.steps[k].variance) CHECK(v == 0.0);
  }
}

TEST_CASE("edge-map predictions match direct node integration") {
  ControlConfig c;
  const PcePredictor pred(c, kKernel);
  const NoiseSpec noise{0.1, 0.0};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const MomentState x0 = trial == 0 ? reference_initial_state() : test::random_realizable_state(rng);
    const std::vector<double> u = {u01(rng), u01(rng), u01(rng)};
    const PredictionStats a = pred.predict(x0, u, kFeed, noise);
    const PredictionStats b = pred.predict_direct(x0, u, kFeed, noise, Exec::parallel);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t q = 0; q < kQuantityCount; ++q) {
        CHECK(a.steps[k].mean[q] == doctest::Approx(b.steps[k].mean[q]).epsilon(1e-12));
        CHECK(std::abs(a.steps[k].variance[q] - b.steps[k].variance[q]) <=
              1e-9 * b.steps[k].variance[q] + 1e-20);
      }
  }
}

TEST_CASE("plan evaluation is identical serial vs parallel") {
  ControlConfig c;
  const PcePredictor pred(c, kKernel);
  const NoiseSpec noise{0.1, 0.0};
  const std::vector<double> u = {0.2, 0.3, 0.1};
  const auto ps = pred.plan(reference_initial_state(), kFeed, noise, Exec::serial);
  const auto pp = pred.plan(reference_initial_state(), kFeed, noise, Exec::parallel);
  const PredictionStats a = pred.predict(ps, u);
  const PredictionStats b = pred.predict(pp, u);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.steps[k].mean == b.steps[k].mean);
    CHECK(a.steps[k].variance == b.steps[k].variance);
  }
}

TEST_CASE("one-step surrogate mean matches direct Monte Carlo") {
  ControlConfig c;
  c.horizon = 1;
  const NoiseSpec noise{0.1, 0.0};
  const MomentState x0 = reference_initial_state();
  const std::vector<double> u = {0.1};
  const PredictionStats s = build_predictions(x0, u, noise, c, kKernel, kFeed);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int n = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    FeedSpec f = kFeed;
    f.c_f += noise.std * n01(rng);
    const double m = summary(advance(x0, f, kKernel, c.integrator_dt, 1.0)).mean_mass;
    sum += m;
    sum_sq += m * m;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
  CHECK(std::abs(s.steps[0].mean[kMassMean] - mean) <= 3.0 * se);
}

TEST_CASE("degenerate node reports step and node") {
  ControlConfig c;
  const std::vector<double> u = {0.1, 0.1, 0.1};
  try {
    build_predictions(reference_initial_state(), u, NoiseSpec{0.5, 0.0}, c, kKernel, kFeed);
    FAIL("expected DegeneratePrediction");
  } catch (const DegeneratePrediction& e) {
    CHECK(e.step() >= 0);
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
  const std::vector<double> outside = {1.5, 0.1, 0.1};
  CHECK_THROWS_AS(build_predictions(reference_initial_state(), outside, NoiseSpec{0.1, 0.0}, c,
                                    kKernel, kFeed),
                  InvalidArgument);
}

TEST_CASE("property: monotone risk") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Reformulation mode : {Reformulation::paper_literal, Reformulation::cantelli})
    for (int trial = 0; trial < 500; ++trial) {
      const PredictionStats s = one_step(0.2, 1.2, 0.0, 0.07 * u(rng), 1e-3 * u(rng));
      ControlConfig lo;
      lo.reformulation = mode;
      ControlConfig hi = lo;
      lo.epsilon = 0.05 + 0.9 * u(rng);
      hi.epsilon = lo.epsilon + (0.99 - lo.epsilon) * u(rng);
      const auto rh = chance_residuals(s, hi);
      const auto rl = chance_residuals(s, lo);
      if (rh[0].lower <= 0 && rh[0].upper <= 0) {
        CHECK(rl[0].lower <= 0);
        CHECK(rl[0].upper <= 0);
      }
    }
}

TEST_CASE("property: Cantelli-satisfied Gaussian predictions respect the risk budget") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    ControlConfig c;
    c.reformulation = Reformulation::cantelli;
    c.epsilon = 0.5 + 0.49 * u(rng);
    const double mean = 0.06 * u(rng);
    const double sd = 0.02 * u(rng);
    const auto r = chance_residuals(one_step(0.2, 1.2, 0, mean, sd * sd), c);
    if (r[0].lower > 0 || r[0].upper > 0) continue;
    ++checked;
    const double outside = sd == 0.0 ? 0.0
                                     : test::normal_cdf((c.var_lo - mean) / sd) +
                                           1.0 - test::normal_cdf((c.var_hi - mean) / sd);
    CHECK(outside <= 1.0 - c.epsilon + 1e-12);
  }
  CHECK(checked > 100);
}

TEST_CASE("property: zero noise and sigma 0 make both objectives equal") {
  ControlConfig c;
  c.variance_weight = 0.0;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> seq = {u(rng), u(rng), u(rng)};
    const PredictionStats s =
        build_predictions(reference_initial_state(), seq, NoiseSpec{0.0, 0.0}, c, kKernel, kFeed);
    CHECK(smpc_objective(s, c) == nmpc_objective(s, c));
  }
}

TEST_CASE("smpc and nmpc moves coincide without noise or variance weight") {
  ControlConfig c = fast_config();
  c.variance_weight = 0.0;
  const MomentState x0 = reference_initial_state();
  const ControlMove a = smpc_step(x0, c, NoiseSpec{0.0, 0.0}, kKernel, kFeed, {});
  const ControlMove b = nmpc_step(x0, c, kKernel, kFeed, {});
  CHECK(std::abs(a.applied - b.applied) <= 1e-3);
  CHECK(a.diagnostics.controls.size() == 3);
  CHECK(a.diagnostics.decision.size() == 3);
}

TEST_CASE("the closed-loop fixed point is reproduced") {
  // constant-policy grid oracle: steady drug mean is linear in s_f
  double best_u = 0.0;
  double best = 1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double s = i * 1e-3;
    const double cost = std::pow(summary(steady_state(s)).mean_drug - 0.2, 2);
    if (cost < best) {
      best = cost;
      best_u = s;
    }
  }
  CHECK(best_u == doctest::Approx(0.2 / 1.056779).epsilon(2e-3));
  const MomentState x = steady_state(0.2 / 1.056779);
  ControlConfig c;
  const ControlMove s = smpc_step(x, c, NoiseSpec{0.0, 0.0}, kKernel, kFeed, {});
  CHECK(std::abs(s.applied - best_u) <= 1e-3);
  const ControlMove n = nmpc_step(x, c, kKernel, kFeed, {});
  CHECK(std::abs(n.applied - best_u) <= 1e-3);
}

TEST_CASE("nmpc flags an unreachable variance band") {
  MomentState x;
  x.values.fill(1.0);  // drug-only particles of unit mass: M02/M00 = 1
  ControlConfig c = fast_config();
  const ControlMove m = nmpc_step(x, c, kKernel, kFeed, {});
  CHECK(m.diagnostics.infeasible);
  CHECK(m.applied >= c.u_lo);
  CHECK(m.applied <= c.u_hi);
  for (const auto& r : m.diagnostics.residuals) CHECK(r.upper > 0.0);
}

TEST_CASE("warm starts and diagnostics") {
  CHECK(shift_warm_start(std::vector<double>{0.1, 0.2, 0.3}) == std::vector<double>{0.2, 0.3, 0.3});
  CHECK(shift_warm_start(std::vector<double>{}).empty());
  ControlConfig c = fast_config();
  const std::vector<double> wrong = {0.1};
  CHECK_THROWS_AS(nmpc_step(reference_initial_state(), c, kKernel, kFeed, wrong), InvalidArgument);

  const ControlMove m =
      smpc_step(reference_initial_state(), c, NoiseSpec{0.1, 0.0}, kKernel, kFeed, {});
  CHECK(m.applied == m.diagnostics.controls[0]);
  const nlohmann::json j = m.diagnostics;
  for (const char* key : {"move", "objective", "residuals", "predicted", "iterations", "infeasible"})
    CHECK(j.contains(key));
}

}  // TEST_SUITE
