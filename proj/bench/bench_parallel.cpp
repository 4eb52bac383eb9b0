// Serial reference vs OpenMP kernel timings. Each kernel is run both ways and
// the outputs are compared for bitwise equality.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>

#include "CLI11.hpp"

#include "granulation/campaign.hpp"
#include "granulation/cnmc.hpp"
#include "granulation/controller.hpp"

using namespace granulation;

namespace {

template <typename F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s serial %9.4fs  openmp %9.4fs  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP benchmark"};
  int repeats = 3;
  int runs = 8;
  app.add_option("--repeats", repeats, "timed repetitions per kernel (best is kept)");
  app.add_option("--runs", runs, "closed-loop runs in the campaign kernel");
  CLI11_PARSE(app, argc, argv);

  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  const KernelSpec kernel{KernelVariant::constant, 0.06};
  bool all_same = true;

  {
    const cnmc::Ensemble start = cnmc::init_monodisperse(10000, 1.0, 0.1, 1.0);
    const std::vector<double> times = {5.0, 10.0};
    std::vector<std::uint64_t> seeds(16);
    std::iota(seeds.begin(), seeds.end(), 1);
    std::vector<std::vector<cnmc::Snapshot>> a, b;
    const double ts = best_of(repeats, [&] {
      a = cnmc::run_replicates(start, kernel, 10.0, times, seeds, Exec::serial);
    });
    const double tp = best_of(repeats, [&] {
      b = cnmc::run_replicates(start, kernel, 10.0, times, seeds, Exec::parallel);
    });
    bool same = true;
    for (std::size_t r = 0; r < a.size(); ++r)
      for (std::size_t k = 0; k < times.size(); ++k) same = same && a[r][k].moments == b[r][k].moments;
    report("cnmc replicates (16 x 1e4)", ts, tp, same);
    all_same = all_same && same;
  }

  {
    control::ControlConfig cfg;
    const control::PcePredictor predictor(cfg, kernel);
    const FeedSpec feed{0.5, 1.0, 1.0, 0.1};
    const control::NoiseSpec noise{0.1, 0.0};
    const MomentState x0 = reference_initial_state();
    control::PredictionPlan a, b;
    const double ts = best_of(repeats, [&] { a = predictor.plan(x0, feed, noise, Exec::serial); });
    const double tp = best_of(repeats, [&] { b = predictor.plan(x0, feed, noise, Exec::parallel); });
    const std::vector<double> u = {0.2, 0.3, 0.1};
    const auto sa = predictor.predict(a, u);
    const auto sb = predictor.predict(b, u);
    bool same = true;
    for (std::size_t k = 0; k < sa.steps.size(); ++k)
      for (std::size_t q = 0; q < control::kQuantityCount; ++q)
        same = same && sa.steps[k].mean[q] == sb.steps[k].mean[q] &&
               sa.steps[k].variance[q] == sb.steps[k].variance[q];
    report("predictor plan (horizon 3)", ts, tp, same);
    all_same = all_same && same;

    control::PredictionStats da, db;
    const double ds = best_of(repeats, [&] { da = predictor.predict_direct(x0, u, feed, noise, Exec::serial); });
    const double dp = best_of(repeats, [&] { db = predictor.predict_direct(x0, u, feed, noise, Exec::parallel); });
    bool dsame = true;
    for (std::size_t k = 0; k < da.steps.size(); ++k)
      for (std::size_t q = 0; q < control::kQuantityCount; ++q)
        dsame = dsame && da.steps[k].mean[q] == db.steps[k].mean[q];
    report("predictor direct", ds, dp, dsame);
    all_same = all_same && dsame;
  }

  {
    harness::PceValidationConfig v;
    harness::PceValidationReport a, b;
    const double ts = best_of(repeats, [&] { a = harness::pce_validation(v, Exec::serial); });
    const double tp = best_of(repeats, [&] { b = harness::pce_validation(v, Exec::parallel); });
    bool same = true;
    for (std::size_t k = 0; k < a.steps.size(); ++k)
      same = same && a.steps[k].mc_mean == b.steps[k].mc_mean && a.steps[k].ks_distance == b.steps[k].ks_distance;
    report("pce validation (1e4 MC)", ts, tp, same);
    all_same = all_same && same;
  }

  {
    harness::CampaignConfig c = harness::paper_preset();
    c.runs = runs;
    c.plant.integrator_dt = 0.05;
    harness::CampaignResult a, b;
    const double ts = best_of(1, [&] { a = harness::run_campaign(c, Exec::serial); });
    const double tp = best_of(1, [&] { b = harness::run_campaign(c, Exec::parallel); });
    const bool same = a.summary.drug_mean.mean == b.summary.drug_mean.mean &&
                      a.summary.drug_mean.variance == b.summary.drug_mean.variance;
    report(("smpc campaign (" + std::to_string(runs) + " runs)").c_str(), ts, tp, same);
    all_same = all_same && same;
  }
  return all_same ? 0 : 1;
}
