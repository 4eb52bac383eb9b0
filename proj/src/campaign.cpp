#include "granulation/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace granulation::harness {

using nlohmann::json;

std::string to_string(ControllerKind kind) {
  return kind == ControllerKind::smpc ? "smpc" : "nmpc";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "smpc") return ControllerKind::smpc;
  if (name == "nmpc") return ControllerKind::nmpc;
  throw InvalidArgument("unknown controller '" + name + "' (expected smpc or nmpc)");
}

int CampaignConfig::steps() const {
  return static_cast<int>(std::lround(total_time / control.sample_time));
}

void CampaignConfig::validate() const {
  plant.kernel.validate();
  plant.feed.validate();
  noise.validate();
  control.validate();
  if (runs < 1) throw InvalidArgument("campaign: runs must be >= 1");
  if (!(total_time >= 0.0)) throw InvalidArgument("campaign: total time must be >= 0");
  const double ratio = total_time / control.sample_time;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
    throw InvalidArgument("campaign: total time must be a multiple of the sample time");
  if (!(plant.integrator_dt > 0.0)) throw InvalidArgument("campaign: integrator dt must be > 0");
  if (histogram_bins < 1) throw InvalidArgument("campaign: histogram bins must be >= 1");
}

control::ControlConfig CampaignConfig::effective_control() const {
  control::ControlConfig c = control;
  c.integrator_dt = plant.integrator_dt;
  c.u_hi = std::min(c.u_hi, plant.feed.p_f);
  return c;
}

CampaignConfig paper_preset() {
  CampaignConfig c;
  c.plant.kernel = KernelSpec{KernelVariant::constant, 0.06};
  c.plant.feed = FeedSpec{0.5, 1.0, 1.0, 0.1};
  c.plant.x0 = reference_initial_state();
  c.plant.integrator_dt = 0.01;
  c.noise = control::NoiseSpec{0.1, 0.0};
  c.control = control::ControlConfig{};
  c.controller = ControllerKind::smpc;
  c.runs = 100;
  c.total_time = 15.0;
  return c;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run) {
  std::uint64_t z = master + (run + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RunFailure::RunFailure(int step, const std::string& what)
    : std::runtime_error(what), step_(step) {}

RunRecord run_closed_loop(const CampaignConfig& config, std::uint64_t seed) {
  config.validate();
  const control::ControlConfig ctl = config.effective_control();
  const int steps = config.steps();
  const double dt_s = ctl.sample_time;

  RunRecord record;
  record.seed = seed;
  MomentState x = config.plant.x0;
  record.steps.push_back({0.0, config.plant.feed.s_f, config.plant.feed.c_f, x, summary(x)});

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> warm;
  for (int k = 0; k < steps; ++k) {
    control::ControlMove move;
    try {
      move = config.controller == ControllerKind::smpc
                 ? control::smpc_step(x, ctl, config.noise, config.plant.kernel, config.plant.feed,
                                      warm)
                 : control::nmpc_step(x, ctl, config.plant.kernel, config.plant.feed, warm);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "controller failed at step " << k << ": " << e.what();
      throw RunFailure(k, msg.str());
    }
    warm = control::shift_warm_start(move.diagnostics.decision);

    // drawn only after the move is committed
    const double c_f = config.plant.feed.c_f + config.noise.std * normal(rng);
    if (c_f < 0.0) throw RunFailure(k, "realized feed concentration is negative");
    FeedSpec feed = config.plant.feed;
    feed.c_f = c_f;
    feed.s_f = move.applied;
    x = advance(x, feed, config.plant.kernel, config.plant.integrator_dt, dt_s);

    StepRecord row;
    row.time = static_cast<double>(k + 1) * dt_s;
    row.s_f = move.applied;
    row.c_f = c_f;
    row.state = x;
    try {
      row.ratios = summary(x);
    } catch (const std::exception& e) {
      throw RunFailure(k, std::string("plant state degenerate: ") + e.what());
    }
    record.steps.push_back(row);
    record.diagnostics.push_back(std::move(move.diagnostics));
  }
  return record;
}

int Histogram::total() const {
  int t = 0;
  for (int c : counts) t += c;
  return t;
}

namespace {

std::pair<double, double> padded_range(double lo, double hi) {
  if (hi > lo) return {lo, hi};
  const double pad = std::max(1e-12, 1e-6 * std::abs(lo));
  return {lo - pad, hi + pad};
}

void fill_histogram(const std::vector<double>& data, const std::vector<double>& edges,
                    std::vector<int>& counts) {
  const std::size_t bins = edges.size() - 1;
  counts.assign(bins, 0);
  const double lo = edges.front();
  const double width = (edges.back() - lo) / static_cast<double>(bins);
  for (double v : data) {
    auto b = static_cast<long>(std::floor((v - lo) / width));
    b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
}

std::vector<double> equal_edges(double lo, double hi, int bins) {
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
  return edges;
}

}  // namespace

Histogram make_histogram(const std::vector<double>& data, int bins) {
  if (bins < 1) throw InvalidArgument("histogram: bins must be >= 1");
  Histogram h;
  if (data.empty()) {
    h.edges = equal_edges(0.0, 1.0, bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    return h;
  }
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  const auto [lo, hi] = padded_range(*mn, *mx);
  h.edges = equal_edges(lo, hi, bins);
  fill_histogram(data, h.edges, h.counts);
  return h;
}

SampleStats sample_stats(const std::vector<double>& data) {
  SampleStats s;
  s.count = static_cast<int>(data.size());
  if (data.empty()) return s;
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  if (*mn == *mx) {
    s.mean = *mn;
    s.variance_defined = data.size() >= 2;
    return s;
  }
  double sum = 0.0;
  for (double v : data) sum += v;
  s.mean = sum / static_cast<double>(data.size());
  if (data.size() >= 2) {
    double ss = 0.0;
    for (double v : data) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / static_cast<double>(data.size() - 1);
    s.variance_defined = true;
  }
  return s;
}

CampaignSummary summarize(const CampaignConfig& config, const std::vector<RunRecord>& runs,
                          std::vector<RunError> failures) {
  CampaignSummary s;
  s.controller = config.controller;
  s.runs_requested = config.runs;
  s.runs_succeeded = static_cast<int>(runs.size());
  s.final_time = config.total_time;
  s.failures = std::move(failures);

  std::vector<double> drug;
  std::vector<double> mass;
  const int steps = config.steps();
  std::vector<int> violations(static_cast<std::size_t>(steps), 0);
  for (const auto& r : runs) {
    drug.push_back(r.steps.back().ratios.mean_drug);
    mass.push_back(r.steps.back().ratios.mean_mass);
    for (int k = 1; k <= steps && k < static_cast<int>(r.steps.size()); ++k) {
      const double v = r.steps[static_cast<std::size_t>(k)].ratios.drug_second;
      if (v < config.control.var_lo || v > config.control.var_hi)
        ++violations[static_cast<std::size_t>(k - 1)];
    }
    for (const auto& d : r.diagnostics) s.infeasible_moves += d.infeasible ? 1 : 0;
  }
  s.drug_mean = sample_stats(drug);
  s.mass_mean = sample_stats(mass);
  int total = 0;
  for (int k = 0; k < steps; ++k) {
    s.step_times.push_back((k + 1) * config.control.sample_time);
    const double f = runs.empty() ? 0.0
                                  : static_cast<double>(violations[static_cast<std::size_t>(k)]) /
                                        static_cast<double>(runs.size());
    s.violation_frequency.push_back(f);
    total += violations[static_cast<std::size_t>(k)];
  }
  s.overall_violation_frequency =
      runs.empty() || steps == 0
          ? 0.0
          : static_cast<double>(total) / static_cast<double>(runs.size() * steps);
  s.drug_histogram = make_histogram(drug, config.histogram_bins);
  s.mass_histogram = make_histogram(mass, config.histogram_bins);
  return s;
}

CampaignResult run_campaign(const CampaignConfig& config, Exec exec) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.runs);
  std::vector<std::optional<RunRecord>> slots(n);
  std::vector<std::optional<RunError>> errors(n);
  for_each_index(n, exec, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.master_seed, r);
    try {
      slots[r] = run_closed_loop(config, seed);
    } catch (const RunFailure& e) {
      errors[r] = RunError{static_cast<int>(r), seed, e.step(), e.what()};
    } catch (const std::exception& e) {
      errors[r] = RunError{static_cast<int>(r), seed, -1, e.what()};
    }
  });
  CampaignResult result;
  std::vector<RunError> failures;
  for (std::size_t r = 0; r < n; ++r) {
    if (slots[r]) result.runs.push_back(std::move(*slots[r]));
    if (errors[r]) failures.push_back(std::move(*errors[r]));
  }
  result.summary = summarize(config, result.runs, std::move(failures));
  return result;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

PceValidationReport pce_validation(const PceValidationConfig& config, Exec exec) {
  if (config.samples < 2) throw InvalidArgument("pce-validate: need at least two samples");
  if (config.steps < 1) throw InvalidArgument("pce-validate: need at least one step");
  const FeedSpec& feed = config.plant.feed;
  feed.validate();

  control::ControlConfig ctl;
  ctl.horizon = config.steps;
  ctl.sample_time = config.sample_time;
  ctl.quadrature_nodes = config.quadrature_nodes;
  ctl.truncation = config.truncation;
  ctl.integrator_dt = config.plant.integrator_dt;
  ctl.u_hi = feed.p_f;
  const control::PcePredictor predictor(ctl, config.plant.kernel);
  const control::NoiseSpec noise{config.noise_std, 0.0};
  const std::vector<double> controls(static_cast<std::size_t>(config.steps), feed.s_f);

  const auto n = static_cast<std::size_t>(config.samples);
  const auto k_steps = static_cast<std::size_t>(config.steps);

  // Draw every noise vector up front so the parallel and serial paths agree.
  std::mt19937_64 mc_rng(config.seed);
  std::mt19937_64 surrogate_rng(derive_seed(config.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> mc_noise(n * k_steps);
  std::vector<double> surrogate_noise(n * k_steps);
  for (double& w : mc_noise) w = normal(mc_rng);
  for (double& w : surrogate_noise) w = normal(surrogate_rng);

  std::vector<double> mc_values(n * k_steps);
  for_each_index(n, exec, [&](std::size_t i) {
    MomentState x = config.plant.x0;
    for (std::size_t k = 0; k < k_steps; ++k) {
      FeedSpec f = feed;
      f.c_f = feed.c_f + config.noise_std * mc_noise[i * k_steps + k];
      if (f.c_f < 0.0) throw InvalidArgument("pce-validate: sampled feed concentration < 0");
      x = advance(x, f, config.plant.kernel, config.plant.integrator_dt, config.sample_time);
      mc_values[i * k_steps + k] = summary(x).mean_mass;
    }
  });

  std::vector<std::array<pce::PceModel, control::kQuantityCount>> models;
  control::PredictionStats nominal_stats;
  const bool deterministic = config.noise_std == 0.0;
  const auto plan = predictor.plan(config.plant.x0, feed, noise, exec);
  if (deterministic)
    nominal_stats =
        control::build_predictions(config.plant.x0, controls, noise, ctl, config.plant.kernel, feed);
  else
    models = predictor.fit(plan, controls);

  PceValidationReport report;
  for (std::size_t k = 0; k < k_steps; ++k) {
    StepValidation v;
    v.step = static_cast<int>(k + 1);
    v.time = static_cast<double>(k + 1) * config.sample_time;
    std::vector<double> mc(n);
    std::vector<double> sur(n);
    for (std::size_t i = 0; i < n; ++i) mc[i] = mc_values[i * k_steps + k];
    if (deterministic) {
      v.pce_mean = nominal_stats.steps[k].mean[control::kMassMean];
      v.pce_variance = 0.0;
      v.pce_coefficients = {v.pce_mean};
      std::fill(sur.begin(), sur.end(), v.pce_mean);
    } else {
      const pce::PceModel& model = models[k][control::kMassMean];
      v.pce_mean = pce::pce_mean(model);
      v.pce_variance = pce::pce_variance(model);
      v.pce_coefficients = model.coefficients;
      for (std::size_t i = 0; i < n; ++i)
        sur[i] = model.evaluate(std::span<const double>(&surrogate_noise[i * k_steps], k + 1));
    }
    const SampleStats ms = sample_stats(mc);
    const SampleStats ss = sample_stats(sur);
    v.mc_mean = ms.mean;
    v.mc_variance = ms.variance;
    v.mc_standard_error = std::sqrt(ms.variance / static_cast<double>(n));
    v.surrogate_sample_mean = ss.mean;
    v.surrogate_sample_variance = ss.variance;
    v.ks_distance = ks_distance(mc, sur);

    const double lo = std::min(*std::min_element(mc.begin(), mc.end()),
                               *std::min_element(sur.begin(), sur.end()));
    const double hi = std::max(*std::max_element(mc.begin(), mc.end()),
                               *std::max_element(sur.begin(), sur.end()));
    const auto [elo, ehi] = padded_range(lo, hi);
    v.bin_edges = equal_edges(elo, ehi, config.histogram_bins);
    fill_histogram(mc, v.bin_edges, v.mc_counts);
    fill_histogram(sur, v.bin_edges, v.surrogate_counts);
    report.steps.push_back(std::move(v));
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json kernel_json(const KernelSpec& k) { return {{"variant", "constant"}, {"k0", k.k0}}; }

std::string truncation_kind(const pce::Truncation& t) {
  return t.kind == pce::Truncation::Kind::tensor ? "tensor" : "total_degree";
}

pce::Truncation truncation_from(const json& j, const pce::Truncation& fallback) {
  if (!j.is_object()) return fallback;
  const std::string kind = j.value("kind", truncation_kind(fallback));
  const int degree = j.value("degree", fallback.degree);
  if (kind == "tensor") return pce::Truncation::tensor(degree);
  if (kind == "total_degree") return pce::Truncation::total(degree);
  throw InvalidArgument("unknown truncation kind '" + kind + "'");
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

Histogram histogram_from(const json& j) {
  Histogram h;
  h.edges = j.at("edges").get<std::vector<double>>();
  h.counts = j.at("counts").get<std::vector<int>>();
  return h;
}

}  // namespace

void to_json(json& j, const CampaignConfig& c) {
  const auto& ctl = c.control;
  j = json{
      {"plant",
       {{"kernel", kernel_json(c.plant.kernel)},
        {"alpha", c.plant.feed.alpha},
        {"c_f", c.plant.feed.c_f},
        {"p_f", c.plant.feed.p_f},
        {"s_f_initial", c.plant.feed.s_f},
        {"x0", c.plant.x0.values},
        {"integrator_dt", c.plant.integrator_dt}}},
      {"noise", {{"std", c.noise.std}, {"measurement_std", c.noise.measurement_std}}},
      {"control",
       {{"target_drug", ctl.target_drug},
        {"target_mass", ctl.target_mass},
        {"variance_weight", ctl.variance_weight},
        {"epsilon", ctl.epsilon},
        {"var_lo", ctl.var_lo},
        {"var_hi", ctl.var_hi},
        {"horizon", ctl.horizon},
        {"sample_time", ctl.sample_time},
        {"u_lo", ctl.u_lo},
        {"u_hi", ctl.u_hi},
        {"reformulation", control::to_string(ctl.reformulation)},
        {"cost_horizon", ctl.cost_horizon == control::CostHorizon::terminal ? "terminal"
                                                                            : "all_steps"},
        {"move_block", ctl.move_block},
        {"quadrature_nodes", ctl.quadrature_nodes},
        {"truncation", {{"kind", truncation_kind(ctl.truncation)},
                        {"degree", ctl.truncation.degree}}}}},
      {"controller", to_string(c.controller)},
      {"runs", c.runs},
      {"total_time", c.total_time},
      {"seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"histogram_bins", c.histogram_bins}};
}

void from_json(const json& j, CampaignConfig& c) {
  c = paper_preset();
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    if (p.contains("kernel")) {
      const json& k = p.at("kernel");
      if (k.value("variant", std::string("constant")) != "constant")
        throw InvalidArgument("only the constant kernel is supported");
      c.plant.kernel.k0 = k.value("k0", c.plant.kernel.k0);
    }
    c.plant.feed.alpha = p.value("alpha", c.plant.feed.alpha);
    c.plant.feed.c_f = p.value("c_f", c.plant.feed.c_f);
    c.plant.feed.p_f = p.value("p_f", c.plant.feed.p_f);
    c.plant.feed.s_f = p.value("s_f_initial", c.plant.feed.s_f);
    if (p.contains("x0")) {
      const auto x0 = p.at("x0").get<std::vector<double>>();
      if (x0.size() != 9) throw InvalidArgument("plant.x0 needs nine moments");
      std::copy(x0.begin(), x0.end(), c.plant.x0.values.begin());
    }
    c.plant.integrator_dt = p.value("integrator_dt", c.plant.integrator_dt);
  }
  if (j.contains("noise")) {
    c.noise.std = j.at("noise").value("std", c.noise.std);
    c.noise.measurement_std = j.at("noise").value("measurement_std", c.noise.measurement_std);
  }
  if (j.contains("control")) {
    const json& k = j.at("control");
    auto& ctl = c.control;
    ctl.target_drug = k.value("target_drug", ctl.target_drug);
    ctl.target_mass = k.value("target_mass", ctl.target_mass);
    ctl.variance_weight = k.value("variance_weight", ctl.variance_weight);
    ctl.epsilon = k.value("epsilon", ctl.epsilon);
    ctl.var_lo = k.value("var_lo", ctl.var_lo);
    ctl.var_hi = k.value("var_hi", ctl.var_hi);
    ctl.horizon = k.value("horizon", ctl.horizon);
    ctl.sample_time = k.value("sample_time", ctl.sample_time);
    ctl.u_lo = k.value("u_lo", ctl.u_lo);
    ctl.u_hi = k.value("u_hi", ctl.u_hi);
    if (k.contains("reformulation"))
      ctl.reformulation = control::reformulation_from_string(k.at("reformulation"));
    if (k.contains("cost_horizon")) {
      const std::string h = k.at("cost_horizon");
      if (h == "terminal")
        ctl.cost_horizon = control::CostHorizon::terminal;
      else if (h == "all_steps")
        ctl.cost_horizon = control::CostHorizon::all_steps;
      else
        throw InvalidArgument("unknown cost_horizon '" + h + "'");
    }
    ctl.move_block = k.value("move_block", ctl.move_block);
    ctl.quadrature_nodes = k.value("quadrature_nodes", ctl.quadrature_nodes);
    if (k.contains("truncation")) ctl.truncation = truncation_from(k.at("truncation"), ctl.truncation);
  }
  if (j.contains("controller")) c.controller = controller_from_string(j.at("controller"));
  c.runs = j.value("runs", c.runs);
  c.total_time = j.value("total_time", c.total_time);
  c.master_seed = j.value("seed", c.master_seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
}

void to_json(json& j, const CampaignSummary& s) {
  json failures = json::array();
  for (const auto& f : s.failures)
    failures.push_back({{"run", f.run}, {"seed", f.seed}, {"step", f.step}, {"message", f.message}});
  j = json{{"controller", to_string(s.controller)},
           {"runs_requested", s.runs_requested},
           {"runs_succeeded", s.runs_succeeded},
           {"final_time", s.final_time},
           {"means", {{"drug", s.drug_mean.mean}, {"mass", s.mass_mean.mean}}},
           {"variances",
            {{"drug", s.drug_mean.variance},
             {"mass", s.mass_mean.variance},
             {"defined", s.drug_mean.variance_defined}}},
           {"violation_frequency",
            {{"step_times", s.step_times},
             {"per_step", s.violation_frequency},
             {"overall", s.overall_violation_frequency}}},
           {"infeasible_moves", s.infeasible_moves},
           {"histograms",
            {{"drug", histogram_json(s.drug_histogram)}, {"mass", histogram_json(s.mass_histogram)}}},
           {"failures", failures}};
}

void from_json(const json& j, CampaignSummary& s) {
  s.controller = controller_from_string(j.at("controller"));
  s.runs_requested = j.at("runs_requested");
  s.runs_succeeded = j.at("runs_succeeded");
  s.final_time = j.at("final_time");
  const bool defined = j.at("variances").value("defined", false);
  s.drug_mean = {j.at("means").at("drug"), j.at("variances").at("drug"), defined,
                 s.runs_succeeded};
  s.mass_mean = {j.at("means").at("mass"), j.at("variances").at("mass"), defined,
                 s.runs_succeeded};
  const json& v = j.at("violation_frequency");
  s.step_times = v.at("step_times").get<std::vector<double>>();
  s.violation_frequency = v.at("per_step").get<std::vector<double>>();
  s.overall_violation_frequency = v.at("overall");
  s.infeasible_moves = j.value("infeasible_moves", 0);
  s.drug_histogram = histogram_from(j.at("histograms").at("drug"));
  s.mass_histogram = histogram_from(j.at("histograms").at("mass"));
  s.failures.clear();
  for (const auto& f : j.value("failures", json::array()))
    s.failures.push_back({f.at("run"), f.at("seed"), f.at("step"), f.at("message")});
}

void to_json(json& j, const PceValidationReport& r) {
  j = json::array();
  for (const auto& s : r.steps)
    j.push_back({{"step", s.step},
                 {"time", s.time},
                 {"mc_mean", s.mc_mean},
                 {"mc_variance", s.mc_variance},
                 {"mc_standard_error", s.mc_standard_error},
                 {"pce_mean", s.pce_mean},
                 {"pce_variance", s.pce_variance},
                 {"surrogate_sample_mean", s.surrogate_sample_mean},
                 {"surrogate_sample_variance", s.surrogate_sample_variance},
                 {"ks_distance", s.ks_distance},
                 {"pce_coefficients", s.pce_coefficients}});
  j = json{{"quantity", "M10/M00"}, {"steps", j}};
}

json compare_summaries(const CampaignSummary& a, const CampaignSummary& b) {
  const double va = a.drug_mean.variance;
  const double vb = b.drug_mean.variance;
  json out{{"a", a},
           {"b", b},
           {"drug_mean_difference", a.drug_mean.mean - b.drug_mean.mean},
           {"mass_mean_difference", a.mass_mean.mean - b.mass_mean.mean}};
  out["drug_variance_ratio_b_over_a"] =
      va > 0.0 ? json(vb / va) : json(nullptr);
  out["mass_variance_ratio_b_over_a"] =
      a.mass_mean.variance > 0.0 ? json(b.mass_mean.variance / a.mass_mean.variance)
                                 : json(nullptr);
  return out;
}

}  // namespace granulation::harness
