// granctl: command-line driver for the granulation moment model, the cNMC
// oracle, PCE validation and closed-loop SMPC/NMPC campaigns.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "granulation/campaign.hpp"
#include "granulation/cnmc.hpp"
#include "granulation/io.hpp"
#include "granulation/moments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace granulation;

namespace {

enum ExitCode { kOk = 0, kRuntimeFailure = 1, kUsage = 2, kIo = 3, kPartial = 4 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string out = "out";
  std::string preset;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--runs", c.runs, "run / replicate / sample count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--preset", c.preset, "named preset")->check(CLI::IsMember({"paper"}));
}

json load_config(const Common& c) {
  if (c.config_path.empty()) return json::object();
  json j = io::read_json(c.config_path);
  if (!j.is_object()) throw io::IoError(c.config_path, "configuration must be a JSON object");
  return j;
}

json section(const json& root, const char* name) {
  return root.contains(name) ? root.at(name) : json::object();
}

void report_ok(const json& body) {
  json out = body;
  out["status"] = "ok";
  std::cout << out.dump(2) << '\n';
}

int report_error(const std::string& kind, const std::string& message, int code,
                 json extra = json::object()) {
  json err{{"status", "error"}, {"error", {{"type", kind}, {"message", message}}}};
  for (auto& [k, v] : extra.items()) err["error"][k] = v;
  std::cerr << err.dump() << '\n';
  return code;
}

std::string run_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%04zu", r);
  return buf;
}

// --- simulate --------------------------------------------------------------

int cmd_simulate(const Common& c) {
  const json root = load_config(c);
  harness::CampaignConfig cfg = root;
  const json sim = section(root, "simulate");
  const double t_end = sim.value("t_end", cfg.total_time);
  const double dt = sim.value("dt", cfg.plant.integrator_dt);
  const int every = sim.value("output_every", 1);
  if (every < 1) throw InvalidArgument("simulate.output_every must be >= 1");

  FeedSchedule schedule = FeedSchedule::constant(cfg.plant.feed);
  if (sim.contains("s_f_schedule")) {
    schedule.segment_length = sim.value("segment_length", cfg.control.sample_time);
    schedule.segments.clear();
    for (double s : sim.at("s_f_schedule").get<std::vector<double>>()) {
      FeedSpec f = cfg.plant.feed;
      f.s_f = s;
      schedule.segments.push_back(f);
    }
  }

  harness::RunRecord record;
  if (t_end == 0.0) {
    record.steps.push_back({0.0, cfg.plant.feed.s_f, cfg.plant.feed.c_f, cfg.plant.x0,
                            summary(cfg.plant.x0)});
  } else {
    const Trajectory traj = integrate(cfg.plant.x0, schedule, cfg.plant.kernel, dt, t_end);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      if (k % static_cast<std::size_t>(every) != 0 && k + 1 != traj.times.size()) continue;
      const FeedSpec& f = schedule.at(traj.times[k]);
      record.steps.push_back({traj.times[k], f.s_f, f.c_f, traj.states[k], summary(traj.states[k])});
    }
  }
  io::ensure_directory(c.out);
  const fs::path csv = fs::path(c.out) / "trajectory.csv";
  io::write_run_csv(csv, record);
  const auto& last = record.steps.back();
  report_ok({{"outputs", {csv.string()}},
             {"final",
              {{"time", last.time},
               {"moments", last.state.values},
               {"mean_drug", last.ratios.mean_drug},
               {"mean_mass", last.ratios.mean_mass},
               {"drug_second", last.ratios.drug_second}}}});
  return kOk;
}

// --- oracle ----------------------------------------------------------------

int cmd_oracle(const Common& c) {
  const json root = load_config(c);
  const harness::CampaignConfig cfg = root;
  const json o = section(root, "oracle");
  const auto particles = o.value("particles", std::size_t{10000});
  const int replicates = c.runs.value_or(o.value("replicates", 20));
  const double t_end = o.value("t_end", 10.0);
  const double interval = o.value("output_interval", 1.0);
  const std::uint64_t seed = c.seed.value_or(o.value("seed", std::uint64_t{1}));
  if (!(interval > 0.0)) throw InvalidArgument("oracle.output_interval must be > 0");

  std::vector<double> times;
  const auto n_out = static_cast<int>(std::floor(t_end / interval + 1e-9));
  for (int k = 0; k <= n_out; ++k) times.push_back(k * interval);
  if (times.back() < t_end - 1e-12) times.push_back(t_end);

  const cnmc::Ensemble init = cnmc::init_monodisperse(particles, o.value("p0", 1.0),
                                                      o.value("s0", 0.1), o.value("c0", 1.0));
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < replicates; ++r) seeds.push_back(harness::derive_seed(seed, r));
  const auto results = cnmc::run_replicates(init, cfg.plant.kernel, t_end, times, seeds);

  io::ensure_directory(c.out);
  const fs::path csv = fs::path(c.out) / "oracle.csv";
  io::write_oracle_csv(csv, results, seeds, particles);

  // replicate mean at t_end next to the closure's prediction
  const FeedSpec batch{0.0, 0.0, 1.0, 0.0};
  const MomentState x0 = cnmc::ensemble_moments(init);
  MomentState ode = x0;
  if (t_end > 0.0)
    ode = integrate(x0, FeedSchedule::constant(batch), cfg.plant.kernel, 0.01 * interval, t_end)
              .states.back();
  std::array<double, 9> mean{};
  for (const auto& rep : results)
    for (std::size_t i = 0; i < 9; ++i) mean[i] += rep.back().moments.values[i] / replicates;
  report_ok({{"outputs", {csv.string()}},
             {"particles", particles},
             {"replicates", replicates},
             {"t_end", t_end},
             {"replicate_mean", mean},
             {"moment_model", ode.values}});
  return kOk;
}

// --- pce-validate ----------------------------------------------------------

int cmd_pce_validate(const Common& c) {
  const json root = load_config(c);
  const harness::CampaignConfig cfg = root;
  const json p = section(root, "pce_validate");
  harness::PceValidationConfig v;
  v.plant = cfg.plant;
  v.plant.feed.s_f = p.value("s_f", cfg.plant.feed.s_f);
  v.sample_time = p.value("sample_time", v.sample_time);
  v.steps = p.value("steps", v.steps);
  v.noise_std = p.value("noise_std", v.noise_std);
  v.quadrature_nodes = p.value("quadrature_nodes", v.quadrature_nodes);
  v.truncation = pce::Truncation::tensor(p.value("degree", v.truncation.degree));
  if (p.value("truncation", std::string("tensor")) == "total_degree")
    v.truncation = pce::Truncation::total(p.value("degree", 2));
  v.samples = c.runs.value_or(p.value("samples", v.samples));
  v.seed = c.seed.value_or(p.value("seed", v.seed));
  v.histogram_bins = p.value("histogram_bins", v.histogram_bins);

  const harness::PceValidationReport report = harness::pce_validation(v);
  io::ensure_directory(c.out);
  std::vector<std::string> outputs;
  const fs::path js = fs::path(c.out) / "pce_validation.json";
  io::write_json(js, report);
  outputs.push_back(js.string());
  for (const auto& s : report.steps) {
    const fs::path h = fs::path(c.out) / ("pce_histogram_step" + std::to_string(s.step) + ".csv");
    std::ofstream out(h);
    if (!out) throw io::IoError(h, "cannot open for writing");
    out.precision(17);
    out << "bin_lo,bin_hi,mc_count,pce_count\n";
    for (std::size_t b = 0; b < s.mc_counts.size(); ++b)
      out << s.bin_edges[b] << ',' << s.bin_edges[b + 1] << ',' << s.mc_counts[b] << ','
          << s.surrogate_counts[b] << '\n';
    if (!out) throw io::IoError(h, "write failed");
    outputs.push_back(h.string());
  }
  json steps = json::array();
  for (const auto& s : report.steps)
    steps.push_back({{"step", s.step},
                     {"mc_mean", s.mc_mean},
                     {"pce_mean", s.pce_mean},
                     {"mc_variance", s.mc_variance},
                     {"pce_variance", s.pce_variance},
                     {"ks_distance", s.ks_distance}});
  report_ok({{"outputs", outputs}, {"steps", steps}});
  return kOk;
}

// --- campaign --------------------------------------------------------------

int cmd_campaign(const Common& c, const std::string& controller) {
  const json root = load_config(c);
  harness::CampaignConfig cfg = root;
  if (!controller.empty()) cfg.controller = harness::controller_from_string(controller);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.runs) cfg.runs = *c.runs;
  cfg.output_dir = c.out;
  cfg.validate();

  const harness::CampaignResult result = harness::run_campaign(cfg);

  const fs::path dir(c.out);
  io::ensure_directory(dir / "runs");
  io::write_json(dir / "config.json", cfg);
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    // file names follow the run index, which differs from r once a run fails
    std::size_t index = r;
    for (const auto& f : result.summary.failures)
      if (static_cast<std::size_t>(f.run) <= index) ++index;
    io::write_run_csv(dir / "runs" / (run_name(index) + ".csv"), result.runs[r]);
    io::write_diagnostics_jsonl(dir / "runs" / (run_name(index) + "_diagnostics.jsonl"),
                                result.runs[r].diagnostics);
  }
  io::write_json(dir / "summary.json", result.summary);
  io::write_histogram_csv(dir / "histogram_drug.csv", result.summary.drug_histogram);
  io::write_histogram_csv(dir / "histogram_mass.csv", result.summary.mass_histogram);

  const auto& s = result.summary;
  json body{{"outputs", {(dir / "summary.json").string(), (dir / "runs").string()}},
            {"controller", harness::to_string(s.controller)},
            {"runs_succeeded", s.runs_succeeded},
            {"runs_failed", s.failures.size()},
            {"drug_mean", s.drug_mean.mean},
            {"drug_variance", s.drug_mean.variance},
            {"mass_mean", s.mass_mean.mean},
            {"overall_violation_frequency", s.overall_violation_frequency}};
  if (s.runs_succeeded == 0)
    return report_error("campaign_failed", "every run failed", kRuntimeFailure,
                        {{"failures", json(s)["failures"]}});
  report_ok(body);
  return s.failures.empty() ? kOk : kPartial;
}

// --- compare ---------------------------------------------------------------

int cmd_compare(const Common& c, const std::string& a, const std::string& b) {
  const harness::CampaignSummary sa = io::read_json(a);
  const harness::CampaignSummary sb = io::read_json(b);
  json report = harness::compare_summaries(sa, sb);
  report["a_path"] = a;
  report["b_path"] = b;
  io::ensure_directory(c.out);
  const fs::path out = fs::path(c.out) / "comparison.json";
  io::write_json(out, report);
  report_ok({{"outputs", {out.string()}},
             {"drug_mean_difference", report["drug_mean_difference"]},
             {"drug_variance_ratio_b_over_a", report["drug_variance_ratio_b_over_a"]}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Granulation moment model, cNMC oracle and SMPC/NMPC campaigns"};
  app.require_subcommand(1);

  Common common;
  std::string controller;
  std::string summary_a;
  std::string summary_b;

  auto* simulate = app.add_subcommand("simulate", "open-loop moment ODE trajectory");
  auto* oracle = app.add_subcommand("oracle", "constant-number Monte Carlo batch replicates");
  auto* pce_validate = app.add_subcommand("pce-validate", "PCE surrogate against direct Monte Carlo");
  auto* campaign = app.add_subcommand("campaign", "closed-loop Monte Carlo campaign");
  auto* compare = app.add_subcommand("compare", "join two campaign summaries");
  for (auto* cmd : {simulate, oracle, pce_validate, campaign, compare}) add_common(cmd, common);
  campaign->add_option("--controller", controller, "smpc or nmpc")
      ->check(CLI::IsMember({"smpc", "nmpc"}));
  compare->add_option("a", summary_a, "first summary.json")->required()->check(CLI::ExistingFile);
  compare->add_option("b", summary_b, "second summary.json")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common);
    if (oracle->parsed()) return cmd_oracle(common);
    if (pce_validate->parsed()) return cmd_pce_validate(common);
    if (campaign->parsed()) return cmd_campaign(common, controller);
    if (compare->parsed()) return cmd_compare(common, summary_a, summary_b);
  } catch (const io::IoError& e) {
    return report_error("io", e.what(), kIo, {{"path", e.path().string()}});
  } catch (const InvalidArgument& e) {
    return report_error("invalid_argument", e.what(), kUsage);
  } catch (const json::exception& e) {
    return report_error("config", e.what(), kUsage);
  } catch (const IntegrationError& e) {
    return report_error("integration", e.what(), kRuntimeFailure, {{"time", e.time()}});
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), kRuntimeFailure);
  }
  return kUsage;
}
