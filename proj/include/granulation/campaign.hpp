#ifndef GRANULATION_CAMPAIGN_HPP_
#define GRANULATION_CAMPAIGN_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "granulation/controller.hpp"
#include "granulation/moments.hpp"
#include "granulation/parallel.hpp"

namespace granulation::harness {

enum class ControllerKind { smpc, nmpc };

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

/// The simulated process: the moment ODE driven by the noisy feed.
struct PlantSettings {
  KernelSpec kernel;
  FeedSpec feed{0.5, 1.0, 1.0, 0.1};  // c_f is the nominal concentration, s_f the pre-control feed
  MomentState x0 = reference_initial_state();
  double integrator_dt = 0.01;
};

struct CampaignConfig {
  PlantSettings plant;
  control::NoiseSpec noise;
  control::ControlConfig control;
  ControllerKind controller = ControllerKind::smpc;
  int runs = 100;
  double total_time = 15.0;
  std::uint64_t master_seed = 20190101;
  std::string output_dir = "out";
  int histogram_bins = 20;

  void validate() const;
  int steps() const;
  /// Controller settings with the plant's integrator step and feed-mass cap applied.
  control::ControlConfig effective_control() const;
};

/// Settings used for all published closed-loop experiments.
CampaignConfig paper_preset();

/// Per-run seed derived from the master seed (SplitMix64 of master + run).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run);

struct StepRecord {
  double time = 0.0;
  double s_f = 0.0;  // move applied over the interval ending at `time`
  double c_f = 0.0;  // realized feed concentration over that interval
  MomentState state;
  Summary ratios;
};

/// One closed-loop trajectory. Row 0 is the initial state with the
/// pre-control feed; row k >= 1 is the state after the k-th move.
struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<control::StepDiagnostics> diagnostics;  // one per move
};

/// A closed-loop run stopped early.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(int step, const std::string& what);
  int step() const { return step_; }

 private:
  int step_;
};

RunRecord run_closed_loop(const CampaignConfig& config, std::uint64_t seed);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<int> counts;

  int total() const;
};

/// Equal-width bins spanning [min, max] of the data (widened when degenerate).
Histogram make_histogram(const std::vector<double>& data, int bins);

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 with variance_defined = false for n < 2
  bool variance_defined = false;
  int count = 0;
};

SampleStats sample_stats(const std::vector<double>& data);

struct RunError {
  int run = 0;
  std::uint64_t seed = 0;
  int step = -1;
  std::string message;
};

struct CampaignSummary {
  ControllerKind controller = ControllerKind::smpc;
  int runs_requested = 0;
  int runs_succeeded = 0;
  double final_time = 0.0;
  SampleStats drug_mean;  // M01/M00 at final time across runs
  SampleStats mass_mean;  // M10/M00 at final time across runs
  std::vector<double> step_times;            // t_1 .. t_K
  std::vector<double> violation_frequency;   // per step: M02/M00 outside [p1*, p2*]
  double overall_violation_frequency = 0.0;
  int infeasible_moves = 0;
  Histogram drug_histogram;
  Histogram mass_histogram;
  std::vector<RunError> failures;
};

CampaignSummary summarize(const CampaignConfig& config, const std::vector<RunRecord>& runs,
                          std::vector<RunError> failures = {});

struct CampaignResult {
  std::vector<RunRecord> runs;  // successful runs in run-index order
  CampaignSummary summary;
};

/// All runs with derived seeds, concurrently under Exec::parallel. Failed runs
/// are listed in the summary; statistics cover the successes.
CampaignResult run_campaign(const CampaignConfig& config, Exec exec = Exec::parallel);

struct PceValidationConfig {
  PlantSettings plant;   // feed.s_f held fixed
  double sample_time = 0.25;
  int steps = 3;
  double noise_std = 0.1;
  int quadrature_nodes = 6;
  pce::Truncation truncation = pce::Truncation::tensor(2);
  int samples = 10000;
  std::uint64_t seed = 7;
  int histogram_bins = 40;
};

struct StepValidation {
  int step = 0;
  double time = 0.0;
  double mc_mean = 0.0;
  double mc_variance = 0.0;
  double mc_standard_error = 0.0;
  double pce_mean = 0.0;
  double pce_variance = 0.0;
  double surrogate_sample_mean = 0.0;
  double surrogate_sample_variance = 0.0;
  double ks_distance = 0.0;
  std::vector<double> bin_edges;
  std::vector<int> mc_counts;
  std::vector<int> surrogate_counts;
  std::vector<double> pce_coefficients;
};

struct PceValidationReport {
  std::vector<StepValidation> steps;
};

/// Direct Monte Carlo of M10/M00 against the Hermite surrogate at each step.
PceValidationReport pce_validation(const PceValidationConfig& config, Exec exec = Exec::parallel);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_distance(std::vector<double> a, std::vector<double> b);

// JSON forms. Config readers fill absent keys from the preset.
void to_json(nlohmann::json& j, const CampaignConfig& c);
void from_json(const nlohmann::json& j, CampaignConfig& c);
void to_json(nlohmann::json& j, const CampaignSummary& s);
void from_json(const nlohmann::json& j, CampaignSummary& s);
void to_json(nlohmann::json& j, const PceValidationReport& r);

/// Joins two campaign summaries (typically SMPC and NMPC) into one report.
nlohmann::json compare_summaries(const CampaignSummary& a, const CampaignSummary& b);

}  // namespace granulation::harness

#endif  // GRANULATION_CAMPAIGN_HPP_
