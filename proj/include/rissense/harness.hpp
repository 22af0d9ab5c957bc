#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rissense/active_opt.hpp"
#include "rissense/channel.hpp"
#include "rissense/detector.hpp"

namespace rissense {

/// Invalid experiment or scenario configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Algorithm { Passive, ActiveOneStage, ActiveTwoStage, NoRis };

std::string to_string(Algorithm a);
/// Accepts passive, active1 / one-stage, active2 / two-stage, none / no-ris.
Algorithm parse_algorithm(const std::string& name);
bool is_active(Algorithm a);

struct Scenario {
  SystemGeometry geometry;
  FadingModel fading;
  int antennas = 8;
  int elements = 6;
  SensingParams prm;
  Algorithm algorithm = Algorithm::Passive;
  std::uint64_t channel_seed = 1;
  std::uint64_t noise_seed = 2;

  /// Throws ConfigError on invalid dimensions or parameters.
  void validate() const;
  [[nodiscard]] ChannelRealization channels() const;
  bool operator==(const Scenario&) const = default;
};

/// Runs the scenario's algorithm on one realization.
SensingSolution solve_scenario(const Scenario& sc, const ChannelRealization& ch,
                               const ActiveOptions& opt = {});

enum class SampleModel {
  Projected,   // draw the combiner output y(i) directly from its exact scalar distribution
  FullVector,  // draw s(i), n(i) and z(i) and apply the combiner
};

std::string to_string(SampleModel m);
SampleModel parse_sample_model(const std::string& name);

struct MonteCarloResult {
  long trials = 0;
  double empirical_pf = 0.0;
  double empirical_pd = 0.0;
  double stderr_pf = 0.0;
  double stderr_pd = 0.0;
  // Sample moments of the test statistic across trials.
  double mean_h0 = 0.0;
  double var_h0 = 0.0;
  double mean_h1 = 0.0;
  double var_h1 = 0.0;
  // Full-vector active runs only: per-sample RIS output power under H1, averaged.
  double ris_output_power = 0.0;
  double ris_output_power_stderr = 0.0;
};

/// Binomial standard error sqrt(r (1 - r) / trials).
double binomial_stderr(double rate, long trials);

/// Simulates `trials` sensing periods of I samples under each hypothesis with the
/// designed threshold and counts decisions. Deterministic in sc.noise_seed and `stream`.
MonteCarloResult run_monte_carlo(const Scenario& sc, const ChannelRealization& ch,
                                 const SensingSolution& sol, long trials,
                                 SampleModel model = SampleModel::Projected,
                                 std::uint64_t stream = 0);

/// H0 trials only (the H1 fields of the result stay zero). Same H0 draws as run_monte_carlo.
MonteCarloResult run_false_alarm_trials(const Scenario& sc, const ChannelRealization& ch,
                                        const SensingSolution& sol, long trials,
                                        std::uint64_t stream = 0);

/// Same, with the channel drawn from sc.channel_seed.
MonteCarloResult run_monte_carlo(const Scenario& sc, const SensingSolution& sol, long trials);

enum class SweepAxis {
  Elements,          // N
  Antennas,          // M
  Tau,               // sensing time, seconds
  TransmitPower,     // p, dBm
  RisPower,          // p_ris_max, dBm
  PathlossExponent,  // PT-ST exponent
  TotalPower,        // P_T, dBm; element counts follow from the power model
  Distance,          // RIS-ST distance, metres
};

std::string to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

struct ExperimentConfig {
  std::string name = "sweep";
  Scenario base;
  std::vector<Algorithm> algorithms{Algorithm::Passive};
  SweepAxis axis = SweepAxis::Elements;
  std::vector<double> grid;
  int realizations = 20;
  long trials = 0;  // empirical trials per grid point; 0 disables the simulation overlay
  SampleModel sample_model = SampleModel::Projected;
  int threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "out";
  bool emit_plots = false;
  double p_c_dbm = -10.0;   // per-element control power (total-power axis)
  double p_dc_dbm = -5.0;   // per-element amplifier bias power (total-power axis)
  ActiveOptions active;

  /// Throws ConfigError on empty/non-monotone grid, bad counts or invalid base scenario.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

struct RealizationRecord {
  std::uint64_t channel_seed = 0;
  double pd = 0.0;
  int iterations = 0;
  bool converged = false;
  int warnings = 0;
};

struct CurvePoint {
  double axis_value = 0.0;
  int elements = 0;  // N actually used (differs from the base on the total-power axis)
  double analytic_pf = 0.0;
  double analytic_pd = 0.0;
  bool has_empirical = false;
  double empirical_pf = 0.0;
  double empirical_pd = 0.0;
  double stderr_pf = 0.0;
  double stderr_pd = 0.0;
  int realizations = 0;
  long trials = 0;
  std::vector<RealizationRecord> records;
};

struct CurveOutput {
  Algorithm algorithm = Algorithm::Passive;
  SweepAxis axis = SweepAxis::Elements;
  std::vector<CurvePoint> points;
};

struct ExperimentOutput {
  ExperimentConfig config;
  std::vector<CurveOutput> curves;  // one per algorithm, in config order
};

/// Scenario of one grid point (axis value applied to the base, algorithm set).
Scenario scenario_at(const ExperimentConfig& cfg, Algorithm algorithm, double axis_value);

/// Runs every (grid point, algorithm, realization) on a worker pool and merges in grid order.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

struct ConvergenceTrace {
  std::uint64_t channel_seed = 0;
  std::vector<double> objective;  // per outer iteration
  // One-stage: Pd implied by each objective value. Two-stage: the feasible lower
  // bracket of the bisection after each step.
  std::vector<double> pd;
};

/// Per-iteration progress of an active algorithm on `realizations` channel draws.
std::vector<ConvergenceTrace> run_convergence(const Scenario& sc, int realizations,
                                              const ActiveOptions& opt = {});

}  // namespace rissense
