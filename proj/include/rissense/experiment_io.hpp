#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rissense/harness.hpp"

namespace rissense {

/// Library version recorded in run manifests.
const char* library_version();

/// Parses a power with an optional unit: "20dBm", "-70 dBm", "0.1W", "5mW", "3uW".
/// A bare number is read as dBm. Returns dBm. Throws ConfigError on malformed input
/// or a non-positive linear power.
double parse_power_dbm(const std::string& text);

/// Parses an experiment config written in YAML (JSON is accepted as a YAML subset).
/// Missing keys keep their defaults; unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON form of a config. Powers are written in their stored unit with
/// round-trip precision, so parse_config(config_to_json(c)) == c.
std::string config_to_json(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical JSON form.
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Evenly spaced grid from `from` to `to` inclusive; integer axes are rounded.
std::vector<double> linear_grid(double from, double to, int points, SweepAxis axis);

/// RFC-4180 CSV (CRLF line ends) with one row per grid point. Empirical columns are
/// empty when the point has no simulation overlay.
std::string curve_csv(const CurveOutput& curve);

/// Per-realization solver diagnostics of one curve.
std::string realizations_csv(const CurveOutput& curve);

/// Convergence traces as CSV: realization, channel_seed, iteration, objective, pd.
std::string convergence_csv(const std::vector<ConvergenceTrace>& traces);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional error bars; empty draws a plain line
  bool markers_only = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool unit_y_range = true;  // fix the y axis to [0, 1]
};

/// Self-contained SVG line chart.
std::string svg_plot(const PlotSpec& plot);

/// Writes the CSVs, an optional plot and a JSON manifest of one sweep into cfg.output_dir.
/// Returns the written paths. Throws ConfigError if the directory is not writable.
std::vector<std::string> write_experiment(const ExperimentOutput& out);

struct FigureSeries {
  std::string label;
  ExperimentConfig config;  // convergence figures use base, algorithms[0] and realizations
};

struct FigureSpec {
  int number = 0;
  std::string title;
  bool convergence = false;
  std::vector<FigureSeries> series;
};

/// Desk-scale reproduction settings of figures 3 to 12. Throws ConfigError otherwise.
FigureSpec figure_spec(int number);

/// Applies command-line overrides to every series of a figure.
struct FigureOverrides {
  int realizations = 0;  // 0 keeps the figure default
  long trials = -1;      // negative keeps the figure default
  int threads = -1;
  std::string output_dir;
  bool emit_plots = false;
};
void apply_overrides(FigureSpec& spec, const FigureOverrides& o);

struct FigureOutput {
  FigureSpec spec;
  std::vector<ExperimentOutput> sweeps;                 // sweep figures, one per series
  std::vector<std::vector<ConvergenceTrace>> traces;    // convergence figures, one per series
};

FigureOutput run_figure(const FigureSpec& spec);

/// Writes CSVs (one per series and algorithm), an optional plot and a manifest into `dir`.
std::vector<std::string> write_figure(const FigureOutput& out, const std::string& dir,
                                      bool emit_plots);

}  // namespace rissense
