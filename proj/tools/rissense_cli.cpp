#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rissense/experiment_io.hpp"
#include "rissense/harness.hpp"
#include "rissense/passive_opt.hpp"
#include "rissense/sizing.hpp"
#include "rissense/validation.hpp"

using namespace rissense;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Flags {
  std::string config;
  std::string algorithm;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> noise_seed;
  std::optional<int> antennas;
  std::optional<int> elements;
  std::string axis;
  std::string from;
  std::string to;
  std::optional<int> points;
  std::optional<long> trials;
  std::optional<int> realizations;
  std::optional<int> threads;
  std::string out;
  bool emit_plots = false;
  std::optional<int> figure;
  bool realized = false;
  std::vector<int> criteria;
  bool verbose = false;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      items.push_back(item);
    }
  }
  return items;
}

bool is_power_axis(SweepAxis a) {
  return a == SweepAxis::TransmitPower || a == SweepAxis::RisPower || a == SweepAxis::TotalPower;
}

double parse_axis_value(const std::string& text, SweepAxis axis) {
  if (is_power_axis(axis)) {
    return parse_power_dbm(text);
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) {
      throw ConfigError("");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("not a number for axis " + to_string(axis) + ": '" + text + "'");
  }
}

ExperimentConfig base_config(const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  Scenario& sc = cfg.base;
  if (f.seed) {
    sc.channel_seed = *f.seed;
  }
  if (f.noise_seed) {
    sc.noise_seed = *f.noise_seed;
  }
  if (f.antennas) {
    sc.antennas = *f.antennas;
  }
  if (f.elements) {
    sc.elements = *f.elements;
  }
  if (!f.algorithm.empty()) {
    cfg.algorithms.clear();
    for (const std::string& name : split_list(f.algorithm)) {
      cfg.algorithms.push_back(parse_algorithm(name));
    }
    if (cfg.algorithms.empty()) {
      throw ConfigError("--algorithm: no algorithm given");
    }
    sc.algorithm = cfg.algorithms.front();
  }
  return cfg;
}

Json complex_array(const ComplexVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back({v[i].real(), v[i].imag()});
  }
  return a;
}

Json real_array(const RealVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(v[i]);
  }
  return a;
}

int run_solve(const Flags& f) {
  const ExperimentConfig cfg = base_config(f);
  Scenario sc = cfg.base;
  sc.validate();
  const ChannelRealization ch = sc.channels();
  const SensingSolution sol = solve_scenario(sc, ch, cfg.active);
  const SolveDiagnostics& d = sol.diagnostics;
  Json j;
  j["algorithm"] = to_string(sc.algorithm);
  j["antennas"] = sc.antennas;
  j["elements"] = sc.elements;
  j["channel_seed"] = sc.channel_seed;
  j["pd"] = sol.pd;
  j["pf"] = sol.pf;
  j["epsilon"] = sol.epsilon;
  j["gamma"] = sol.gamma;
  j["w"] = complex_array(sol.w);
  j["theta"] = real_array(sol.theta);
  j["rho"] = real_array(sol.rho);
  j["diagnostics"] = {{"iterations", d.iterations},
                      {"converged", d.converged},
                      {"warnings", d.warnings},
                      {"objective_history", d.objective_history},
                      {"t_lo", d.t_lo},
                      {"t_hi", d.t_hi},
                      {"power_with_t", d.power_with_t},
                      {"power_with_pd", d.power_with_pd},
                      {"rank_one_gap", d.rank_one_gap}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_figure_command(const Flags& f) {
  FigureSpec spec = figure_spec(*f.figure);
  FigureOverrides o;
  o.realizations = f.realizations.value_or(0);
  o.trials = f.trials.value_or(-1);
  o.threads = f.threads.value_or(-1);
  o.output_dir = f.out;
  o.emit_plots = f.emit_plots;
  apply_overrides(spec, o);
  for (const FigureSeries& s : spec.series) {
    s.config.validate();
  }
  const FigureOutput out = run_figure(spec);
  for (const std::string& path : write_figure(out, f.out.empty() ? "out" : f.out, f.emit_plots)) {
    std::cout << path << '\n';
  }
  return kExitOk;
}

int run_sweep(const Flags& f) {
  if (f.figure) {
    return run_figure_command(f);
  }
  ExperimentConfig cfg = base_config(f);
  if (!f.axis.empty()) {
    cfg.axis = parse_axis(f.axis);
  }
  const bool any_range = !f.from.empty() || !f.to.empty() || f.points.has_value();
  if (any_range) {
    if (f.from.empty() || f.to.empty() || !f.points) {
      throw ConfigError("--from, --to and --points must be given together");
    }
    cfg.grid = linear_grid(parse_axis_value(f.from, cfg.axis), parse_axis_value(f.to, cfg.axis),
                           *f.points, cfg.axis);
  }
  if (f.trials) {
    cfg.trials = *f.trials;
  }
  if (f.realizations) {
    cfg.realizations = *f.realizations;
  }
  if (f.threads) {
    cfg.threads = *f.threads;
  }
  if (!f.out.empty()) {
    cfg.output_dir = f.out;
  }
  cfg.emit_plots = cfg.emit_plots || f.emit_plots;
  cfg.validate();
  const ExperimentOutput out = run_experiment(cfg);
  for (const std::string& path : write_experiment(out)) {
    std::cout << path << '\n';
  }
  return kExitOk;
}

int run_size(const Flags& f) {
  const ExperimentConfig cfg = base_config(f);
  const Scenario& sc = cfg.base;
  sc.validate();
  SizingInputs s;
  std::string source;
  if (f.realized) {
    s = SizingInputs::from_channels(sc.channels(), sc.prm);
    source = "worst element of the drawn single-antenna channel";
  } else {
    s = SizingInputs::from_geometry(sc.geometry, sc.antennas, sc.prm);
    source = "path loss of the geometry with the array gain on the RIS-ST link";
  }
  const long n_pas = min_elements_passive(s);
  const long n_act = min_elements_active(s);
  const long n_cmp = std::max(1L, n_act);
  const Comparison cmp = compare_active_passive(s, n_cmp, n_pas);
  const Comparison equal = compare_active_passive(s, n_pas, n_pas);
  auto verdict = [](Verdict v) { return v == Verdict::ActiveWins ? "active" : "passive"; };

  Json j;
  j["antennas"] = sc.antennas;
  j["magnitudes"] = {{"source", source}, {"h_min", s.h_min}, {"hr_min", s.hr_min}};
  j["target_pd"] = near_certain_detection();
  j["passive"] = {{"elements", n_pas},
                  {"bound", min_elements_passive_bound(s)},
                  {"pd", pd_passive_uniform(s, n_pas)}};
  j["active"] = {{"elements", n_act},
                 {"bound", min_elements_active_bound(s)},
                 {"pd", pd_active_uniform(s, n_act)},
                 {"amplification", optimal_uniform_amplification(s, n_cmp)}};
  j["comparison"] = {{"active_elements", n_cmp},
                     {"passive_elements", n_pas},
                     {"better", verdict(cmp.verdict)},
                     {"sufficient_condition", cmp.sufficient_condition},
                     {"amplifying", cmp.amplifying}};
  j["equal_elements"] = {{"elements", n_pas},
                         {"better", verdict(equal.verdict)},
                         {"amplifying", equal.amplifying}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_validate(const Flags& f) {
  ValidationOptions opt;
  opt.only = f.criteria;
  opt.figure_dir = f.out;
  opt.emit_plots = f.emit_plots;
  opt.verbose = f.verbose;
  for (int id : opt.only) {
    if (id < 1 || id > 10) {
      throw ConfigError("--criteria: ids must lie between 1 and 10");
    }
  }
  bool all = true;
  for (const CriterionResult& r : run_validation(opt)) {
    std::cout << format_result(r) << std::endl;
    all = all && r.passed;
  }
  return all ? kExitOk : kExitValidationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrum sensing with passive and active reconfigurable intelligent surfaces"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);
  Flags f;

  auto add_scenario = [&f](CLI::App* c) {
    c->add_option("--config", f.config, "experiment config (YAML or JSON)");
    c->add_option("--algorithm", f.algorithm,
                  "passive, active1, active2 or no-ris; comma-separated for sweeps");
    c->add_option("--seed", f.seed, "channel seed");
    c->add_option("--noise-seed", f.noise_seed, "Monte Carlo noise seed");
    c->add_option("--antennas", f.antennas, "receive antennas M");
    c->add_option("--elements", f.elements, "RIS elements N");
  };

  CLI::App* solve = app.add_subcommand("solve", "design one scenario and print the solution as JSON");
  add_scenario(solve);

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep or a figure reproduction");
  add_scenario(sweep);
  sweep->add_option("--axis", f.axis,
                    "N, M, tau, p, p_ris_max, pathloss_exponent, p_total or distance");
  sweep->add_option("--from", f.from, "first grid value (powers accept dBm, W, mW, ...)");
  sweep->add_option("--to", f.to, "last grid value");
  sweep->add_option("--points", f.points, "grid points");
  sweep->add_option("--trials", f.trials, "Monte Carlo trials per grid point (0 disables)");
  sweep->add_option("--realizations", f.realizations, "channel realizations per grid point");
  sweep->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  sweep->add_option("--out", f.out, "output directory");
  sweep->add_flag("--emit-plots", f.emit_plots, "write SVG plots");
  sweep->add_option("--figure", f.figure, "reproduce figure 3 to 12")->check(CLI::Range(3, 12));

  CLI::App* size = app.add_subcommand("size", "element counts for near-certain detection");
  add_scenario(size);
  size->add_flag("--realized", f.realized,
                 "use the worst element of a drawn single-antenna channel instead of path loss");

  CLI::App* validate = app.add_subcommand("validate", "run the acceptance suite");
  validate->add_option("--criteria", f.criteria, "criterion ids to run (default: all)")
      ->delimiter(',');
  validate->add_option("--out", f.out, "write the figure suite outputs here");
  validate->add_flag("--emit-plots", f.emit_plots, "write SVG plots of the figure suite");
  validate->add_flag("--verbose", f.verbose, "print per-check details to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*solve) {
      return run_solve(f);
    }
    if (*sweep) {
      return run_sweep(f);
    }
    if (*size) {
      return run_size(f);
    }
    return run_validate(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
}
