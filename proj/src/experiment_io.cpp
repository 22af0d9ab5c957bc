#include "rissense/experiment_io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rissense/rng.hpp"

#ifndef RISSENSE_VERSION
#define RISSENSE_VERSION "0.0.0"
#endif

namespace rissense {

using nlohmann::ordered_json;

const char* library_version() { return RISSENSE_VERSION; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + text + "' is not a number");
  }
  if (used != t.size() || !std::isfinite(value)) {
    throw ConfigError(what + ": '" + text + "' is not a finite number");
  }
  return value;
}

}  // namespace

double parse_power_dbm(const std::string& text) {
  const std::string t = trim(text);
  std::size_t split = t.size();
  while (split > 0 && std::isalpha(static_cast<unsigned char>(t[split - 1]))) {
    --split;
  }
  const std::string unit = t.substr(split);
  const std::string number = trim(t.substr(0, split));
  if (number.empty()) {
    throw ConfigError("power '" + text + "' has no value");
  }
  const double value = parse_number(number, "power");
  if (unit.empty() || unit == "dBm" || unit == "dbm") {
    return value;
  }
  static const std::map<std::string, double> linear{
      {"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9}, {"pW", 1e-12}};
  const auto it = linear.find(unit);
  if (it == linear.end()) {
    throw ConfigError("power '" + text + "': unknown unit '" + unit + "'");
  }
  if (!(value > 0.0)) {
    throw ConfigError("power '" + text + "' must be positive");
  }
  return watts_to_dbm(value * it->second);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) {
      throw ConfigError(path_ + ": expected a mapping");
    }
  }

  [[nodiscard]] bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_[key] && !node_[key].IsNull();
  }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    return node_ ? node_[key] : YAML::Node();
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) {
      return;
    }
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(name(key) + ": invalid value");
    }
  }

  void read_number(const std::string& key, double& out) {
    if (!has(key)) {
      return;
    }
    out = parse_number(scalar(key), name(key));
  }

  void read_power_dbm(const std::string& key, double& dbm) {
    if (has(key)) {
      dbm = parse_power_dbm(scalar(key));
    }
  }

  // Stored in watts; a unit-less number is dBm, a "W" suffix keeps the exact value.
  void read_power_watts(const std::string& key, double& watts) {
    if (!has(key)) {
      return;
    }
    const std::string text = trim(scalar(key));
    if (text.size() > 1 && text.back() == 'W' &&
        (std::isdigit(static_cast<unsigned char>(text[text.size() - 2])) ||
         text[text.size() - 2] == ' ' || text[text.size() - 2] == '.')) {
      const double w = parse_number(text.substr(0, text.size() - 1), name(key));
      if (!(w >= 0.0)) {
        throw ConfigError(name(key) + ": power must be nonnegative");
      }
      watts = w;
      return;
    }
    watts = dbm_to_watts(parse_power_dbm(text));
  }

  void finish() const {
    if (!node_) {
      return;
    }
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + name(key) + "'");
      }
    }
  }

 private:
  std::string scalar(const std::string& key) {
    const YAML::Node n = node_[key];
    if (!n.IsScalar()) {
      throw ConfigError(name(key) + ": expected a scalar");
    }
    return n.Scalar();
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Point2 read_point(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 2) {
    throw ConfigError(what + ": expected [x, y]");
  }
  try {
    return {n[0].as<double>(), n[1].as<double>()};
  } catch (const YAML::Exception&) {
    throw ConfigError(what + ": expected [x, y]");
  }
}

void read_scenario(Section sec, Scenario& sc) {
  sec.read("antennas", sc.antennas);
  sec.read("elements", sc.elements);
  if (sec.has("algorithm")) {
    sc.algorithm = parse_algorithm(sec.get("algorithm").as<std::string>());
  }
  sec.read("channel_seed", sc.channel_seed);
  sec.read("noise_seed", sc.noise_seed);

  Section geo(sec.get("geometry"), sec.name("geometry"));
  if (geo.has("pt")) {
    sc.geometry.pt_pos = read_point(geo.get("pt"), geo.name("pt"));
  }
  if (geo.has("ris")) {
    sc.geometry.ris_pos = read_point(geo.get("ris"), geo.name("ris"));
  }
  if (geo.has("st")) {
    sc.geometry.st_pos = read_point(geo.get("st"), geo.name("st"));
  }
  geo.read_number("beta_pt_ris", sc.geometry.beta_pt_ris);
  geo.read_number("beta_ris_st", sc.geometry.beta_ris_st);
  geo.read_number("beta_pt_st", sc.geometry.beta_pt_st);
  geo.read_number("a0_db", sc.geometry.a0_db);
  geo.read_number("d0", sc.geometry.d0);
  geo.finish();

  Section fad(sec.get("fading"), sec.name("fading"));
  if (fad.has("kind")) {
    const std::string kind = fad.get("kind").as<std::string>();
    if (kind == "rayleigh") {
      sc.fading.kind = FadingKind::Rayleigh;
    } else if (kind == "rician") {
      sc.fading.kind = FadingKind::Rician;
    } else {
      throw ConfigError(fad.name("kind") + ": expected rayleigh or rician");
    }
  }
  fad.read_number("rician_factor_db", sc.fading.rician_factor_db);
  fad.finish();

  Section sen(sec.get("sensing"), sec.name("sensing"));
  sen.read_power_watts("p", sc.prm.p);
  sen.read_power_watts("delta2", sc.prm.delta2);
  sen.read_power_watts("sigma2", sc.prm.sigma2);
  sen.read_power_watts("p_ris_max", sc.prm.p_ris_max);
  sen.read_number("tau", sc.prm.tau);
  sen.read_number("fs", sc.prm.fs);
  sen.read_number("pf_max", sc.prm.pf_max);
  sen.read_number("prob_h1", sc.prm.prob_h1);
  sen.finish();
  sec.finish();
}

void read_grid(Section& sweep, ExperimentConfig& cfg) {
  if (!sweep.has("grid")) {
    return;
  }
  const YAML::Node g = sweep.get("grid");
  const bool power_axis = cfg.axis == SweepAxis::TransmitPower ||
                          cfg.axis == SweepAxis::RisPower || cfg.axis == SweepAxis::TotalPower;
  auto value = [&](const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) {
      throw ConfigError(what + ": expected a scalar");
    }
    return power_axis ? parse_power_dbm(n.Scalar()) : parse_number(n.Scalar(), what);
  };
  cfg.grid.clear();
  if (g.IsSequence()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      cfg.grid.push_back(value(g[i], sweep.name("grid")));
    }
    return;
  }
  Section range(g, sweep.name("grid"));
  if (!range.has("from") || !range.has("to") || !range.has("points")) {
    throw ConfigError(sweep.name("grid") + ": expected a list or {from, to, points}");
  }
  const double from = value(range.get("from"), range.name("from"));
  const double to = value(range.get("to"), range.name("to"));
  int points = 0;
  range.read("points", points);
  range.finish();
  cfg.grid = linear_grid(from, to, points, cfg.axis);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML/JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) {
    return cfg;
  }
  try {
    Section top(root, "");
    top.read("name", cfg.name);
    if (top.has("scenario")) {
      read_scenario(Section(top.get("scenario"), "scenario"), cfg.base);
    }
    Section sweep(top.get("sweep"), "sweep");
    if (sweep.has("axis")) {
      cfg.axis = parse_axis(sweep.get("axis").as<std::string>());
    }
    if (sweep.has("algorithms")) {
      const YAML::Node algs = sweep.get("algorithms");
      if (!algs.IsSequence() || algs.size() == 0) {
        throw ConfigError("sweep.algorithms: expected a nonempty list");
      }
      cfg.algorithms.clear();
      for (std::size_t i = 0; i < algs.size(); ++i) {
        cfg.algorithms.push_back(parse_algorithm(algs[i].as<std::string>()));
      }
    }
    read_grid(sweep, cfg);
    sweep.finish();

    top.read("realizations", cfg.realizations);
    top.read("trials", cfg.trials);
    if (top.has("sample_model")) {
      cfg.sample_model = parse_sample_model(top.get("sample_model").as<std::string>());
    }
    top.read("threads", cfg.threads);
    top.read("output_dir", cfg.output_dir);
    top.read("emit_plots", cfg.emit_plots);

    Section pm(top.get("power_model"), "power_model");
    pm.read_power_dbm("p_c", cfg.p_c_dbm);
    pm.read_power_dbm("p_dc", cfg.p_dc_dbm);
    pm.finish();

    Section sol(top.get("solver"), "solver");
    ActiveOptions& a = cfg.active;
    sol.read("max_outer_iterations", a.max_outer_iterations);
    sol.read_number("relative_gain_tol", a.relative_gain_tol);
    sol.read_number("t_clamp", a.t_clamp);
    sol.read_number("bisection_width", a.bisection_width);
    sol.read("max_ao_rounds", a.max_ao_rounds);
    sol.read_number("feasibility_tol", a.feasibility_tol);
    sol.read_number("solver_tol", a.solver_tol);
    sol.read("solver_max_iter", a.solver_max_iter);
    sol.finish();
    top.finish();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

ordered_json config_json(const ExperimentConfig& cfg) {
  const Scenario& sc = cfg.base;
  auto watts = [](double w) { return exact(w) + " W"; };
  auto dbm = [](double d) { return exact(d) + " dBm"; };
  auto point = [](const Point2& p) { return ordered_json::array({p.x, p.y}); };

  ordered_json j;
  j["name"] = cfg.name;
  j["scenario"] = {
      {"antennas", sc.antennas},
      {"elements", sc.elements},
      {"algorithm", to_string(sc.algorithm)},
      {"channel_seed", sc.channel_seed},
      {"noise_seed", sc.noise_seed},
      {"geometry",
       {{"pt", point(sc.geometry.pt_pos)},
        {"ris", point(sc.geometry.ris_pos)},
        {"st", point(sc.geometry.st_pos)},
        {"beta_pt_ris", sc.geometry.beta_pt_ris},
        {"beta_ris_st", sc.geometry.beta_ris_st},
        {"beta_pt_st", sc.geometry.beta_pt_st},
        {"a0_db", sc.geometry.a0_db},
        {"d0", sc.geometry.d0}}},
      {"fading",
       {{"kind", sc.fading.kind == FadingKind::Rician ? "rician" : "rayleigh"},
        {"rician_factor_db", sc.fading.rician_factor_db}}},
      {"sensing",
       {{"p", watts(sc.prm.p)},
        {"delta2", watts(sc.prm.delta2)},
        {"sigma2", watts(sc.prm.sigma2)},
        {"p_ris_max", watts(sc.prm.p_ris_max)},
        {"tau", sc.prm.tau},
        {"fs", sc.prm.fs},
        {"pf_max", sc.prm.pf_max},
        {"prob_h1", sc.prm.prob_h1}}}};
  ordered_json algs = ordered_json::array();
  for (Algorithm a : cfg.algorithms) {
    algs.push_back(to_string(a));
  }
  const bool power_axis = cfg.axis == SweepAxis::TransmitPower ||
                          cfg.axis == SweepAxis::RisPower || cfg.axis == SweepAxis::TotalPower;
  ordered_json grid = ordered_json::array();
  for (double g : cfg.grid) {
    if (power_axis) {
      grid.push_back(dbm(g));
    } else {
      grid.push_back(g);
    }
  }
  j["sweep"] = {{"axis", to_string(cfg.axis)}, {"algorithms", algs}, {"grid", grid}};
  j["realizations"] = cfg.realizations;
  j["trials"] = cfg.trials;
  j["sample_model"] = to_string(cfg.sample_model);
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  j["emit_plots"] = cfg.emit_plots;
  j["power_model"] = {{"p_c", dbm(cfg.p_c_dbm)}, {"p_dc", dbm(cfg.p_dc_dbm)}};
  const ActiveOptions& a = cfg.active;
  j["solver"] = {{"max_outer_iterations", a.max_outer_iterations},
                 {"relative_gain_tol", a.relative_gain_tol},
                 {"t_clamp", a.t_clamp},
                 {"bisection_width", a.bisection_width},
                 {"max_ao_rounds", a.max_ao_rounds},
                 {"feasibility_tol", a.feasibility_tol},
                 {"solver_tol", a.solver_tol},
                 {"solver_max_iter", a.solver_max_iter}};
  return j;
}

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2); }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> linear_grid(double from, double to, int points, SweepAxis axis) {
  if (points < 1) {
    throw ConfigError("grid: at least one point is required");
  }
  if (!std::isfinite(from) || !std::isfinite(to)) {
    throw ConfigError("grid: bounds must be finite");
  }
  if (points == 1) {
    return {from};
  }
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    g[static_cast<std::size_t>(k)] = from + (to - from) * k / (points - 1);
  }
  g.back() = to;
  if (axis == SweepAxis::Elements || axis == SweepAxis::Antennas) {
    for (double& x : g) {
      x = std::round(x);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') {
      out += '"';
    }
  }
  return out + "\"";
}

void csv_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += csv_field(fields[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string curve_csv(const CurveOutput& curve) {
  std::string out;
  csv_row(out, {to_string(curve.axis), "analytic_pf", "analytic_pd", "empirical_pf",
                "empirical_pd", "stderr_pf", "stderr_pd", "realizations", "trials", "elements"});
  for (const CurvePoint& p : curve.points) {
    auto emp = [&](double x) { return p.has_empirical ? exact(x) : std::string(); };
    csv_row(out, {exact(p.axis_value), exact(p.analytic_pf), exact(p.analytic_pd),
                  emp(p.empirical_pf), emp(p.empirical_pd), emp(p.stderr_pf), emp(p.stderr_pd),
                  std::to_string(p.realizations), std::to_string(p.trials),
                  std::to_string(p.elements)});
  }
  return out;
}

std::string realizations_csv(const CurveOutput& curve) {
  std::string out;
  csv_row(out, {to_string(curve.axis), "realization", "channel_seed", "pd", "iterations",
                "converged", "warnings"});
  for (const CurvePoint& p : curve.points) {
    for (std::size_t r = 0; r < p.records.size(); ++r) {
      const RealizationRecord& rec = p.records[r];
      csv_row(out, {exact(p.axis_value), std::to_string(r), std::to_string(rec.channel_seed),
                    exact(rec.pd), std::to_string(rec.iterations),
                    rec.converged ? "true" : "false", std::to_string(rec.warnings)});
    }
  }
  return out;
}

std::string convergence_csv(const std::vector<ConvergenceTrace>& traces) {
  std::string out;
  csv_row(out, {"realization", "channel_seed", "iteration", "objective", "pd"});
  for (std::size_t r = 0; r < traces.size(); ++r) {
    const ConvergenceTrace& t = traces[r];
    for (std::size_t k = 0; k < t.objective.size(); ++k) {
      csv_row(out, {std::to_string(r), std::to_string(t.channel_seed), std::to_string(k),
                    exact(t.objective[k]), exact(t.pd[k])});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fmt(double x, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace

std::string svg_plot(const PlotSpec& plot) {
  constexpr double width = 640.0;
  constexpr double height = 420.0;
  constexpr double left = 70.0;
  constexpr double right = 170.0;
  constexpr double top = 40.0;
  constexpr double bottom = 60.0;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  static const std::vector<std::string> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                               "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = plot.unit_y_range ? 0.0 : std::numeric_limits<double>::infinity();
  double y1 = plot.unit_y_range ? 1.0 : -std::numeric_limits<double>::infinity();
  for (const PlotSeries& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      if (!plot.unit_y_range) {
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0.0;
    x1 = 1.0;
  }
  if (x1 <= x0) {
    x1 = x0 + 1.0;
  }
  if (!std::isfinite(y0)) {
    y0 = 0.0;
    y1 = 1.0;
  }
  if (y1 <= y0) {
    y1 = y0 + std::max(1e-12, std::abs(y0) * 1e-3);
  }
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(plot.title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double xv = x0 + (x1 - x0) * k / ticks;
    const double yv = y0 + (y1 - y0) * k / ticks;
    o << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px(xv))
      << "\" y2=\"" << fmt(top) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(top + ph + 16)
      << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << fmt(left + pw)
      << "\" y2=\"" << fmt(py(yv)) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(yv) + 4)
      << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(height - 18)
    << "\" text-anchor=\"middle\">" << xml_escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << fmt(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(plot.y_label) << "</text>\n";

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const PlotSeries& s = plot.series[si];
    const std::string& color = colors[si % colors.size()];
    if (!s.markers_only && !s.x.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        o << (i ? " " : "") << fmt(px(s.x[i])) << "," << fmt(py(s.y[i]));
      }
      o << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.err.empty()) {
        o << "<line x1=\"" << fmt(px(s.x[i])) << "\" y1=\"" << fmt(py(s.y[i] - s.err[i]))
          << "\" x2=\"" << fmt(px(s.x[i])) << "\" y2=\"" << fmt(py(s.y[i] + s.err[i]))
          << "\" stroke=\"" << color << "\"/>\n";
      }
      o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3\" "
        << (s.markers_only ? "fill=\"white\" stroke=\"" + color + "\"" : "fill=\"" + color + "\"")
        << "/>\n";
    }
    const double ly = top + 14.0 + 18.0 * static_cast<double>(si);
    o << "<line x1=\"" << fmt(left + pw + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
      << fmt(left + pw + 30) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"" << (s.markers_only ? " stroke-dasharray=\"2,2\"" : "") << "/>\n";
    o << "<text x=\"" << fmt(left + pw + 36) << "\" y=\"" << fmt(ly) << "\">"
      << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Output files

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("output directory '" + dir + "' cannot be created");
  }
}

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& content) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << content;
  if (!out) {
    throw ConfigError("write to '" + path + "' failed");
  }
  return path;
}

std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  }
  return out;
}

std::string axis_label(SweepAxis a) {
  switch (a) {
    case SweepAxis::Elements:
      return "reflecting elements N";
    case SweepAxis::Antennas:
      return "receive antennas M";
    case SweepAxis::Tau:
      return "sensing time (s)";
    case SweepAxis::TransmitPower:
      return "PT transmit power (dBm)";
    case SweepAxis::RisPower:
      return "RIS amplification budget (dBm)";
    case SweepAxis::PathlossExponent:
      return "PT-ST path-loss exponent";
    case SweepAxis::TotalPower:
      return "total RIS power (dBm)";
    case SweepAxis::Distance:
      return "RIS-ST distance (m)";
  }
  return "";
}

void add_curves(PlotSpec& plot, const ExperimentOutput& out, const std::string& suffix) {
  for (const CurveOutput& c : out.curves) {
    PlotSeries analytic;
    PlotSeries empirical;
    analytic.label = to_string(c.algorithm) + suffix;
    empirical.label = analytic.label + " (sim)";
    empirical.markers_only = true;
    for (const CurvePoint& p : c.points) {
      analytic.x.push_back(p.axis_value);
      analytic.y.push_back(p.analytic_pd);
      if (p.has_empirical) {
        empirical.x.push_back(p.axis_value);
        empirical.y.push_back(p.empirical_pd);
        empirical.err.push_back(3.0 * p.stderr_pd);
      }
    }
    plot.series.push_back(std::move(analytic));
    if (!empirical.x.empty()) {
      plot.series.push_back(std::move(empirical));
    }
  }
}

ordered_json manifest_base(const std::string& name, const std::vector<const ExperimentConfig*>& cfgs) {
  ordered_json m;
  m["name"] = name;
  m["version"] = library_version();
  ordered_json configs = ordered_json::array();
  for (const ExperimentConfig* c : cfgs) {
    ordered_json entry;
    entry["config_hash"] = "fnv1a64:" + hex64(config_hash(*c));
    entry["seeds"] = {{"channel_seed", c->base.channel_seed}, {"noise_seed", c->base.noise_seed}};
    ordered_json derived = ordered_json::array();
    for (int r = 0; r < c->realizations; ++r) {
      derived.push_back(derive_seed(c->base.channel_seed, static_cast<std::uint64_t>(r)));
    }
    entry["seeds"]["realization_channel_seeds"] = derived;
    entry["config"] = config_json(*c);
    configs.push_back(entry);
  }
  m["runs"] = configs;
  return m;
}

std::vector<std::string> file_names(const std::vector<std::string>& paths) {
  std::vector<std::string> names;
  for (const std::string& p : paths) {
    names.push_back(std::filesystem::path(p).filename().string());
  }
  return names;
}

}  // namespace

std::vector<std::string> write_experiment(const ExperimentOutput& out) {
  const ExperimentConfig& cfg = out.config;
  ensure_dir(cfg.output_dir);
  const std::string stem = file_stem(cfg.name);
  std::vector<std::string> paths;
  for (const CurveOutput& c : out.curves) {
    const std::string base = stem + "_" + file_stem(to_string(c.algorithm));
    paths.push_back(write_file(cfg.output_dir, base + ".csv", curve_csv(c)));
    paths.push_back(write_file(cfg.output_dir, base + "_realizations.csv", realizations_csv(c)));
  }
  if (cfg.emit_plots) {
    PlotSpec plot;
    plot.title = cfg.name;
    plot.x_label = axis_label(cfg.axis);
    plot.y_label = "detection probability";
    add_curves(plot, out, "");
    paths.push_back(write_file(cfg.output_dir, stem + ".svg", svg_plot(plot)));
  }
  ordered_json m = manifest_base(cfg.name, {&cfg});
  m["outputs"] = file_names(paths);
  paths.push_back(write_file(cfg.output_dir, stem + "_manifest.json", m.dump(2) + "\n"));
  return paths;
}

// ---------------------------------------------------------------------------
// Figures

namespace {

ExperimentConfig figure_base(const std::string& name, SweepAxis axis, std::vector<double> grid,
                             std::vector<Algorithm> algorithms, int realizations) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.axis = axis;
  cfg.grid = std::move(grid);
  cfg.algorithms = std::move(algorithms);
  cfg.realizations = realizations;
  return cfg;
}

const std::vector<Algorithm> kAllAlgorithms{Algorithm::ActiveTwoStage, Algorithm::ActiveOneStage,
                                            Algorithm::Passive, Algorithm::NoRis};

}  // namespace

FigureSpec figure_spec(int number) {
  FigureSpec spec;
  spec.number = number;
  switch (number) {
    case 3:
    case 5: {
      spec.convergence = true;
      const bool one = number == 3;
      spec.title = one ? "one-stage active design: convergence"
                       : "two-stage active design: convergence";
      ExperimentConfig cfg = figure_base(one ? "fig3" : "fig5", SweepAxis::Elements, {6.0},
                                         {one ? Algorithm::ActiveOneStage
                                              : Algorithm::ActiveTwoStage},
                                         4);
      spec.series.push_back({"default", cfg});
      break;
    }
    case 4: {
      spec.title = "passive RIS: detection vs RIS-ST distance";
      for (bool rician : {false, true}) {
        ExperimentConfig cfg = figure_base(rician ? "fig4_rician" : "fig4_rayleigh",
                                           SweepAxis::Distance,
                                           {25.0, 50.0, 100.0, 200.0, 300.0, 450.0},
                                           {Algorithm::Passive}, 20);
        cfg.base.elements = 32;
        cfg.base.fading = rician ? FadingModel::rician(3.0) : FadingModel::rayleigh();
        cfg.trials = 2000;
        spec.series.push_back({rician ? "Rician 3 dB" : "Rayleigh", cfg});
      }
      break;
    }
    case 6: {
      spec.title = "passive RIS: detection vs number of elements";
      for (int m : {32, 64, 128}) {
        ExperimentConfig cfg =
            figure_base("fig6_M" + std::to_string(m), SweepAxis::Elements,
                        {0.0, 16.0, 32.0, 48.0, 64.0, 80.0, 96.0, 112.0, 128.0},
                        {Algorithm::Passive}, 10);
        cfg.base.antennas = m;
        spec.series.push_back({"M=" + std::to_string(m), cfg});
      }
      break;
    }
    case 7: {
      spec.title = "active RIS: detection vs number of elements (M=16)";
      ExperimentConfig cfg = figure_base("fig7", SweepAxis::Elements, {2.0, 4.0, 6.0, 8.0},
                                         kAllAlgorithms, 4);
      cfg.base.antennas = 16;
      spec.series.push_back({"M=16", cfg});
      break;
    }
    case 8: {
      spec.title = "active RIS: detection vs sensing time";
      for (double pf : {0.05, 0.1}) {
        ExperimentConfig cfg = figure_base(pf < 0.07 ? "fig8_pf005" : "fig8_pf010",
                                           SweepAxis::Tau, {2e-4, 4e-4, 6e-4, 8e-4, 1e-3},
                                           {Algorithm::ActiveTwoStage, Algorithm::ActiveOneStage},
                                           5);
        cfg.base.prm.pf_max = pf;
        spec.series.push_back({pf < 0.07 ? "Pf=0.05" : "Pf=0.1", cfg});
      }
      break;
    }
    case 9: {
      spec.title = "detection vs PT transmit power";
      ExperimentConfig cfg = figure_base("fig9", SweepAxis::TransmitPower,
                                         {5.0, 10.0, 15.0, 20.0, 25.0, 30.0}, kAllAlgorithms, 6);
      cfg.trials = 1200;
      spec.series.push_back({"default", cfg});
      break;
    }
    case 10: {
      spec.title = "detection vs active-RIS amplification budget";
      ExperimentConfig cfg = figure_base("fig10", SweepAxis::RisPower,
                                         {-30.0, -20.0, -10.0, 0.0, 10.0}, kAllAlgorithms, 5);
      spec.series.push_back({"default", cfg});
      break;
    }
    case 11: {
      spec.title = "detection vs PT-ST path-loss exponent";
      ExperimentConfig cfg = figure_base("fig11", SweepAxis::PathlossExponent,
                                         {3.0, 3.25, 3.5, 3.75, 4.0}, kAllAlgorithms, 5);
      spec.series.push_back({"default", cfg});
      break;
    }
    case 12: {
      spec.title = "detection vs total RIS power";
      ExperimentConfig cfg = figure_base("fig12", SweepAxis::TotalPower,
                                         {-15.0, -10.0, -5.0, 0.0, 5.0}, kAllAlgorithms, 5);
      spec.series.push_back({"default", cfg});
      break;
    }
    default:
      throw ConfigError("unknown figure " + std::to_string(number) + " (expected 3 to 12)");
  }
  return spec;
}

void apply_overrides(FigureSpec& spec, const FigureOverrides& o) {
  for (FigureSeries& s : spec.series) {
    if (o.realizations > 0) {
      s.config.realizations = o.realizations;
    }
    if (o.trials >= 0) {
      s.config.trials = o.trials;
    }
    if (o.threads >= 0) {
      s.config.threads = o.threads;
    }
    if (!o.output_dir.empty()) {
      s.config.output_dir = o.output_dir;
    }
    s.config.emit_plots = s.config.emit_plots || o.emit_plots;
  }
}

FigureOutput run_figure(const FigureSpec& spec) {
  FigureOutput out;
  out.spec = spec;
  for (const FigureSeries& s : spec.series) {
    if (spec.convergence) {
      Scenario sc = s.config.base;
      sc.algorithm = s.config.algorithms.front();
      if (!s.config.grid.empty()) {
        sc.elements = static_cast<int>(std::lround(s.config.grid.front()));
      }
      out.traces.push_back(run_convergence(sc, s.config.realizations, s.config.active));
    } else {
      out.sweeps.push_back(run_experiment(s.config));
    }
  }
  return out;
}

std::vector<std::string> write_figure(const FigureOutput& out, const std::string& dir,
                                      bool emit_plots) {
  ensure_dir(dir);
  const std::string stem = "fig" + std::to_string(out.spec.number);
  std::vector<std::string> paths;
  PlotSpec plot;
  plot.title = out.spec.title;
  plot.y_label = "detection probability";
  std::vector<const ExperimentConfig*> cfgs;
  for (std::size_t i = 0; i < out.spec.series.size(); ++i) {
    const FigureSeries& s = out.spec.series[i];
    cfgs.push_back(&s.config);
    const std::string suffix = out.spec.series.size() > 1 ? ", " + s.label : "";
    if (out.spec.convergence) {
      const auto& traces = out.traces[i];
      paths.push_back(write_file(dir, file_stem(s.config.name) + "_convergence.csv",
                                 convergence_csv(traces)));
      plot.x_label = "outer iteration";
      for (std::size_t r = 0; r < traces.size(); ++r) {
        PlotSeries ps;
        ps.label = "seed " + std::to_string(r) + suffix;
        for (std::size_t k = 0; k < traces[r].pd.size(); ++k) {
          ps.x.push_back(static_cast<double>(k));
          ps.y.push_back(traces[r].pd[k]);
        }
        plot.series.push_back(std::move(ps));
      }
    } else {
      const ExperimentOutput& sweep = out.sweeps[i];
      for (const CurveOutput& c : sweep.curves) {
        const std::string base = file_stem(s.config.name) + "_" + file_stem(to_string(c.algorithm));
        paths.push_back(write_file(dir, base + ".csv", curve_csv(c)));
        paths.push_back(write_file(dir, base + "_realizations.csv", realizations_csv(c)));
      }
      plot.x_label = axis_label(s.config.axis);
      add_curves(plot, sweep, suffix);
    }
  }
  if (emit_plots) {
    plot.unit_y_range = true;
    paths.push_back(write_file(dir, stem + ".svg", svg_plot(plot)));
  }
  ordered_json m = manifest_base(stem, cfgs);
  m["title"] = out.spec.title;
  m["outputs"] = file_names(paths);
  paths.push_back(write_file(dir, stem + "_manifest.json", m.dump(2) + "\n"));
  return paths;
}

}  // namespace rissense
