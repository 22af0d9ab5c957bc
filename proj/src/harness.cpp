#include "rissense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "rissense/passive_opt.hpp"
#include "rissense/rng.hpp"
#include "rissense/sizing.hpp"

namespace rissense {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Passive:
      return "passive";
    case Algorithm::ActiveOneStage:
      return "active1";
    case Algorithm::ActiveTwoStage:
      return "active2";
    case Algorithm::NoRis:
      return "no-ris";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  const std::string s = lower(name);
  if (s == "passive") {
    return Algorithm::Passive;
  }
  if (s == "active1" || s == "one-stage" || s == "active-one-stage") {
    return Algorithm::ActiveOneStage;
  }
  if (s == "active2" || s == "two-stage" || s == "active-two-stage") {
    return Algorithm::ActiveTwoStage;
  }
  if (s == "no-ris" || s == "none" || s == "without-ris") {
    return Algorithm::NoRis;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool is_active(Algorithm a) {
  return a == Algorithm::ActiveOneStage || a == Algorithm::ActiveTwoStage;
}

std::string to_string(SampleModel m) {
  return m == SampleModel::Projected ? "projected" : "full-vector";
}

SampleModel parse_sample_model(const std::string& name) {
  const std::string s = lower(name);
  if (s == "projected") {
    return SampleModel::Projected;
  }
  if (s == "full-vector" || s == "full") {
    return SampleModel::FullVector;
  }
  throw ConfigError("unknown sample model '" + name + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Elements:
      return "N";
    case SweepAxis::Antennas:
      return "M";
    case SweepAxis::Tau:
      return "tau";
    case SweepAxis::TransmitPower:
      return "p";
    case SweepAxis::RisPower:
      return "p_ris_max";
    case SweepAxis::PathlossExponent:
      return "pathloss_exponent";
    case SweepAxis::TotalPower:
      return "p_total";
    case SweepAxis::Distance:
      return "distance";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::Elements, SweepAxis::Antennas, SweepAxis::Tau,
                      SweepAxis::TransmitPower, SweepAxis::RisPower,
                      SweepAxis::PathlossExponent, SweepAxis::TotalPower, SweepAxis::Distance}) {
    if (name == to_string(a)) {
      return a;
    }
  }
  throw ConfigError("unknown sweep axis '" + name +
                    "' (expected N, M, tau, p, p_ris_max, pathloss_exponent, p_total, distance)");
}

// ---------------------------------------------------------------------------

void Scenario::validate() const {
  if (antennas < 1) {
    throw ConfigError("scenario: at least one antenna is required");
  }
  if (elements < 0) {
    throw ConfigError("scenario: element count must be nonnegative");
  }
  try {
    prm.validate();
    geometry.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (fading.kind == FadingKind::Rician && !std::isfinite(fading.rician_factor_db)) {
    throw ConfigError("scenario: Rician factor must be finite");
  }
  if (is_active(algorithm) && !(prm.p_ris_max > 0.0)) {
    throw ConfigError("scenario: active algorithms need a positive amplification budget");
  }
}

ChannelRealization Scenario::channels() const {
  return sample_channels(geometry, fading, antennas, elements, channel_seed);
}

SensingSolution solve_scenario(const Scenario& sc, const ChannelRealization& ch,
                               const ActiveOptions& opt) {
  if (sc.algorithm == Algorithm::NoRis || ch.elements() == 0) {
    return solve_no_ris(ch, sc.prm);
  }
  switch (sc.algorithm) {
    case Algorithm::Passive:
      return solve_passive(ch, sc.prm);
    case Algorithm::ActiveOneStage:
      return one_stage_solve(ch, sc.prm, opt);
    case Algorithm::ActiveTwoStage:
      return two_stage_solve(ch, sc.prm, opt);
    case Algorithm::NoRis:
      break;
  }
  return solve_no_ris(ch, sc.prm);
}

// ---------------------------------------------------------------------------
// Monte Carlo

double binomial_stderr(double rate, long trials) {
  if (trials < 1) {
    return 0.0;
  }
  return std::sqrt(std::max(0.0, rate * (1.0 - rate)) / static_cast<double>(trials));
}

namespace {

constexpr std::uint64_t kStreamH0 = 0;
constexpr std::uint64_t kStreamH1 = 1;

class SampleSource {
 public:
  SampleSource(std::uint64_t key, std::uint64_t substream) : gen_(key, substream) {}

  // Circularly-symmetric complex Gaussian with the given total variance.
  cplx complex(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = nd_(gen_);
    const double im = nd_(gen_);
    return {s * re, s * im};
  }

  // Sample of the same law with the phase dropped: |y|^2 = variance * Exp(1).
  // The energy statistic only sees |y|^2, so this is exact for it.
  cplx magnitude(double variance) { return {std::sqrt(variance * ed_(gen_)), 0.0}; }

 private:
  Philox4x32 gen_;
  boost::random::normal_distribution<double> nd_;
  boost::random::exponential_distribution<double> ed_;
};

struct Accumulator {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  [[nodiscard]] double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
};

}  // namespace

namespace {

MonteCarloResult simulate(const Scenario& sc, const ChannelRealization& ch,
                          const SensingSolution& sol, long trials, SampleModel model,
                          std::uint64_t stream, bool with_h1) {
  if (trials < 1) {
    throw ConfigError("run_monte_carlo: at least one trial is required");
  }
  const SensingParams& prm = sc.prm;
  const long samples = prm.samples();
  const bool active = is_active(sc.algorithm);
  const ComplexVector v = reflection_vector(sol.theta, sol.rho);
  const ComplexVector c = combined_channel(ch, v);
  const double w_norm2 = sol.w.squaredNorm();
  const double signal = prm.p * std::norm(sol.w.dot(c));
  const double ris_noise = active ? prm.sigma2 * noise_coupling(sol.w, ch, v).squaredNorm() : 0.0;
  const double var_h0 = prm.delta2 * w_norm2;
  const double var_h1 = signal + ris_noise + var_h0;
  const double sqrt_p = std::sqrt(prm.p);
  const std::uint64_t key = derive_seed(sc.noise_seed, stream);

  std::vector<cplx> buffer(static_cast<std::size_t>(samples));
  ComplexVector ris_out(ch.elements());
  ComplexVector received(ch.antennas());
  Accumulator stat0;
  Accumulator stat1;
  Accumulator ris_power;
  long false_alarms = 0;
  long detections = 0;

  for (long trial = 0; trial < trials; ++trial) {
    for (std::uint64_t hyp : {kStreamH0, kStreamH1}) {
      if (hyp == kStreamH1 && !with_h1) {
        continue;
      }
      SampleSource src(derive_seed(key, hyp), static_cast<std::uint64_t>(trial));
      const bool signal_on = hyp == kStreamH1;
      double ris_sum = 0.0;
      if (model == SampleModel::Projected) {
        const double var = signal_on ? var_h1 : var_h0;
        for (cplx& y : buffer) {
          y = src.magnitude(var);
        }
      } else {
        for (cplx& y : buffer) {
          for (Eigen::Index m = 0; m < received.size(); ++m) {
            received[m] = src.complex(prm.delta2);
          }
          if (signal_on) {
            const cplx s = src.complex(1.0);
            for (Eigen::Index n = 0; n < ris_out.size(); ++n) {
              const cplx z = active ? src.complex(prm.sigma2) : cplx(0.0, 0.0);
              ris_out[n] = v[n] * (sqrt_p * ch.h_r[n] * s + z);
            }
            received += sqrt_p * s * ch.h_d + ch.h_mat * ris_out;
            ris_sum += ris_out.squaredNorm();
          }
          y = sol.w.dot(received);
        }
      }
      const double t = test_statistic(buffer);
      if (signal_on) {
        stat1.add(t);
        detections += decide(t, sol.epsilon) == Hypothesis::H1 ? 1 : 0;
        if (model == SampleModel::FullVector && active) {
          ris_power.add(ris_sum / static_cast<double>(samples));
        }
      } else {
        stat0.add(t);
        false_alarms += decide(t, sol.epsilon) == Hypothesis::H1 ? 1 : 0;
      }
    }
  }

  MonteCarloResult r;
  r.trials = trials;
  r.empirical_pf = static_cast<double>(false_alarms) / static_cast<double>(trials);
  r.empirical_pd = static_cast<double>(detections) / static_cast<double>(trials);
  r.stderr_pf = binomial_stderr(r.empirical_pf, trials);
  r.stderr_pd = binomial_stderr(r.empirical_pd, trials);
  r.mean_h0 = stat0.mean;
  r.var_h0 = stat0.variance();
  r.mean_h1 = stat1.mean;
  r.var_h1 = stat1.variance();
  if (ris_power.count > 0) {
    r.ris_output_power = ris_power.mean;
    r.ris_output_power_stderr = std::sqrt(ris_power.variance() / static_cast<double>(trials));
  }
  return r;
}

}  // namespace

MonteCarloResult run_monte_carlo(const Scenario& sc, const ChannelRealization& ch,
                                 const SensingSolution& sol, long trials, SampleModel model,
                                 std::uint64_t stream) {
  return simulate(sc, ch, sol, trials, model, stream, true);
}

MonteCarloResult run_false_alarm_trials(const Scenario& sc, const ChannelRealization& ch,
                                        const SensingSolution& sol, long trials,
                                        std::uint64_t stream) {
  return simulate(sc, ch, sol, trials, SampleModel::Projected, stream, false);
}

MonteCarloResult run_monte_carlo(const Scenario& sc, const SensingSolution& sol, long trials) {
  return run_monte_carlo(sc, sc.channels(), sol, trials);
}

// ---------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
  base.validate();
  if (algorithms.empty()) {
    throw ConfigError("experiment: at least one algorithm is required");
  }
  if (grid.empty()) {
    throw ConfigError("experiment: sweep grid is empty");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) {
      throw ConfigError("experiment: grid values must be finite");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ConfigError("experiment: grid must be strictly increasing");
    }
  }
  if (realizations < 1) {
    throw ConfigError("experiment: at least one realization is required");
  }
  if (trials < 0) {
    throw ConfigError("experiment: trial count must be nonnegative");
  }
  if (threads < 0) {
    throw ConfigError("experiment: thread count must be nonnegative");
  }
  auto integral = [&](double x, double min) {
    return std::abs(x - std::round(x)) < 1e-9 && x >= min;
  };
  for (double x : grid) {
    switch (axis) {
      case SweepAxis::Elements:
        if (!integral(x, 0.0)) {
          throw ConfigError("experiment: N grid values must be nonnegative integers");
        }
        break;
      case SweepAxis::Antennas:
        if (!integral(x, 1.0)) {
          throw ConfigError("experiment: M grid values must be positive integers");
        }
        break;
      case SweepAxis::Tau:
      case SweepAxis::PathlossExponent:
      case SweepAxis::Distance:
        if (!(x > 0.0)) {
          throw ConfigError("experiment: " + to_string(axis) + " grid values must be positive");
        }
        break;
      case SweepAxis::TransmitPower:
      case SweepAxis::RisPower:
      case SweepAxis::TotalPower:
        break;
    }
  }
  for (Algorithm a : algorithms) {
    for (double x : grid) {
      scenario_at(*this, a, x).validate();
    }
  }
}

Scenario scenario_at(const ExperimentConfig& cfg, Algorithm algorithm, double axis_value) {
  Scenario sc = cfg.base;
  sc.algorithm = algorithm;
  switch (cfg.axis) {
    case SweepAxis::Elements:
      sc.elements = static_cast<int>(std::lround(axis_value));
      break;
    case SweepAxis::Antennas:
      sc.antennas = static_cast<int>(std::lround(axis_value));
      break;
    case SweepAxis::Tau:
      sc.prm.tau = axis_value;
      break;
    case SweepAxis::TransmitPower:
      sc.prm.p = dbm_to_watts(axis_value);
      break;
    case SweepAxis::RisPower:
      sc.prm.p_ris_max = dbm_to_watts(axis_value);
      break;
    case SweepAxis::PathlossExponent:
      sc.geometry.beta_pt_st = axis_value;
      break;
    case SweepAxis::TotalPower: {
      const ElementCounts counts = elements_from_power_budget(
          PowerValue::dbm(axis_value), PowerValue::dbm(cfg.p_c_dbm), PowerValue::dbm(cfg.p_dc_dbm),
          PowerValue::watts(cfg.base.prm.p_ris_max));
      if (algorithm == Algorithm::NoRis) {
        sc.elements = 0;
      } else {
        sc.elements = static_cast<int>(is_active(algorithm) ? counts.active : counts.passive);
      }
      break;
    }
    case SweepAxis::Distance: {
      // Slide the ST along the RIS -> default-ST direction.
      const Point2 ris = cfg.base.geometry.ris_pos;
      const Point2 st = cfg.base.geometry.st_pos;
      const double d = distance(ris, st);
      sc.geometry.st_pos = {ris.x + axis_value * (st.x - ris.x) / d,
                            ris.y + axis_value * (st.y - ris.y) / d};
      break;
    }
  }
  return sc;
}

namespace {

struct TaskResult {
  SensingSolution sol;
  std::uint64_t channel_seed = 0;
  bool has_mc = false;
  MonteCarloResult mc;
};

template <typename Fn>
void run_pool(std::size_t count, int threads, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(count, threads > 0 ? static_cast<std::size_t>(threads) : hw);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) {
      pool.emplace_back(work);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_grid = cfg.grid.size();
  const std::size_t n_alg = cfg.algorithms.size();
  const auto n_real = static_cast<std::size_t>(cfg.realizations);
  std::vector<TaskResult> results(n_grid * n_alg * n_real);

  auto trials_for = [&](std::size_t r) {
    const long base = cfg.trials / cfg.realizations;
    const long extra = static_cast<long>(r) < cfg.trials % cfg.realizations ? 1 : 0;
    return base + extra;
  };

  run_pool(results.size(), cfg.threads, [&](std::size_t idx) {
    const std::size_t r = idx % n_real;
    const std::size_t a = (idx / n_real) % n_alg;
    const std::size_t g = idx / (n_real * n_alg);
    Scenario sc = scenario_at(cfg, cfg.algorithms[a], cfg.grid[g]);
    // Common random numbers: the same channel and noise draws for every algorithm.
    sc.channel_seed = derive_seed(cfg.base.channel_seed, r);
    sc.noise_seed = derive_seed(derive_seed(cfg.base.noise_seed, g), r);
    const ChannelRealization ch = sc.channels();
    TaskResult& out = results[idx];
    out.channel_seed = sc.channel_seed;
    out.sol = solve_scenario(sc, ch, cfg.active);
    const long trials = trials_for(r);
    if (trials > 0) {
      out.mc = run_monte_carlo(sc, ch, out.sol, trials, cfg.sample_model);
      out.has_mc = true;
    }
  });

  ExperimentOutput output;
  output.config = cfg;
  for (std::size_t a = 0; a < n_alg; ++a) {
    CurveOutput curve;
    curve.algorithm = cfg.algorithms[a];
    curve.axis = cfg.axis;
    for (std::size_t g = 0; g < n_grid; ++g) {
      CurvePoint pt;
      pt.axis_value = cfg.grid[g];
      pt.elements = scenario_at(cfg, cfg.algorithms[a], cfg.grid[g]).elements;
      pt.realizations = cfg.realizations;
      double pd_sum = 0.0;
      double pf_sum = 0.0;
      long detections = 0;
      long false_alarms = 0;
      for (std::size_t r = 0; r < n_real; ++r) {
        const TaskResult& res = results[(g * n_alg + a) * n_real + r];
        pd_sum += res.sol.pd;
        pf_sum += res.sol.pf;
        pt.records.push_back({res.channel_seed, res.sol.pd, res.sol.diagnostics.iterations,
                              res.sol.diagnostics.converged,
                              static_cast<int>(res.sol.diagnostics.warnings.size())});
        if (res.has_mc) {
          pt.has_empirical = true;
          pt.trials += res.mc.trials;
          detections += std::lround(res.mc.empirical_pd * static_cast<double>(res.mc.trials));
          false_alarms += std::lround(res.mc.empirical_pf * static_cast<double>(res.mc.trials));
        }
      }
      pt.analytic_pd = pd_sum / static_cast<double>(n_real);
      pt.analytic_pf = pf_sum / static_cast<double>(n_real);
      if (pt.has_empirical) {
        pt.empirical_pd = static_cast<double>(detections) / static_cast<double>(pt.trials);
        pt.empirical_pf = static_cast<double>(false_alarms) / static_cast<double>(pt.trials);
        pt.stderr_pd = binomial_stderr(pt.empirical_pd, pt.trials);
        pt.stderr_pf = binomial_stderr(pt.empirical_pf, pt.trials);
      }
      curve.points.push_back(std::move(pt));
    }
    output.curves.push_back(std::move(curve));
  }
  return output;
}

std::vector<ConvergenceTrace> run_convergence(const Scenario& sc, int realizations,
                                              const ActiveOptions& opt) {
  sc.validate();
  if (!is_active(sc.algorithm)) {
    throw ConfigError("convergence traces need an active algorithm");
  }
  if (realizations < 1) {
    throw ConfigError("convergence traces need at least one realization");
  }
  std::vector<ConvergenceTrace> traces(static_cast<std::size_t>(realizations));
  run_pool(traces.size(), 0, [&](std::size_t r) {
    Scenario one = sc;
    one.channel_seed = derive_seed(sc.channel_seed, r);
    const SensingSolution sol = solve_scenario(one, one.channels(), opt);
    ConvergenceTrace& tr = traces[r];
    tr.channel_seed = one.channel_seed;
    const SolveDiagnostics& d = sol.diagnostics;
    tr.objective = d.objective_history;
    if (sc.algorithm == Algorithm::ActiveTwoStage) {
      // Intermediate two-stage points are designed for the budget P / t and overspend it at
      // their own Pd; the certified value per step is the bisection's lower bracket.
      double lo = opt.t_clamp;
      tr.pd.push_back(lo);
      for (std::size_t i = 0; i < d.bisection_midpoints.size(); ++i) {
        if (d.bisection_feasible[i]) {
          lo = d.bisection_midpoints[i];
        }
        tr.pd.push_back(lo);
      }
    } else {
      const double eps_ratio = design_threshold(sc.prm) / sc.prm.delta2;
      for (double level : d.objective_history) {
        tr.pd.push_back(q_function((eps_ratio / level - 1.0) * sc.prm.sqrt_samples()));
      }
    }
  });
  return traces;
}

}  // namespace rissense
