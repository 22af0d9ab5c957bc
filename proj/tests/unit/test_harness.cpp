#include <catch_amalgamated.hpp>

#include <cmath>

#include "rissense/harness.hpp"
#include "rissense/passive_opt.hpp"
#include "rissense/sizing.hpp"
#include "test_support.hpp"

using namespace rissense;
using namespace testing_support;
using Catch::Approx;

namespace {

SensingParams short_sensing(long samples) {
  SensingParams prm;
  prm.tau = static_cast<double>(samples) / prm.fs;
  return prm;
}

SensingSolution fixed_design(const ComplexVector& w, const RealVector& theta, const RealVector& rho,
                             const ChannelRealization& ch, const SensingParams& prm) {
  SensingSolution sol;
  sol.w = w;
  sol.theta = theta;
  sol.rho = rho;
  sol.epsilon = design_threshold(prm);
  sol.pf = false_alarm_prob(sol.epsilon, prm);
  sol.pd = detection_prob_active(w, theta, rho, ch, sol.epsilon, prm);
  return sol;
}

bool same(const MonteCarloResult& a, const MonteCarloResult& b) {
  return a.empirical_pf == b.empirical_pf && a.empirical_pd == b.empirical_pd &&
         a.mean_h0 == b.mean_h0 && a.var_h0 == b.var_h0 && a.mean_h1 == b.mean_h1 &&
         a.var_h1 == b.var_h1;
}

}  // namespace

TEST_CASE("names of algorithms, axes and sample models round-trip") {
  for (Algorithm a : {Algorithm::Passive, Algorithm::ActiveOneStage, Algorithm::ActiveTwoStage,
                      Algorithm::NoRis}) {
    CHECK(parse_algorithm(to_string(a)) == a);
  }
  CHECK(parse_algorithm("Two-Stage") == Algorithm::ActiveTwoStage);
  CHECK(parse_algorithm("none") == Algorithm::NoRis);
  for (SweepAxis a : {SweepAxis::Elements, SweepAxis::Antennas, SweepAxis::Tau,
                      SweepAxis::TransmitPower, SweepAxis::RisPower, SweepAxis::PathlossExponent,
                      SweepAxis::TotalPower, SweepAxis::Distance}) {
    CHECK(parse_axis(to_string(a)) == a);
  }
  for (SampleModel m : {SampleModel::Projected, SampleModel::FullVector}) {
    CHECK(parse_sample_model(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_algorithm("greedy"), ConfigError);
  CHECK_THROWS_AS(parse_axis("snr"), ConfigError);
  CHECK_THROWS_AS(parse_sample_model("exact"), ConfigError);
}

TEST_CASE("scenario validation") {
  Scenario sc;
  CHECK_NOTHROW(sc.validate());
  sc.elements = -1;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc.elements = 4;
  sc.antennas = 0;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc.antennas = 2;
  sc.prm.pf_max = 1.5;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc.prm = SensingParams{};
  sc.algorithm = Algorithm::ActiveTwoStage;
  sc.prm.p_ris_max = 0.0;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc.algorithm = Algorithm::Passive;
  CHECK_NOTHROW(sc.validate());
}

TEST_CASE("binomial standard error") {
  CHECK(binomial_stderr(0.5, 100) == Approx(0.05));
  CHECK(binomial_stderr(0.0, 100) == 0.0);
  CHECK(binomial_stderr(1.0, 100) == 0.0);
  CHECK(binomial_stderr(0.3, 0) == 0.0);
}

TEST_CASE("without a signal path detection collapses to false alarm") {
  Scenario sc;
  sc.antennas = 2;
  sc.elements = 2;
  sc.prm = short_sensing(300);
  ChannelRealization ch;
  ch.h_d = ComplexVector::Zero(2);
  ch.h_r = ComplexVector::Zero(2);
  ch.h_mat = ComplexMatrix::Zero(2, 2);
  const ComplexVector w = ComplexVector::Unit(2, 0);
  const SensingSolution sol =
      fixed_design(w, RealVector::Zero(2), RealVector::Ones(2), ch, sc.prm);
  const long trials = 4000;
  const MonteCarloResult mc = run_monte_carlo(sc, ch, sol, trials);
  const double joint = std::hypot(mc.stderr_pf, mc.stderr_pd);
  CHECK(std::abs(mc.empirical_pd - mc.empirical_pf) <= 3.0 * joint);
  CHECK(mc.mean_h1 == Approx(mc.mean_h0).epsilon(0.01));
}

TEST_CASE("designed threshold yields the target false-alarm rate") {
  Scenario sc;  // I = 6000
  const ChannelRealization ch = sc.channels();
  const SensingSolution sol = solve_passive(ch, sc.prm);
  const MonteCarloResult mc = run_monte_carlo(sc, ch, sol, 8000);
  CHECK(mc.empirical_pf >= 0.1 - 0.01 - 3.0 * mc.stderr_pf);
  CHECK(mc.empirical_pf <= 0.1 + 0.01 + 3.0 * mc.stderr_pf);
  const double u0 = sc.prm.delta2;
  const double sd0 = u0 / sc.prm.sqrt_samples();
  CHECK(std::abs(mc.mean_h0 - u0) < 3.0 * sd0 / std::sqrt(8000.0));
}

TEST_CASE("simulated detection matches the closed form on passive designs") {
  Scenario sc;
  sc.antennas = 4;
  sc.elements = 8;
  sc.prm = short_sensing(1500);
  // Powers chosen so the analytic Pd spans the informative range.
  for (double p_dbm : {12.0, 18.0, 24.0}) {
    sc.prm.p = dbm_to_watts(p_dbm);
    const ChannelRealization ch = sc.channels();
    const SensingSolution sol = solve_passive(ch, sc.prm);
    const MonteCarloResult mc = run_monte_carlo(sc, ch, sol, 3000);
    INFO("p = " << p_dbm << " dBm, analytic Pd = " << sol.pd);
    CHECK(std::abs(mc.empirical_pd - sol.pd) <= 0.01 + 3.0 * mc.stderr_pd);
    CHECK(std::abs(mc.empirical_pf - sol.pf) <= 0.01 + 3.0 * mc.stderr_pf);
  }
}

TEST_CASE("full-vector simulation reproduces the active moments and RIS output power") {
  std::mt19937_64 gen(3);
  Scenario sc;
  sc.algorithm = Algorithm::ActiveOneStage;
  sc.antennas = 2;
  sc.elements = 3;
  sc.prm = short_sensing(60);
  sc.prm.delta2 = 1.0;
  sc.prm.sigma2 = 0.5;
  sc.prm.p = 1.0;
  const ChannelRealization ch = random_channels(gen, 2, 3, 0.4, 0.8, 0.6);
  const RealVector theta = random_phases(gen, 3);
  const RealVector rho = RealVector::Constant(3, 1.7);
  const SensingSolution sol = fixed_design(random_unit(gen, 2), theta, rho, ch, sc.prm);
  const DetectionStats st = clt_moments_active(sol.w, theta, rho, ch, sc.prm);
  const long trials = 3000;
  const MonteCarloResult mc = run_monte_carlo(sc, ch, sol, trials, SampleModel::FullVector, 5);

  auto within = [&](double mean, double var, double u, double v) {
    CHECK(std::abs(mean - u) < 3.0 * std::sqrt(v / trials));
    CHECK(std::abs(var - v) < 3.5 * v * std::sqrt(2.0 / (trials - 1)));
  };
  within(mc.mean_h0, mc.var_h0, st.u0, st.v0);
  within(mc.mean_h1, mc.var_h1, st.u1, st.v1);

  const ComplexVector v = reflection_vector(theta, rho);
  const double expected =
      sc.prm.p * v.cwiseProduct(ch.h_r).squaredNorm() + sc.prm.sigma2 * v.squaredNorm();
  CHECK(mc.ris_output_power_stderr > 0.0);
  CHECK(std::abs(mc.ris_output_power - expected) < 3.0 * mc.ris_output_power_stderr);

  // The projected model draws from the same per-trial distribution.
  const MonteCarloResult pr = run_monte_carlo(sc, ch, sol, trials, SampleModel::Projected, 5);
  within(pr.mean_h1, pr.var_h1, st.u1, st.v1);
  CHECK(pr.ris_output_power == 0.0);
}

TEST_CASE("Monte Carlo is deterministic in the noise seed and stream") {
  Scenario sc;
  sc.prm = short_sensing(200);
  const ChannelRealization ch = sc.channels();
  const SensingSolution sol = solve_passive(ch, sc.prm);
  const MonteCarloResult a = run_monte_carlo(sc, ch, sol, 500);
  const MonteCarloResult b = run_monte_carlo(sc, ch, sol, 500);
  CHECK(same(a, b));
  CHECK_FALSE(same(a, run_monte_carlo(sc, ch, sol, 500, SampleModel::Projected, 1)));
  Scenario other = sc;
  other.noise_seed = 99;
  CHECK_FALSE(same(a, run_monte_carlo(other, ch, sol, 500)));
  CHECK_THROWS_AS(run_monte_carlo(sc, ch, sol, 0), ConfigError);

  const MonteCarloResult h0 = run_false_alarm_trials(sc, ch, sol, 500);
  CHECK(h0.empirical_pf == a.empirical_pf);
  CHECK(h0.mean_h0 == a.mean_h0);
  CHECK(h0.empirical_pd == 0.0);
  CHECK(h0.mean_h1 == 0.0);
}

TEST_CASE("grid points map onto scenarios") {
  ExperimentConfig cfg;
  cfg.grid = {1.0};

  cfg.axis = SweepAxis::Distance;
  const Scenario near = scenario_at(cfg, Algorithm::Passive, 100.0);
  CHECK(distance(near.geometry.ris_pos, near.geometry.st_pos) == Approx(100.0));
  const Point2 ris = cfg.base.geometry.ris_pos;
  const Point2 st = cfg.base.geometry.st_pos;
  const double cross = (near.geometry.st_pos.x - ris.x) * (st.y - ris.y) -
                       (near.geometry.st_pos.y - ris.y) * (st.x - ris.x);
  CHECK(cross == Approx(0.0).margin(1e-9));

  cfg.axis = SweepAxis::TransmitPower;
  CHECK(scenario_at(cfg, Algorithm::Passive, 30.0).prm.p == Approx(1.0));
  cfg.axis = SweepAxis::RisPower;
  CHECK(scenario_at(cfg, Algorithm::Passive, 0.0).prm.p_ris_max == Approx(1e-3));
  cfg.axis = SweepAxis::Elements;
  CHECK(scenario_at(cfg, Algorithm::NoRis, 7.0).elements == 7);
  cfg.axis = SweepAxis::Antennas;
  CHECK(scenario_at(cfg, Algorithm::Passive, 16.0).antennas == 16);
  cfg.axis = SweepAxis::Tau;
  CHECK(scenario_at(cfg, Algorithm::Passive, 2e-3).prm.samples() == 12000);
  cfg.axis = SweepAxis::PathlossExponent;
  CHECK(scenario_at(cfg, Algorithm::Passive, 3.0).geometry.beta_pt_st == 3.0);

  cfg.axis = SweepAxis::TotalPower;
  const double p_total = 10.0;
  const ElementCounts counts = elements_from_power_budget(
      PowerValue::dbm(p_total), PowerValue::dbm(cfg.p_c_dbm), PowerValue::dbm(cfg.p_dc_dbm),
      PowerValue::watts(cfg.base.prm.p_ris_max));
  CHECK(scenario_at(cfg, Algorithm::Passive, p_total).elements == counts.passive);
  CHECK(scenario_at(cfg, Algorithm::ActiveTwoStage, p_total).elements == counts.active);
  CHECK(scenario_at(cfg, Algorithm::NoRis, p_total).elements == 0);
  CHECK(scenario_at(cfg, Algorithm::ActiveOneStage, -30.0).elements == 0);
}

TEST_CASE("experiment configuration validation") {
  ExperimentConfig cfg;
  cfg.grid = {5.0, 10.0};
  cfg.axis = SweepAxis::TransmitPower;
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig bad = cfg;
  bad.grid.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.grid = {10.0, 5.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.grid = {5.0, 5.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.axis = SweepAxis::Elements;
  bad.grid = {1.5, 2.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.axis = SweepAxis::Tau;
  bad.grid = {-1e-3, 1e-3};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.realizations = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.algorithms.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.trials = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("transmit-power sweep orders passive over no-RIS and is reproducible") {
  ExperimentConfig cfg;
  cfg.axis = SweepAxis::TransmitPower;
  cfg.grid = {5.0, 15.0, 25.0};
  cfg.algorithms = {Algorithm::Passive, Algorithm::NoRis};
  cfg.realizations = 4;
  cfg.trials = 2000;
  cfg.base.prm = short_sensing(600);
  cfg.threads = 1;
  const ExperimentOutput out = run_experiment(cfg);
  REQUIRE(out.curves.size() == 2);
  const CurveOutput& pas = out.curves[0];
  const CurveOutput& none = out.curves[1];
  CHECK(pas.algorithm == Algorithm::Passive);
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    const CurvePoint& pt = pas.points[g];
    CHECK(pt.axis_value == cfg.grid[g]);
    CHECK(pt.analytic_pd >= none.points[g].analytic_pd);
    CHECK(pt.records.size() == 4);
    CHECK(pt.trials == 2000);
    CHECK(pt.has_empirical);
    CHECK(pt.empirical_pd >= 0.0);
    CHECK(pt.empirical_pd <= 1.0);
    CHECK(pt.stderr_pd == Approx(binomial_stderr(pt.empirical_pd, pt.trials)));
    CHECK(std::abs(pt.empirical_pd - pt.analytic_pd) <= 0.01 + 3.0 * pt.stderr_pd + 0.05);
    if (g > 0) {
      CHECK(pt.analytic_pd >= pas.points[g - 1].analytic_pd);
      CHECK(none.points[g].analytic_pd >= none.points[g - 1].analytic_pd);
    }
  }
  // Channel draws are shared across grid points and algorithms.
  CHECK(pas.points[0].records[2].channel_seed == none.points[2].records[2].channel_seed);

  ExperimentConfig threaded = cfg;
  threaded.threads = 3;
  const ExperimentOutput again = run_experiment(threaded);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
      CHECK(again.curves[a].points[g].analytic_pd == out.curves[a].points[g].analytic_pd);
      CHECK(again.curves[a].points[g].empirical_pd == out.curves[a].points[g].empirical_pd);
    }
  }
}

TEST_CASE("convergence traces are monotone and end at the returned design") {
  Scenario sc;
  sc.algorithm = Algorithm::ActiveOneStage;
  sc.antennas = 4;
  sc.elements = 3;
  const std::vector<ConvergenceTrace> traces = run_convergence(sc, 2);
  REQUIRE(traces.size() == 2);
  for (const ConvergenceTrace& tr : traces) {
    REQUIRE(tr.objective.size() >= 2);
    REQUIRE(tr.pd.size() == tr.objective.size());
    for (std::size_t k = 1; k < tr.objective.size(); ++k) {
      CHECK(tr.objective[k] >= tr.objective[k - 1] * (1.0 - 1e-12));
      CHECK(tr.pd[k] >= tr.pd[k - 1] - 1e-12);
    }
    Scenario one = sc;
    one.channel_seed = tr.channel_seed;
    const SensingSolution sol = solve_scenario(one, one.channels());
    CHECK(tr.pd.back() == Approx(sol.pd).margin(1e-9));
  }
  sc.algorithm = Algorithm::Passive;
  CHECK_THROWS_AS(run_convergence(sc, 1), ConfigError);
}

TEST_CASE("two-stage traces follow the feasible bisection bracket") {
  Scenario sc;
  sc.algorithm = Algorithm::ActiveTwoStage;
  sc.antennas = 4;
  sc.elements = 3;
  const std::vector<ConvergenceTrace> traces = run_convergence(sc, 2);
  for (const ConvergenceTrace& tr : traces) {
    REQUIRE(tr.pd.size() == tr.objective.size());
    for (std::size_t k = 1; k < tr.pd.size(); ++k) {
      CHECK(tr.pd[k] >= tr.pd[k - 1]);
    }
    Scenario one = sc;
    one.channel_seed = tr.channel_seed;
    const SensingSolution sol = solve_scenario(one, one.channels());
    CHECK(tr.pd.back() == sol.diagnostics.t_lo);
    CHECK(sol.pd >= tr.pd.back() - 1e-9);
  }
}
