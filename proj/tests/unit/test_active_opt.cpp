#include <catch_amalgamated.hpp>

#include <limits>
#include <numbers>

#include "rissense/active_opt.hpp"
#include "rissense/passive_opt.hpp"
#include "rissense/sizing.hpp"
#include "test_support.hpp"

using namespace rissense;
using namespace testing_support;
using Catch::Approx;

namespace {

ComplexMatrix random_psd(std::mt19937_64& gen, int d, int rank) {
  ComplexMatrix g(d, rank);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < rank; ++j) {
      g(i, j) = cn(gen);
    }
  }
  return g * g.adjoint();
}

double relaxed_power(const SensingSolution& sol, const ChannelRealization& ch,
                     const SensingParams& prm) {
  return amplification_power(sol.theta, sol.rho, ch, prm, 1.0).in_watts();
}

double level_of(const ComplexVector& w, const ComplexVector& v, const ChannelRealization& ch,
                const SensingParams& prm) {
  return normalized_signal_level(w * w.adjoint(), v, ch, prm);
}

ChannelRealization default_channels(int m, int n, std::uint64_t seed) {
  return sample_channels(SystemGeometry{}, FadingModel::rayleigh(), m, n, seed);
}

}  // namespace

TEST_CASE("difference-of-convex form reproduces the trace product") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix w = random_psd(gen, 5, 2);
    const ComplexMatrix x = random_psd(gen, 5, 3);
    const double exact = (w * x).trace().real();
    CHECK(trace_product_dc(w, x) == Approx(exact).epsilon(1e-12).margin(1e-12));
  }
}

TEST_CASE("linearized minorant lower-bounds the trace product and is tight at its anchor") {
  std::mt19937_64 gen(2);
  for (double scale : {0.1, 1.0, 7.0}) {
    const ComplexMatrix w_ref = random_psd(gen, 4, 1);
    const ComplexMatrix x_ref = random_psd(gen, 4, 2);
    CHECK(trace_product_minorant(w_ref, x_ref, w_ref, x_ref, scale) ==
          Approx((w_ref * x_ref).trace().real()).epsilon(1e-9));
    for (int trial = 0; trial < 50; ++trial) {
      const ComplexMatrix w = random_psd(gen, 4, 2);
      const ComplexMatrix x = random_psd(gen, 4, 1);
      const double exact = (w * x).trace().real();
      CHECK(trace_product_minorant(w, x, w_ref, x_ref, scale) <= exact + 1e-10 * std::abs(exact));
    }
  }
  CHECK_THROWS_AS(trace_product_minorant(ComplexMatrix::Identity(2, 2),
                                         ComplexMatrix::Identity(2, 2),
                                         ComplexMatrix::Identity(2, 2),
                                         ComplexMatrix::Identity(2, 2), 0.0),
                  DomainError);
}

TEST_CASE("rank-one penalty vanishes exactly at the rank-one anchor") {
  std::mt19937_64 gen(3);
  const ComplexVector x_ref = random_unit(gen, 4) * 2.0;
  CHECK(rank_one_penalty(x_ref * x_ref.adjoint(), x_ref, x_ref) == Approx(0.0).margin(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    // Any lifted PSD matrix [[X, x], [x^H, 1]] has X >= x x^H, so the penalty is >= ||x - x_ref||^2.
    const ComplexVector x = random_unit(gen, 4);
    const ComplexMatrix big = x * x.adjoint() + 0.1 * random_psd(gen, 4, 1);
    CHECK(rank_one_penalty(big, x, x_ref) >= (x - x_ref).squaredNorm() - 1e-12);
  }
}

TEST_CASE("detection margin is affine in the lifted combiner and signs the target") {
  std::mt19937_64 gen(4);
  SensingParams prm;
  const ChannelRealization ch = default_channels(4, 3, 9);
  const ComplexVector v = reflection_vector(random_phases(gen, 3), RealVector::Constant(3, 30.0));
  for (double t : {0.05, 0.3, 0.9}) {
    const ComplexMatrix w1 = random_psd(gen, 4, 1);
    const ComplexMatrix w2 = random_psd(gen, 4, 2);
    for (double lam : {0.0, 0.3, 0.75, 1.0}) {
      const double lhs = detection_margin(lam * w1 + (1.0 - lam) * w2, v, ch, prm, t);
      const double rhs = lam * detection_margin(w1, v, ch, prm, t) +
                         (1.0 - lam) * detection_margin(w2, v, ch, prm, t);
      CHECK(lhs == Approx(rhs).epsilon(1e-10));
    }
    for (int trial = 0; trial < 10; ++trial) {
      const ComplexVector w = random_unit(gen, 4);
      const double pd = detection_prob_active(w, v, ch, design_threshold(prm), prm);
      CHECK((detection_margin(w * w.adjoint(), v, ch, prm, t) >= 0.0) == (pd >= t));
    }
  }
}

TEST_CASE("best combiner matches the unit-trace SDP and beats random combiners") {
  std::mt19937_64 gen(5);
  SensingParams prm;
  const ChannelRealization ch = default_channels(6, 4, 2);
  const ComplexVector v = reflection_vector(random_phases(gen, 4), RealVector::Constant(4, 40.0));
  const ComplexVector w = best_combiner(v, ch, prm);
  CHECK(w.norm() == Approx(1.0).epsilon(1e-12));

  const ComplexVector c = combined_channel(ch, v);
  const ComplexMatrix b = ch.h_mat * v.asDiagonal();
  const ComplexMatrix a = (prm.p * c * c.adjoint() + prm.sigma2 * b * b.adjoint()) / prm.delta2;
  ConvexSubproblem prob;
  const BlockId wb = prob.add_block("W", 6);
  prob.add_equality(prob.trace(wb), 1.0);
  prob.add_objective(prob.trace(wb, 0.5 * (a + a.adjoint())));
  const SubproblemSolution sol = solve_concave_subproblem(prob);
  REQUIRE(sol.report.status == SolverStatus::Optimal);
  const double best = level_of(w, v, ch, prm) - 1.0;
  CHECK(sol.report.objective == Approx(best).epsilon(1e-4));
  const ComplexVector w_sdp = dominant_eigenpair(sol.blocks[0]).second;
  CHECK(std::abs(w_sdp.dot(w)) == Approx(1.0).epsilon(1e-4));

  for (int trial = 0; trial < 1000; ++trial) {
    CHECK(level_of(random_unit(gen, 6), v, ch, prm) <= level_of(w, v, ch, prm) * (1.0 + 1e-12));
  }
}

TEST_CASE("amplification power examples") {
  std::mt19937_64 gen(6);
  SensingParams prm;
  const ChannelRealization ch = default_channels(2, 5, 4);
  const RealVector theta = random_phases(gen, 5);
  const RealVector rho = RealVector::Constant(5, 12.0);
  CHECK(amplification_power(theta, rho, ch, prm, 0.0).in_watts() == 0.0);

  const RealVector ones = RealVector::Ones(5);
  const double expected =
      prm.prob_h1 * 0.7 * (prm.p * ch.h_r.squaredNorm() + prm.sigma2 * 5.0);
  CHECK(amplification_power(theta, ones, ch, prm, 0.7).in_watts() == Approx(expected).epsilon(1e-12));

  // Uniform amplification that activates the budget for equal-magnitude incident channels.
  ChannelRealization flat = ch;
  const double hr = 3e-4;
  for (Eigen::Index n = 0; n < 5; ++n) {
    flat.h_r[n] = std::polar(hr, 0.4 * double(n));
  }
  SizingInputs s;
  s.prm = prm;
  s.h_min = 1e-5;
  s.hr_min = hr;
  const double amp = optimal_uniform_amplification(s, 5);
  CHECK(amplification_power(theta, RealVector::Constant(5, amp), flat, prm, 1.0).in_watts() ==
        Approx(prm.p_ris_max).epsilon(1e-12));

  CHECK_THROWS_AS(amplification_power(theta, rho, ch, prm, 1.5), DomainError);
}

TEST_CASE("Rayleigh-quotient detection bounds") {
  std::mt19937_64 gen(7);
  SensingParams prm;

  SECTION("equal incident magnitudes and uniform amplification collapse the bounds") {
    ChannelRealization ch = default_channels(1, 4, 1);
    for (Eigen::Index n = 0; n < 4; ++n) {
      ch.h_r[n] = std::polar(2e-4, 1.3 * double(n));
    }
    const RayleighBounds b = pd_bounds_rayleigh(RealVector::Constant(4, 9.0), ch, prm);
    CHECK(b.lower == Approx(b.upper).epsilon(1e-12));
  }
  SECTION("a single element gives P / lambda") {
    const ChannelRealization ch = default_channels(3, 1, 2);
    const RealVector rho = RealVector::Constant(1, 20.0);
    const RayleighBounds b = pd_bounds_rayleigh(rho, ch, prm);
    const double lambda = prm.prob_h1 * 400.0 * (prm.p * std::norm(ch.h_r[0]) + prm.sigma2);
    CHECK(b.lower == Approx(prm.p_ris_max / lambda).epsilon(1e-12));
    CHECK(b.upper == Approx(prm.p_ris_max / lambda).epsilon(1e-12));
    CHECK(b.lower_clamped == std::min(1.0, b.lower));
  }
  SECTION("quadratic form of unit-modulus vectors stays within N times the extreme weights") {
    for (int instance = 0; instance < 5; ++instance) {
      const ChannelRealization ch = default_channels(2, 6, 100 + instance);
      RealVector rho(6);
      std::uniform_real_distribution<double> ud(1.0, 100.0);
      for (Eigen::Index n = 0; n < 6; ++n) {
        rho[n] = ud(gen);
      }
      const RealVector c = amplification_weights(rho, ch, prm);
      const double n = 6.0;
      int violations = 0;
      for (int trial = 0; trial < 10000; ++trial) {
        const ComplexVector x = reflection_vector(random_phases(gen, 6), RealVector::Ones(6));
        const double q = (x.adjoint() * c.cast<cplx>().asDiagonal() * x)(0, 0).real();
        if (q < n * c.minCoeff() * (1.0 - 1e-12) || q > n * c.maxCoeff() * (1.0 + 1e-12)) {
          ++violations;
        }
      }
      CHECK(violations == 0);
      const RayleighBounds b = pd_bounds_rayleigh(rho, ch, prm);
      CHECK(b.lower <= b.upper);
      CHECK(b.upper_clamped <= 1.0);
    }
  }
  SECTION("zero smallest weight yields an infinite upper bound") {
    const ChannelRealization ch = default_channels(1, 3, 3);
    RealVector rho = RealVector::Constant(3, 5.0);
    rho[1] = 0.0;
    const RayleighBounds b = pd_bounds_rayleigh(rho, ch, prm);
    CHECK(std::isinf(b.upper));
    CHECK(b.upper_clamped == 1.0);
    CHECK(std::isfinite(b.lower));
  }
}

TEST_CASE("one-stage design ascends, converges and respects the relaxed budget") {
  SensingParams prm;
  for (std::uint64_t seed : {1u, 2u}) {
    const ChannelRealization ch = default_channels(8, 6, seed);
    const SensingSolution sol = one_stage_solve(ch, prm);
    const auto& hist = sol.diagnostics.objective_history;
    REQUIRE(hist.size() >= 2);
    for (std::size_t i = 1; i < hist.size(); ++i) {
      CHECK(hist[i] >= hist[i - 1]);
    }
    CHECK(sol.diagnostics.converged);
    CHECK(sol.diagnostics.iterations <= 30);
    CHECK(sol.diagnostics.rank_one_gap <= 1e-4);
    CHECK(relaxed_power(sol, ch, prm) <= prm.p_ris_max * (1.0 + 1e-6));
    CHECK(sol.w.norm() == Approx(1.0).epsilon(1e-9));
    CHECK(sol.pf == Approx(prm.pf_max).epsilon(1e-9));

    // Better than the passive design and than amplifying the passive phases uniformly.
    const SensingSolution passive = solve_passive(ch, prm);
    CHECK(sol.pd >= passive.pd);
    const ComplexVector v = reflection_vector(sol.theta, sol.rho);
    CHECK(hist.back() == Approx(level_of(sol.w, v, ch, prm)).epsilon(1e-12));
  }
}

TEST_CASE("one-stage design with a vanishing budget approaches the direct-link detector") {
  SensingParams prm;
  prm.p_ris_max = 1e-18;
  const ChannelRealization ch = default_channels(4, 3, 5);
  const SensingSolution sol = one_stage_solve(ch, prm);
  CHECK(sol.rho.maxCoeff() < 1e-3);
  const SensingSolution direct = solve_no_ris(ch, prm);
  CHECK(sol.pd == Approx(direct.pd).margin(1e-6));
}

TEST_CASE("one-stage phases co-phase the reflected paths without direct link or RIS noise") {
  SensingParams prm;
  prm.sigma2 = 0.0;
  prm.p_ris_max = 1.0;
  ChannelRealization ch = default_channels(1, 4, 8);
  ch.h_d.setZero();
  const SensingSolution sol = one_stage_solve(ch, prm);
  const ComplexVector terms = (sol.w.adjoint() * ch.h_mat).transpose().cwiseProduct(ch.h_r);
  const double reference = std::arg(terms[0] * std::polar(1.0, sol.theta[0]));
  for (Eigen::Index n = 1; n < 4; ++n) {
    const double phase = std::arg(terms[n] * std::polar(1.0, sol.theta[n]));
    const double diff = std::remainder(phase - reference, 2.0 * std::numbers::pi);
    CHECK(std::abs(diff) < 1e-3);
  }
}

TEST_CASE("two-stage bisection halves the interval and returns a feasible design") {
  SensingParams prm;
  const ChannelRealization ch = default_channels(8, 6, 1);
  const SensingSolution sol = two_stage_solve(ch, prm);
  const SolveDiagnostics& d = sol.diagnostics;
  CHECK(d.t_hi - d.t_lo < 1e-3);
  REQUIRE(d.bisection_midpoints.size() == d.bisection_feasible.size());

  // Replay the bracket from the recorded verdicts.
  double lo = 1e-6;
  double hi = 1.0 - 1e-6;
  for (std::size_t i = 0; i < d.bisection_midpoints.size(); ++i) {
    const double width = hi - lo;
    CHECK(d.bisection_midpoints[i] == Approx(0.5 * (lo + hi)).epsilon(1e-15));
    (d.bisection_feasible[i] ? lo : hi) = d.bisection_midpoints[i];
    CHECK(hi - lo == Approx(0.5 * width).epsilon(1e-12));
  }
  CHECK(lo == d.t_lo);
  CHECK(hi == d.t_hi);

  CHECK(sol.pd >= d.t_lo - 1e-6);
  CHECK(d.power_with_t <= prm.p_ris_max * (1.0 + 1e-6));
  CHECK(d.power_with_pd == Approx(amplification_power(sol.theta, sol.rho, ch, prm, sol.pd).in_watts()));
  CHECK(d.rank_one_gap <= 1e-4);

  const SensingSolution one = one_stage_solve(ch, prm);
  CHECK(sol.pd >= one.pd - 1e-3);
}

TEST_CASE("two-stage design saturates with an unlimited budget") {
  SensingParams prm;
  prm.p_ris_max = 1e6;
  const ChannelRealization ch = default_channels(4, 3, 3);
  const SensingSolution sol = two_stage_solve(ch, prm);
  CHECK(sol.diagnostics.t_lo >= 1.0 - 1e-2);
  CHECK(sol.pd >= 1.0 - 1e-2);
}

TEST_CASE("two-stage design matches the scalar closed-form optimum") {
  SensingParams prm;
  prm.sigma2 = 0.0;
  for (std::uint64_t seed : {4u, 11u}) {
    const ChannelRealization ch = default_channels(1, 1, seed);
    const double eps = design_threshold(prm);
    const double direct = std::abs(ch.h_d[0]);
    const double cascade = std::abs(ch.h_mat(0, 0) * ch.h_r[0]);
    const double weight = prm.prob_h1 * prm.p * std::norm(ch.h_r[0]);
    // Best achievable Pd when the budget is spent at target t with co-phased paths.
    auto pd_at = [&](double t) {
      const double rho = std::sqrt(prm.p_ris_max / (t * weight));
      const double amp = direct + cascade * rho;
      const double u1 = prm.p * amp * amp + prm.delta2;
      return q_function((eps / u1 - 1.0) * prm.sqrt_samples());
    };
    double lo = 1e-6;
    double hi = 1.0 - 1e-6;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (pd_at(mid) >= mid ? lo : hi) = mid;
    }
    const SensingSolution sol = two_stage_solve(ch, prm);
    CHECK(sol.diagnostics.t_lo <= lo + 1e-6);
    CHECK(sol.diagnostics.t_lo >= lo - 1e-3);
  }
}

TEST_CASE("active designs reject invalid inputs") {
  SensingParams prm;
  ChannelRealization ch = default_channels(2, 2, 1);
  SensingParams no_budget = prm;
  no_budget.p_ris_max = 0.0;
  CHECK_THROWS_AS(one_stage_solve(ch, no_budget), DomainError);
  CHECK_THROWS_AS(two_stage_solve(ch, no_budget), DomainError);
  const ChannelRealization empty = default_channels(2, 0, 1);
  CHECK_THROWS_AS(one_stage_solve(empty, prm), DomainError);
  ch.h_r.resize(3);
  CHECK_THROWS_AS(two_stage_solve(ch, prm), DomainError);
}
