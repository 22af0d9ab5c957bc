#include <catch_amalgamated.hpp>

#include "rissense/passive_opt.hpp"
#include "rissense/sizing.hpp"
#include "test_support.hpp"

using namespace rissense;
using namespace testing_support;
using Catch::Approx;

namespace {

SizingInputs default_inputs() {
  SizingInputs s;
  const SystemGeometry g;
  s.h_min = std::sqrt(path_loss(distance(g.ris_pos, g.st_pos), g.beta_ris_st, g.a0_db, g.d0));
  s.hr_min = std::sqrt(path_loss(distance(g.pt_pos, g.ris_pos), g.beta_pt_ris, g.a0_db, g.d0));
  return s;
}

double passive_q_argument(const SizingInputs& s, long n) {
  const SensingParams& prm = s.prm;
  const double received = prm.p * n * n * s.h_min * s.h_min * s.hr_min * s.hr_min + prm.delta2;
  return prm.delta2 * (q_inverse(prm.pf_max) + prm.sqrt_samples()) / received -
         prm.sqrt_samples();
}

SizingInputs random_inputs(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  SizingInputs s;
  s.prm.p = dbm_to_watts(5.0 + 25.0 * ud(gen));
  s.prm.p_ris_max = dbm_to_watts(-30.0 + 40.0 * ud(gen));
  s.prm.delta2 = dbm_to_watts(-80.0 + 20.0 * ud(gen));
  s.prm.sigma2 = dbm_to_watts(-80.0 + 20.0 * ud(gen));
  s.prm.pf_max = 0.01 + 0.2 * ud(gen);
  s.prm.tau = (200.0 + 10000.0 * ud(gen)) / s.prm.fs;
  s.prm.prob_h1 = 0.1 + 0.9 * ud(gen);
  s.h_min = std::pow(10.0, -6.0 + 2.0 * ud(gen));
  s.hr_min = std::pow(10.0, -4.0 + 2.0 * ud(gen));
  return s;
}

}  // namespace

TEST_CASE("passive count is minimal and reaches the target") {
  const SizingInputs s = default_inputs();
  const long n = min_elements_passive(s);
  CHECK(n >= 1);
  CHECK(pd_passive_uniform(s, n) >= near_certain_detection());
  const double gamma = s.prm.p * n * n * std::pow(s.h_min * s.hr_min, 2) / s.prm.delta2;
  CHECK(detection_prob_passive(gamma, design_threshold(s.prm), s.prm) ==
        Approx(pd_passive_uniform(s, n)).epsilon(1e-12));
  if (n > 1) {
    CHECK(passive_q_argument(s, n - 1) > -3.0);
  }
  CHECK(std::abs(static_cast<double>(n) - min_elements_passive_bound(s)) < 1.0 + 1e-9);
}

TEST_CASE("huge transmit power needs one element") {
  SizingInputs s = default_inputs();
  s.prm.p = 1e20;
  CHECK(min_elements_passive(s) == 1);
}

TEST_CASE("sizing rejects too few samples") {
  SizingInputs s = default_inputs();
  s.prm.tau = 9.0 / s.prm.fs;
  CHECK_THROWS_AS(min_elements_passive(s), DomainError);
  CHECK_THROWS_AS(min_elements_active(s), DomainError);
}

TEST_CASE("uniform amplification scaling and budget") {
  SizingInputs s = default_inputs();
  const double r1 = optimal_uniform_amplification(s, 25);
  const double r2 = optimal_uniform_amplification(s, 50);
  CHECK(r1 / r2 == Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::isfinite(r1));
  CHECK(r1 > 0.0);
  const double used = s.prm.prob_h1 * (s.prm.p * s.hr_min * s.hr_min * 25.0 * r1 * r1 +
                                       s.prm.sigma2 * 25.0 * r1 * r1);
  CHECK(used == Approx(s.prm.p_ris_max).epsilon(1e-12));
  s.prm.prob_h1 = 0.0;
  CHECK_THROWS_AS(optimal_uniform_amplification(s, 25), DomainError);
}

TEST_CASE("active Pd matches the equal-magnitude received power") {
  const SizingInputs s = default_inputs();
  for (long n : {1L, 5L, 25L, 100L}) {
    const double rho = optimal_uniform_amplification(s, n);
    const double h2 = s.h_min * s.h_min;
    const double hr2 = s.hr_min * s.hr_min;
    const double received = s.prm.p * h2 * hr2 * n * n * rho * rho +
                            s.prm.sigma2 * h2 * n * rho * rho + s.prm.delta2;
    const double eps = design_threshold(s.prm);
    CHECK(pd_active_uniform(s, n) ==
          Approx(q_function((eps / received - 1.0) * s.prm.sqrt_samples())).epsilon(1e-10));

    // Equal-magnitude channel with aligned phases: the bound in the chain is tight.
    ChannelRealization ch;
    ch.h_d = ComplexVector::Zero(1);
    ch.h_r.resize(n);
    ch.h_mat.resize(1, n);
    std::mt19937_64 gen(static_cast<std::uint64_t>(n));
    for (long k = 0; k < n; ++k) {
      ch.h_r[k] = std::polar(s.hr_min, random_phases(gen, 1)[0]);
      ch.h_mat(0, k) = std::polar(s.h_min, random_phases(gen, 1)[0]);
    }
    RealVector theta(n);
    for (long k = 0; k < n; ++k) {
      theta[k] = wrap_phase(-std::arg(ch.h_mat(0, k)) - std::arg(ch.h_r[k]));
    }
    const ComplexVector w = ComplexVector::Ones(1);
    const DetectionStats stats =
        clt_moments_active(w, theta, RealVector::Constant(n, rho), ch, s.prm);
    CHECK(stats.u1 == Approx(received).epsilon(1e-10));
  }
}

TEST_CASE("active Pd is monotone in N and falls to the false-alarm level without budget") {
  SizingInputs s = default_inputs();
  double previous = 0.0;
  for (long n = 1; n <= 200; ++n) {
    const double pd = pd_active_uniform(s, n);
    CHECK(pd >= previous);
    previous = pd;
  }
  s.prm.p_ris_max = 1e-30;
  CHECK(pd_active_uniform(s, 10) == Approx(s.prm.pf_max).margin(1e-9));
}

TEST_CASE("unit amplification without RIS noise equals the passive value") {
  SizingInputs s = default_inputs();
  s.prm.sigma2 = 0.0;
  for (long n : {1L, 10L, 60L}) {
    s.prm.p_ris_max = s.prm.prob_h1 * static_cast<double>(n) * s.prm.p * s.hr_min * s.hr_min;
    CHECK(optimal_uniform_amplification(s, n) == Approx(1.0).epsilon(1e-12));
    CHECK(pd_active_uniform(s, n) == Approx(pd_passive_uniform(s, n)).epsilon(1e-10));
  }
}

TEST_CASE("active count at default parameters") {
  SizingInputs s = default_inputs();
  const long n_act = min_elements_active(s);
  const long n_pas = min_elements_passive(s);
  CHECK(n_act < n_pas);
  CHECK(pd_active_uniform(s, n_act) >= near_certain_detection());
  if (n_act >= 1) {
    CHECK(pd_active_uniform(s, n_act - 1) < near_certain_detection());
  }
  s.prm.p_ris_max = 1e6;
  CHECK(min_elements_active(s) == 0);
  CHECK(min_elements_active_bound(s) == 0.0);
}

TEST_CASE("minimality on random draws") {
  std::mt19937_64 gen(31);
  for (int k = 0; k < 1000; ++k) {
    const SizingInputs s = random_inputs(gen);
    const long np = min_elements_passive(s);
    CHECK(pd_passive_uniform(s, np) >= near_certain_detection());
    if (np > 1) {
      CHECK(pd_passive_uniform(s, np - 1) < near_certain_detection());
    }
    const long na = min_elements_active(s);
    CHECK(pd_active_uniform(s, na) >= near_certain_detection());
    if (na >= 1) {
      CHECK(pd_active_uniform(s, na - 1) < near_certain_detection());
    }
  }
}

TEST_CASE("comparison verdicts") {
  std::mt19937_64 gen(32);
  int applicable = 0;
  for (int k = 0; k < 1000; ++k) {
    const SizingInputs s = random_inputs(gen);
    std::uniform_int_distribution<long> count(1, 400);
    const long na = count(gen);
    const long np = count(gen);
    const Comparison c = compare_active_passive(s, na, np);
    if (c.amplifying) {
      ++applicable;
      if (c.sufficient_condition) {
        CHECK(c.verdict == Verdict::ActiveWins);
      }
      CHECK(compare_active_passive(s, na, na).verdict == Verdict::ActiveWins);
    }
  }
  CHECK(applicable > 100);

  // Exact tie without RIS noise resolves to the passive side.
  SizingInputs s;
  s.prm.sigma2 = 0.0;
  s.h_min = 0.5;
  s.hr_min = 0.25;
  s.prm.p = 2.0;
  s.prm.prob_h1 = 0.5;
  const long na = 4;
  const long np = 8;
  // active side = h^2 na P / Pr, passive side = p h^2 hr^2 np^2
  s.prm.p_ris_max = s.prm.p * s.hr_min * s.hr_min * np * np * s.prm.prob_h1 / na;
  CHECK(compare_active_passive(s, na, np).verdict == Verdict::PassiveWins);
  s.prm.p_ris_max *= 1.0 + 1e-9;
  CHECK(compare_active_passive(s, na, np).verdict == Verdict::ActiveWins);
}

TEST_CASE("element counts from a power budget") {
  const PowerValue pc = PowerValue::dbm(-10.0);
  const PowerValue pdc = PowerValue::dbm(-5.0);
  const PowerValue pris = PowerValue::dbm(-10.0);

  const ElementCounts low = elements_from_power_budget(PowerValue::dbm(-12.0), pc, pdc, pris);
  CHECK(low.active == 0);
  CHECK(low.passive == 0);

  const ElementCounts tens = elements_from_power_budget(
      PowerValue::watts(10.0 * pc.in_watts()), pc, pc, PowerValue::watts(0.0));
  CHECK(tens.passive == 10);
  CHECK(tens.active == 5);

  long last_pas = 0;
  long last_act = 0;
  bool active_started_later = false;
  for (double dbm = -10.0; dbm <= 10.0; dbm += 0.25) {
    const ElementCounts c = elements_from_power_budget(PowerValue::dbm(dbm), pc, pdc, pris);
    CHECK(c.passive >= last_pas);
    CHECK(c.active >= last_act);
    CHECK(c.active <= c.passive);
    if (c.passive > 0 && c.active == 0) {
      active_started_later = true;
    }
    last_pas = c.passive;
    last_act = c.active;
  }
  CHECK(active_started_later);
  CHECK(last_act > 0);
}

TEST_CASE("worst-element magnitudes from a realization") {
  std::mt19937_64 gen(33);
  const ChannelRealization ch = random_channels(gen, 1, 6);
  const SizingInputs s = SizingInputs::from_channels(ch, SensingParams{});
  CHECK(s.h_min == ch.h_mat.cwiseAbs().minCoeff());
  CHECK(s.hr_min == ch.h_r.cwiseAbs().minCoeff());
  CHECK_THROWS_AS(SizingInputs::from_channels(random_channels(gen, 2, 6), SensingParams{}),
                  DomainError);
}

TEST_CASE("large-scale magnitudes from the geometry") {
  const SizingInputs one = SizingInputs::from_geometry(SystemGeometry{}, 1, SensingParams{});
  const SizingInputs ref = default_inputs();
  CHECK(one.h_min == Approx(ref.h_min).epsilon(1e-15));
  CHECK(one.hr_min == Approx(ref.hr_min).epsilon(1e-15));
  const SizingInputs many = SizingInputs::from_geometry(SystemGeometry{}, 16, SensingParams{});
  CHECK(many.h_min * many.h_min == Approx(16.0 * ref.h_min * ref.h_min).epsilon(1e-14));
  CHECK(many.hr_min == one.hr_min);
  // A larger array needs fewer elements.
  CHECK(min_elements_passive(many) < min_elements_passive(one));
  CHECK(min_elements_active(many) <= min_elements_active(one));
  CHECK_THROWS_AS(SizingInputs::from_geometry(SystemGeometry{}, 0, SensingParams{}), DomainError);
}
