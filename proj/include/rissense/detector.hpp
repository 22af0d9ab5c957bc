#pragma once

#include <span>
#include <string>
#include <vector>

#include "rissense/channel.hpp"
#include "rissense/mathcore.hpp"

namespace rissense {

/// Physical sensing parameters. Powers are in watts.
struct SensingParams {
  double p = dbm_to_watts(20.0);           // PT transmit power
  double delta2 = dbm_to_watts(-70.0);     // receiver noise power
  double sigma2 = dbm_to_watts(-70.0);     // active-RIS thermal noise power
  double tau = 1e-3;                       // sensing time (s)
  double fs = 6e6;                         // sampling rate (Hz)
  double pf_max = 0.1;
  double p_ris_max = dbm_to_watts(-10.0);  // active-RIS amplification budget
  double prob_h1 = 0.5;

  /// Sample count I = round(tau * fs).
  [[nodiscard]] long samples() const;
  [[nodiscard]] double sqrt_samples() const;

  /// Throws DomainError if any invariant is violated.
  void validate() const;
  bool operator==(const SensingParams&) const = default;
};

/// Mean and variance of the energy statistic under H0 and H1.
struct DetectionStats {
  double u0 = 0.0;
  double v0 = 0.0;
  double u1 = 0.0;
  double v1 = 0.0;
};

struct SolveDiagnostics {
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
  std::vector<std::string> warnings;
  // Two-stage bisection record.
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::vector<double> bisection_midpoints;
  std::vector<bool> bisection_feasible;
  double power_with_t = 0.0;   // average amplification power with Pd replaced by the bisection t
  double power_with_pd = 0.0;  // same, re-evaluated at the achieved Pd
  double rank_one_gap = 0.0;   // trace minus largest eigenvalue, relative to trace
};

struct SensingSolution {
  ComplexVector w;     // unit-norm receive beamformer, length M
  RealVector theta;    // phases in [0, 2*pi), length N
  RealVector rho;      // amplification factors, all ones for passive
  double epsilon = 0.0;
  double gamma = 0.0;
  double pd = 0.0;
  double pf = 0.0;
  SolveDiagnostics diagnostics;
};

enum class Hypothesis { H0, H1 };

/// Complex reflection vector with entries rho_n * exp(j theta_n).
ComplexVector reflection_vector(const RealVector& theta, const RealVector& rho);

/// h_d + H diag(v) h_r.
ComplexVector combined_channel(const ChannelRealization& ch, const ComplexVector& v);

/// w^H H diag(v): the row vector that maps RIS thermal noise to the combiner output.
ComplexVector noise_coupling(const ComplexVector& w, const ChannelRealization& ch,
                             const ComplexVector& v);

/// (1/I) * sum |y(i)|^2.
double test_statistic(std::span<const cplx> samples);

DetectionStats clt_moments_passive(const ComplexVector& w, const RealVector& theta,
                                   const ChannelRealization& ch, const SensingParams& prm);

DetectionStats clt_moments_active(const ComplexVector& w, const RealVector& theta,
                                  const RealVector& rho, const ChannelRealization& ch,
                                  const SensingParams& prm);

double passive_snr(const ComplexVector& w, const RealVector& theta,
                   const ChannelRealization& ch, const SensingParams& prm);

/// p |w^H(h_d + H diag(v) h_r)|^2 / (sigma2 ||w^H H diag(v)||^2 + delta2).
double active_snr(const ComplexVector& w, const ComplexVector& v, const ChannelRealization& ch,
                  const SensingParams& prm);

double design_threshold(const SensingParams& prm);

double false_alarm_prob(double epsilon, const SensingParams& prm);

double detection_prob_passive(double gamma, double epsilon, const SensingParams& prm);

double detection_prob_active(const ComplexVector& w, const RealVector& theta,
                             const RealVector& rho, const ChannelRealization& ch,
                             double epsilon, const SensingParams& prm);

/// Same as above with the reflection vector given directly.
double detection_prob_active(const ComplexVector& w, const ComplexVector& v,
                             const ChannelRealization& ch, double epsilon,
                             const SensingParams& prm);

/// H1 iff statistic > epsilon; ties go to H0.
Hypothesis decide(double statistic, double epsilon);

/// Clamps a probability into [1e-16, 1 - 1e-16] for reporting.
double clamp_probability(double p);

}  // namespace rissense
