#include "rissense/passive_opt.hpp"

#include <cmath>

namespace rissense {

namespace {

constexpr double kRelTol = 1e-8;
constexpr int kMaxRounds = 50;

ComplexVector unit_phasors(const RealVector& theta) {
  return reflection_vector(theta, RealVector::Ones(theta.size()));
}

void finish_solution(SensingSolution& sol, double gamma, const SensingParams& prm) {
  sol.epsilon = design_threshold(prm);
  sol.gamma = gamma;
  sol.pf = false_alarm_prob(sol.epsilon, prm);
  sol.pd = detection_prob_passive(gamma, sol.epsilon, prm);
}

}  // namespace

ComplexVector optimal_receive_beamformer(const RealVector& theta, const ChannelRealization& ch) {
  const ComplexVector c = combined_channel(ch, unit_phasors(theta));
  const double norm = c.norm();
  if (!(norm > 0.0)) {
    throw DegenerateChannelError("combined channel is zero; no receive direction exists");
  }
  return c / norm;
}

RealVector optimal_passive_phases(const ComplexVector& w, const ChannelRealization& ch) {
  const double reference = safe_arg(w.dot(ch.h_d));
  const ComplexVector coupled = (w.adjoint() * ch.h_mat).transpose().cwiseProduct(ch.h_r);
  RealVector theta(coupled.size());
  for (Eigen::Index n = 0; n < coupled.size(); ++n) {
    theta[n] = wrap_phase(reference - safe_arg(coupled[n]));
  }
  return theta;
}

SensingSolution solve_passive(const ChannelRealization& ch, const SensingParams& prm) {
  ch.validate();
  const Eigen::Index n = ch.elements();
  SensingSolution sol;
  sol.theta = RealVector::Zero(n);
  sol.rho = RealVector::Ones(n);

  double gain = combined_channel(ch, unit_phasors(sol.theta)).squaredNorm();
  sol.diagnostics.objective_history.push_back(gain);
  for (int round = 1; round <= kMaxRounds; ++round) {
    sol.w = optimal_receive_beamformer(sol.theta, ch);
    sol.theta = optimal_passive_phases(sol.w, ch);
    const double next = combined_channel(ch, unit_phasors(sol.theta)).squaredNorm();
    sol.diagnostics.objective_history.push_back(next);
    sol.diagnostics.iterations = round;
    const bool stalled = next - gain <= kRelTol * std::max(gain, 1e-300);
    gain = std::max(gain, next);
    if (stalled) {
      sol.diagnostics.converged = true;
      break;
    }
  }
  sol.w = optimal_receive_beamformer(sol.theta, ch);
  finish_solution(sol, passive_snr(sol.w, sol.theta, ch, prm), prm);
  return sol;
}

SensingSolution solve_no_ris(const ChannelRealization& ch, const SensingParams& prm) {
  ch.validate();
  const double norm = ch.h_d.norm();
  if (!(norm > 0.0)) {
    throw DegenerateChannelError("direct channel is zero");
  }
  SensingSolution sol;
  sol.w = ch.h_d / norm;
  sol.theta = RealVector::Zero(ch.elements());
  sol.rho = RealVector::Zero(ch.elements());
  sol.diagnostics.converged = true;
  finish_solution(sol, prm.p * ch.h_d.squaredNorm() / prm.delta2, prm);
  return sol;
}

}  // namespace rissense
