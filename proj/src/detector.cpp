#include "rissense/detector.hpp"

#include <algorithm>
#include <cmath>

namespace rissense {

long SensingParams::samples() const { return std::lround(tau * fs); }

double SensingParams::sqrt_samples() const { return std::sqrt(static_cast<double>(samples())); }

void SensingParams::validate() const {
  if (!(tau > 0.0 && fs > 0.0) || samples() < 1) {
    throw DomainError("sensing params: tau * fs must round to at least one sample");
  }
  if (!(pf_max > 0.0 && pf_max < 0.5)) {
    throw DomainError("sensing params: pf_max must lie in (0, 0.5)");
  }
  if (!(prob_h1 >= 0.0 && prob_h1 <= 1.0)) {
    throw DomainError("sensing params: prob_h1 must lie in [0, 1]");
  }
  for (double power : {p, delta2, sigma2, p_ris_max}) {
    if (!(power >= 0.0) || !std::isfinite(power)) {
      throw DomainError("sensing params: powers must be finite and nonnegative");
    }
  }
  if (!(delta2 > 0.0)) {
    throw DomainError("sensing params: receiver noise power must be positive");
  }
}

ComplexVector reflection_vector(const RealVector& theta, const RealVector& rho) {
  if (theta.size() != rho.size()) {
    throw DomainError("reflection_vector: theta and rho lengths differ");
  }
  ComplexVector v(theta.size());
  for (Eigen::Index n = 0; n < theta.size(); ++n) {
    v[n] = std::polar(rho[n], theta[n]);
  }
  return v;
}

ComplexVector combined_channel(const ChannelRealization& ch, const ComplexVector& v) {
  if (v.size() != ch.elements()) {
    throw DomainError("combined_channel: reflection vector length must equal N");
  }
  return ch.h_d + ch.h_mat * v.cwiseProduct(ch.h_r);
}

ComplexVector noise_coupling(const ComplexVector& w, const ChannelRealization& ch,
                             const ComplexVector& v) {
  ComplexVector row = (w.adjoint() * ch.h_mat).transpose();
  return row.cwiseProduct(v);
}

double test_statistic(std::span<const cplx> samples) {
  if (samples.empty()) {
    throw DomainError("test_statistic: no samples");
  }
  double acc = 0.0;
  for (const cplx& y : samples) {
    acc += std::norm(y);
  }
  return acc / static_cast<double>(samples.size());
}

namespace {

double received_signal_power(const ComplexVector& w, const ComplexVector& v,
                             const ChannelRealization& ch, const SensingParams& prm) {
  return prm.p * std::norm(w.dot(combined_channel(ch, v)));
}

}  // namespace

double passive_snr(const ComplexVector& w, const RealVector& theta,
                   const ChannelRealization& ch, const SensingParams& prm) {
  const ComplexVector v = reflection_vector(theta, RealVector::Ones(theta.size()));
  return received_signal_power(w, v, ch, prm) / prm.delta2;
}

double active_snr(const ComplexVector& w, const ComplexVector& v, const ChannelRealization& ch,
                  const SensingParams& prm) {
  const double amplified = prm.sigma2 * noise_coupling(w, ch, v).squaredNorm();
  return received_signal_power(w, v, ch, prm) / (amplified + prm.delta2);
}

DetectionStats clt_moments_passive(const ComplexVector& w, const RealVector& theta,
                                   const ChannelRealization& ch, const SensingParams& prm) {
  const double count = static_cast<double>(prm.samples());
  const double gamma = passive_snr(w, theta, ch, prm);
  DetectionStats s;
  s.u0 = prm.delta2;
  s.v0 = prm.delta2 * prm.delta2 / count;
  s.u1 = (gamma + 1.0) * prm.delta2;
  s.v1 = (gamma + 1.0) * (gamma + 1.0) * prm.delta2 * prm.delta2 / count;
  return s;
}

DetectionStats clt_moments_active(const ComplexVector& w, const RealVector& theta,
                                  const RealVector& rho, const ChannelRealization& ch,
                                  const SensingParams& prm) {
  const double count = static_cast<double>(prm.samples());
  const ComplexVector v = reflection_vector(theta, rho);
  const double signal = received_signal_power(w, v, ch, prm);
  const double coupling = noise_coupling(w, ch, v).squaredNorm();
  const double ris_noise = prm.sigma2 * coupling;
  const double d2 = prm.delta2;

  DetectionStats s;
  s.u0 = d2;
  s.v0 = d2 * d2 / count;
  s.u1 = signal + ris_noise + d2;
  // Six-term expansion kept as written; equals (signal + ris_noise + d2)^2 / I.
  s.v1 = (signal * signal + ris_noise * ris_noise + d2 * d2 + 2.0 * signal * ris_noise +
          2.0 * d2 * signal + 2.0 * d2 * ris_noise) /
         count;
  return s;
}

double design_threshold(const SensingParams& prm) {
  return prm.delta2 * q_inverse(prm.pf_max) / prm.sqrt_samples() + prm.delta2;
}

double false_alarm_prob(double epsilon, const SensingParams& prm) {
  return q_function((epsilon / prm.delta2 - 1.0) * prm.sqrt_samples());
}

double detection_prob_passive(double gamma, double epsilon, const SensingParams& prm) {
  if (!(gamma >= 0.0)) {
    throw DomainError("detection_prob_passive: SNR must be nonnegative");
  }
  if (std::isinf(gamma)) {
    return 1.0;
  }
  return q_function((epsilon / prm.delta2 - gamma - 1.0) * prm.sqrt_samples() / (1.0 + gamma));
}

double detection_prob_active(const ComplexVector& w, const ComplexVector& v,
                             const ChannelRealization& ch, double epsilon,
                             const SensingParams& prm) {
  const double floor = prm.sigma2 * noise_coupling(w, ch, v).squaredNorm() + prm.delta2;
  const double gamma = received_signal_power(w, v, ch, prm) / floor;
  return q_function((epsilon / floor - gamma - 1.0) * prm.sqrt_samples() / (1.0 + gamma));
}

double detection_prob_active(const ComplexVector& w, const RealVector& theta,
                             const RealVector& rho, const ChannelRealization& ch,
                             double epsilon, const SensingParams& prm) {
  return detection_prob_active(w, reflection_vector(theta, rho), ch, epsilon, prm);
}

Hypothesis decide(double statistic, double epsilon) {
  return statistic > epsilon ? Hypothesis::H1 : Hypothesis::H0;
}

double clamp_probability(double p) { return std::clamp(p, 1e-16, 1.0 - 1e-16); }

}  // namespace rissense
