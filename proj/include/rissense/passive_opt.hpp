#pragma once

#include <stdexcept>

#include "rissense/channel.hpp"
#include "rissense/detector.hpp"

namespace rissense {

/// Raised when a channel is identically zero where a direction is required.
class DegenerateChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matched-filter combiner (h_d + H diag(e^{j theta}) h_r) / norm.
ComplexVector optimal_receive_beamformer(const RealVector& theta, const ChannelRealization& ch);

/// Phases that align every reflected term w^H H_n h_rn e^{j theta_n} with w^H h_d.
RealVector optimal_passive_phases(const ComplexVector& w, const ChannelRealization& ch);

/// Alternates the two closed-form updates until the combined channel gain stalls.
SensingSolution solve_passive(const ChannelRealization& ch, const SensingParams& prm);

/// Direct-link-only baseline.
SensingSolution solve_no_ris(const ChannelRealization& ch, const SensingParams& prm);

}  // namespace rissense
