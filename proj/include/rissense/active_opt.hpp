#pragma once

#include <stdexcept>

#include "rissense/channel.hpp"
#include "rissense/convex_subproblem.hpp"
#include "rissense/detector.hpp"

namespace rissense {

/// Unexpected failure inside an active-RIS design (e.g. the first convex subproblem fails).
class ActiveDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ActiveOptions {
  // One-stage inner approximation.
  int max_outer_iterations = 30;
  double relative_gain_tol = 1e-6;
  // Two-stage bisection.
  double t_clamp = 1e-6;
  double bisection_width = 1e-3;
  int max_ao_rounds = 20;
  double feasibility_tol = 1e-6;
  // Convex subproblems.
  double solver_tol = 1e-6;
  int solver_max_iter = 10000;

  bool operator==(const ActiveOptions&) const = default;
};

/// Inner-approximation (DC + exact-penalty) design of (w, v) under the power budget
/// with the detection probability bounded by one.
SensingSolution one_stage_solve(const ChannelRealization& ch, const SensingParams& prm,
                                const ActiveOptions& opt = {});

/// Bisection on the detection-probability target t with alternating w / v
/// feasibility subproblems.
SensingSolution two_stage_solve(const ChannelRealization& ch, const SensingParams& prm,
                                const ActiveOptions& opt = {});

/// Average amplification power Pr(H1) * pd * (p ||rho o h_r||^2 + sigma2 ||rho||^2).
PowerValue amplification_power(const RealVector& theta, const RealVector& rho,
                               const ChannelRealization& ch, const SensingParams& prm,
                               double pd);

struct RayleighBounds {
  double lower = 0.0;
  double upper = 0.0;  // +infinity when the smallest diagonal entry is zero
  double lower_clamped = 0.0;
  double upper_clamped = 0.0;
};

/// Diagonal of C = Pr(H1) (p diag|h_r|^2 + sigma2 I) diag(rho^2).
RealVector amplification_weights(const RealVector& rho, const ChannelRealization& ch,
                                 const SensingParams& prm);

/// Bounds P / (N lambda_max) <= Pd <= P / (N lambda_min) implied by the power budget
/// at equality, using the extreme diagonal entries of C.
RayleighBounds pd_bounds_rayleigh(const RealVector& rho, const ChannelRealization& ch,
                                  const SensingParams& prm);

// --- building blocks exposed for verification -------------------------------------------

/// Re Tr(W X) written as a difference of convex squared norms.
double trace_product_dc(const ComplexMatrix& w, const ComplexMatrix& x);

/// Lower bound on Re Tr(W X) from linearizing the convex part of the DC form of
/// Tr((a W)(X / a)) around (W_ref, X_ref). Tight at the reference point.
double trace_product_minorant(const ComplexMatrix& w, const ComplexMatrix& x,
                              const ComplexMatrix& w_ref, const ComplexMatrix& x_ref,
                              double scale);

/// Lower bound on Tr(X) - ||x||^2 type rank-one defects: Tr(X) - 2 Re(x_ref^H x) + ||x_ref||^2.
/// Vanishes iff X = x x^H and x = x_ref when the lifted matrix [[X, x], [x^H, 1]] is PSD.
double rank_one_penalty(const ComplexMatrix& x_mat, const ComplexVector& x,
                        const ComplexVector& x_ref);

/// Mean of the test statistic under H1 normalized by delta2, as a function of W = w w^H:
/// p/delta2 Tr(W c c^H) + sigma2/delta2 Tr(W B B^H) + 1 with c = combined channel,
/// B = H diag(v).
double normalized_signal_level(const ComplexMatrix& w_mat, const ComplexVector& v,
                               const ChannelRealization& ch, const SensingParams& prm);

/// Sign-agnostic detection constraint for target t: k * level - (Q^-1(pf) + sqrt(I)),
/// k = Q^-1(t) + sqrt(I). Nonnegative iff Pd >= t. Affine in W.
double detection_margin(const ComplexMatrix& w_mat, const ComplexVector& v,
                        const ChannelRealization& ch, const SensingParams& prm, double t);

/// Dominant-eigenvector receive combiner maximizing the signal level for fixed v.
ComplexVector best_combiner(const ComplexVector& v, const ChannelRealization& ch,
                            const SensingParams& prm);

}  // namespace rissense
