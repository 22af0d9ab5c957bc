#include "rissense/active_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "rissense/passive_opt.hpp"

namespace rissense {

namespace {

// (w^H H)^T: per-element coupling of the RIS output into the combiner.
ComplexVector coupling(const ComplexVector& w, const ChannelRealization& ch) {
  return (w.adjoint() * ch.h_mat).transpose();
}

// Pr(H1) (p |h_rn|^2 + sigma2): watts of amplification power per unit |v_n|^2 at Pd = 1.
RealVector power_weights(const ChannelRealization& ch, const SensingParams& prm) {
  return prm.prob_h1 * (prm.p * ch.h_r.cwiseAbs2().array() + prm.sigma2).matrix();
}

double relaxed_power(const ComplexVector& v, const RealVector& weights) {
  return weights.dot(v.cwiseAbs2());
}

double signal_level(const ComplexVector& w, const ComplexVector& v, const ChannelRealization& ch,
                    const SensingParams& prm) {
  const double direct = std::norm(w.dot(combined_channel(ch, v)));
  const double amplified = coupling(w, ch).cwiseAbs2().dot(v.cwiseAbs2());
  return (prm.p * direct + prm.sigma2 * amplified) / prm.delta2 + 1.0;
}

// [H diag(h_r), h_d]: maps the lifted reflection vector [v; 1] to the combined channel.
ComplexMatrix lifted_channel(const ChannelRealization& ch) {
  const Eigen::Index m = ch.antennas();
  const Eigen::Index n = ch.elements();
  ComplexMatrix out(m, n + 1);
  out.leftCols(n) = ch.h_mat * ch.h_r.asDiagonal();
  out.col(n) = ch.h_d;
  return out;
}

ComplexVector lift(const ComplexVector& v) {
  ComplexVector x(v.size() + 1);
  x.head(v.size()) = v;
  x[v.size()] = 1.0;
  return x;
}

// Scales v down (never up) so that weights . |v|^2 <= budget.
ComplexVector fit_budget(const ComplexVector& v, const RealVector& weights, double budget) {
  const double used = relaxed_power(v, weights);
  if (used <= budget || !(used > 0.0)) {
    return v;
  }
  return v * std::sqrt(budget / used);
}

// Scales v so that the budget is met with equality (when the weights allow it).
ComplexVector fill_budget(const ComplexVector& v, const RealVector& weights, double budget) {
  const double used = relaxed_power(v, weights);
  if (!(used > 0.0)) {
    return v;
  }
  return v * std::sqrt(budget / used);
}

double uniform_scale(const RealVector& weights, double budget) {
  const double total = weights.sum();
  return total > 0.0 ? std::sqrt(budget / total) : 1.0;
}

double relative_rank_gap(const ComplexMatrix& x) {
  const double tr = x.trace().real();
  if (!(tr > 0.0)) {
    return 0.0;
  }
  return std::max(0.0, tr - dominant_eigenpair(x).first) / tr;
}

void finish(SensingSolution& sol, const ComplexVector& w, const ComplexVector& v,
            const ChannelRealization& ch, const SensingParams& prm) {
  sol.w = w;
  sol.rho = v.cwiseAbs();
  sol.theta.resize(v.size());
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    sol.theta[n] = wrap_phase(safe_arg(v[n]));
  }
  sol.epsilon = design_threshold(prm);
  sol.pf = false_alarm_prob(sol.epsilon, prm);
  sol.gamma = active_snr(w, v, ch, prm);
  sol.pd = detection_prob_active(w, v, ch, sol.epsilon, prm);
  sol.diagnostics.power_with_pd =
      amplification_power(sol.theta, sol.rho, ch, prm, sol.pd).in_watts();
  if ((sol.rho.array() <= 1.0).any()) {
    sol.diagnostics.warnings.push_back(
        "some amplification factors are at most 1 (no actual amplification)");
  }
}

SolverSettings solver_settings(const ActiveOptions& opt, const SolverState* warm) {
  SolverSettings s;
  s.tol = opt.solver_tol;
  s.max_iter = opt.solver_max_iter;
  s.warm_start = warm;
  return s;
}

ComplexMatrix upper_left_selector(int dim) {
  ComplexMatrix sel = ComplexMatrix::Zero(dim, dim + 1);
  sel.leftCols(dim) = ComplexMatrix::Identity(dim, dim);
  return sel;
}

// Coefficient C on a lifted (d+1) block with Tr(C [[X, x], [x^H, 1]]) = Re(ref^H x).
ComplexMatrix corner_coupling(const ComplexVector& ref) {
  const Eigen::Index d = ref.size();
  ComplexMatrix c = ComplexMatrix::Zero(d + 1, d + 1);
  c.block(0, d, d, 1) = 0.5 * ref;
  c.block(d, 0, 1, d) = 0.5 * ref.adjoint();
  return c;
}

ComplexMatrix pad(const ComplexMatrix& a, Eigen::Index dim) {
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  out.topLeftCorner(a.rows(), a.cols()) = a;
  return out;
}

ComplexMatrix corner_indicator(Eigen::Index dim) {
  ComplexMatrix c = ComplexMatrix::Zero(dim, dim);
  c(dim - 1, dim - 1) = 1.0;
  return c;
}

double dc_scale(const ComplexMatrix& w_ref, const ComplexMatrix& x_ref) {
  const double wn = w_ref.norm();
  const double xn = x_ref.norm();
  return (wn > 0.0 && xn > 0.0) ? std::sqrt(xn / wn) : 1.0;
}

struct OneStageIterate {
  ComplexVector w;
  ComplexVector v;
};

struct SurrogateSolve {
  ComplexVector w;
  ComplexVector v;
  SolverStatus status = SolverStatus::IterationCap;
  double rank_gap = 0.0;
};

class OneStageSurrogate {
 public:
  OneStageSurrogate(const ChannelRealization& ch, const SensingParams& prm,
                    const ActiveOptions& opt)
      : ch_(ch), prm_(prm), opt_(opt), lifted_(lifted_channel(ch)),
        weights_(power_weights(ch, prm)) {}

  [[nodiscard]] const RealVector& weights() const { return weights_; }

  SurrogateSolve solve(const OneStageIterate& ref, double penalty_factor) {
    const int m = static_cast<int>(ch_.antennas());
    const int n = static_cast<int>(ch_.elements());
    const double snr_p = prm_.p / prm_.delta2;
    const double snr_s = prm_.sigma2 / prm_.delta2;

    const ComplexMatrix w_ref = ref.w * ref.w.adjoint();
    const ComplexVector x = lift(ref.v);
    const ComplexMatrix o_ref = x * x.adjoint();
    const ComplexMatrix sig_ref = lifted_ * o_ref * lifted_.adjoint();
    const ComplexMatrix noise_ref =
        ch_.h_mat * ref.v.cwiseAbs2().cast<cplx>().asDiagonal() * ch_.h_mat.adjoint();
    const double a_sig = dc_scale(w_ref, sig_ref);
    const double a_noise = dc_scale(w_ref, noise_ref);

    RealVector o_scale = RealVector::Ones(n + 1);
    o_scale.head(n).setConstant(uniform_scale(weights_, prm_.p_ris_max));

    ConvexSubproblem prob;
    const BlockId wb = prob.add_block("W", m + 1);
    const BlockId ob = prob.add_block("O", n + 1, o_scale);

    // Gradient of the linearized convex parts with respect to W and O.
    const ComplexMatrix w_grad = snr_p * (a_sig * a_sig * w_ref + sig_ref) +
                                 snr_s * (a_noise * a_noise * w_ref + noise_ref);
    const ComplexMatrix g_sig = w_ref + sig_ref / (a_sig * a_sig);
    const ComplexMatrix g_noise = w_ref + noise_ref / (a_noise * a_noise);
    ComplexMatrix o_grad = snr_p * lifted_.adjoint() * g_sig * lifted_;
    for (int k = 0; k < n; ++k) {
      o_grad(k, k) += snr_s * ch_.h_mat.col(k).dot(g_noise * ch_.h_mat.col(k));
    }
    o_grad = 0.5 * (o_grad + o_grad.adjoint()).eval();

    // Exact-penalty weights scale with the size of the objective gradient.
    const double eta_w = penalty_factor * w_grad.norm();
    const double eta_o = penalty_factor * o_grad.topLeftCorner(n, n).norm();

    prob.add_objective(prob.trace(wb, pad(w_grad - eta_w * ComplexMatrix::Identity(m, m), m + 1) +
                                          2.0 * eta_w * corner_coupling(ref.w)));
    ComplexMatrix o_lin = o_grad;
    o_lin.topLeftCorner(n, n) -= eta_o * ComplexMatrix::Identity(n, n);
    prob.add_objective(prob.trace(ob, o_lin + 2.0 * eta_o * corner_coupling(ref.v)));
    prob.add_objective_constant(1.0 -
                                0.5 * snr_p * (a_sig * w_ref + sig_ref / a_sig).squaredNorm() -
                                0.5 * snr_s * (a_noise * w_ref + noise_ref / a_noise).squaredNorm() -
                                eta_w * ref.w.squaredNorm() - eta_o * ref.v.squaredNorm());

    const ComplexMatrix sel_w = upper_left_selector(m);
    prob.add_concave_quadratic(snr_p * a_sig * a_sig + snr_s * a_noise * a_noise,
                               {{wb, sel_w, sel_w.adjoint()}});
    prob.add_concave_quadratic(snr_p / (a_sig * a_sig), {{ob, lifted_, lifted_.adjoint()}});
    std::vector<MapTerm> noise_terms;
    for (int k = 0; k < n; ++k) {
      ComplexMatrix left = ComplexMatrix::Zero(m, n + 1);
      left.col(k) = ch_.h_mat.col(k);
      noise_terms.push_back({ob, left, left.adjoint()});
    }
    if (snr_s > 0.0) {
      prob.add_concave_quadratic(snr_s / (a_noise * a_noise), std::move(noise_terms));
    }

    prob.add_equality(prob.trace(wb, pad(ComplexMatrix::Identity(m, m), m + 1)), 1.0);
    prob.add_equality(prob.trace(wb, corner_indicator(m + 1)), 1.0);
    prob.add_equality(prob.trace(ob, corner_indicator(n + 1)), 1.0);
    prob.add_less_equal(
        prob.trace(ob, pad(weights_.cast<cplx>().asDiagonal().toDenseMatrix(), n + 1)),
        prm_.p_ris_max);

    const SubproblemSolution sol = solve_concave_subproblem(
        prob, solver_settings(opt_, state_ ? &*state_ : nullptr));
    state_ = sol.state;

    SurrogateSolve out;
    out.status = sol.report.status;
    const ComplexMatrix w_mat = sol.blocks[0].topLeftCorner(m, m);
    out.w = dominant_eigenpair(w_mat).second;
    out.v = fit_budget(sol.blocks[1].block(0, n, n, 1), weights_, prm_.p_ris_max);
    out.rank_gap = std::max(relative_rank_gap(w_mat),
                            relative_rank_gap(sol.blocks[1].topLeftCorner(n, n)));
    return out;
  }

 private:
  const ChannelRealization& ch_;
  const SensingParams& prm_;
  const ActiveOptions& opt_;
  ComplexMatrix lifted_;
  RealVector weights_;
  std::optional<SolverState> state_;
};

}  // namespace

// ---------------------------------------------------------------------------

PowerValue amplification_power(const RealVector& theta, const RealVector& rho,
                               const ChannelRealization& ch, const SensingParams& prm,
                               double pd) {
  if (!(pd >= 0.0 && pd <= 1.0)) {
    throw DomainError("amplification_power: pd must lie in [0,1]");
  }
  if (theta.size() != rho.size() || rho.size() != ch.elements()) {
    throw DomainError("amplification_power: phase/amplification length mismatch");
  }
  return PowerValue::watts(pd * power_weights(ch, prm).dot(rho.cwiseAbs2()));
}

RealVector amplification_weights(const RealVector& rho, const ChannelRealization& ch,
                                 const SensingParams& prm) {
  if (rho.size() != ch.elements()) {
    throw DomainError("amplification_weights: length mismatch");
  }
  return power_weights(ch, prm).cwiseProduct(rho.cwiseAbs2());
}

RayleighBounds pd_bounds_rayleigh(const RealVector& rho, const ChannelRealization& ch,
                                  const SensingParams& prm) {
  const RealVector c = amplification_weights(rho, ch, prm);
  const double n = static_cast<double>(c.size());
  const double lambda_min = c.minCoeff();
  const double lambda_max = c.maxCoeff();
  RayleighBounds b;
  b.lower = lambda_max > 0.0 ? prm.p_ris_max / (n * lambda_max)
                             : std::numeric_limits<double>::infinity();
  b.upper = lambda_min > 0.0 ? prm.p_ris_max / (n * lambda_min)
                             : std::numeric_limits<double>::infinity();
  b.lower_clamped = std::min(1.0, b.lower);
  b.upper_clamped = std::min(1.0, b.upper);
  return b;
}

double trace_product_dc(const ComplexMatrix& w, const ComplexMatrix& x) {
  return 0.5 * (w + x).squaredNorm() - 0.5 * w.squaredNorm() - 0.5 * x.squaredNorm();
}

double trace_product_minorant(const ComplexMatrix& w, const ComplexMatrix& x,
                              const ComplexMatrix& w_ref, const ComplexMatrix& x_ref,
                              double scale) {
  if (!(scale > 0.0)) {
    throw DomainError("trace_product_minorant: scale must be positive");
  }
  const ComplexMatrix sum_ref = scale * w_ref + x_ref / scale;
  const ComplexMatrix sum = scale * w + x / scale;
  const double convex_lower =
      -0.5 * sum_ref.squaredNorm() + (sum_ref.adjoint() * sum).trace().real();
  return convex_lower - 0.5 * (scale * w).squaredNorm() - 0.5 * (x / scale).squaredNorm();
}

double rank_one_penalty(const ComplexMatrix& x_mat, const ComplexVector& x,
                        const ComplexVector& x_ref) {
  return x_mat.trace().real() - 2.0 * x_ref.dot(x).real() + x_ref.squaredNorm();
}

double normalized_signal_level(const ComplexMatrix& w_mat, const ComplexVector& v,
                               const ChannelRealization& ch, const SensingParams& prm) {
  const ComplexVector c = combined_channel(ch, v);
  const ComplexMatrix b = ch.h_mat * v.asDiagonal();
  const double signal = (c.adjoint() * w_mat * c)(0, 0).real();
  const double noise = (b.adjoint() * w_mat * b).trace().real();
  return (prm.p * signal + prm.sigma2 * noise) / prm.delta2 + 1.0;
}

double detection_margin(const ComplexMatrix& w_mat, const ComplexVector& v,
                        const ChannelRealization& ch, const SensingParams& prm, double t) {
  const double k = q_inverse(t) + prm.sqrt_samples();
  return k * normalized_signal_level(w_mat, v, ch, prm) -
         (q_inverse(prm.pf_max) + prm.sqrt_samples());
}

ComplexVector best_combiner(const ComplexVector& v, const ChannelRealization& ch,
                            const SensingParams& prm) {
  const ComplexVector c = combined_channel(ch, v);
  const ComplexMatrix b = ch.h_mat * v.asDiagonal();
  const ComplexMatrix a = prm.p * c * c.adjoint() + prm.sigma2 * b * b.adjoint();
  return dominant_eigenpair(a).second;
}

// ---------------------------------------------------------------------------
// One-stage design

SensingSolution one_stage_solve(const ChannelRealization& ch, const SensingParams& prm,
                                const ActiveOptions& opt) {
  ch.validate();
  prm.validate();
  if (ch.elements() < 1) {
    throw DomainError("one_stage_solve: at least one RIS element is required");
  }
  if (!(prm.p_ris_max > 0.0)) {
    throw DomainError("one_stage_solve: amplification budget must be positive");
  }

  OneStageSurrogate surrogate(ch, prm, opt);
  const SensingSolution passive = solve_passive(ch, prm);
  OneStageIterate cur;
  cur.v = fill_budget(reflection_vector(passive.theta, RealVector::Ones(passive.theta.size())),
                      surrogate.weights(), prm.p_ris_max);
  cur.w = best_combiner(cur.v, ch, prm);
  double level = signal_level(cur.w, cur.v, ch, prm);

  SensingSolution sol;
  SolveDiagnostics& diag = sol.diagnostics;
  diag.objective_history.push_back(level);

  constexpr int kPenaltyRetries = 4;
  double penalty = 0.05;
  for (int it = 1; it <= opt.max_outer_iterations; ++it) {
    diag.iterations = it;
    bool improved = false;
    double gain = 0.0;
    for (int attempt = 0; attempt <= kPenaltyRetries; ++attempt) {
      const SurrogateSolve step = surrogate.solve(cur, penalty);
      if (it == 1 && attempt == 0 && step.status == SolverStatus::Infeasible) {
        throw ActiveDesignError("one-stage subproblem reported infeasible at the first iterate");
      }
      diag.rank_one_gap = step.rank_gap;
      const double next = signal_level(step.w, step.v, ch, prm);
      if (next > level) {
        gain = (next - level) / level;
        cur = {step.w, step.v};
        level = next;
        improved = true;
        penalty = std::max(1e-3, 0.5 * penalty);
        break;
      }
      penalty *= 4.0;
    }
    diag.objective_history.push_back(level);
    if (!improved || gain < opt.relative_gain_tol) {
      diag.converged = true;
      break;
    }
  }
  if (!diag.converged) {
    diag.warnings.push_back("one-stage design stopped at the outer iteration limit");
  }
  if (diag.rank_one_gap > 1e-4) {
    diag.warnings.push_back("relaxed solution is not rank one within 1e-4");
  }
  finish(sol, cur.w, cur.v, ch, prm);
  diag.power_with_t = relaxed_power(cur.v, surrogate.weights());
  return sol;
}

// ---------------------------------------------------------------------------
// Two-stage design

namespace {

class TwoStageFeasibility {
 public:
  TwoStageFeasibility(const ChannelRealization& ch, const SensingParams& prm,
                      const ActiveOptions& opt)
      : ch_(ch), prm_(prm), opt_(opt), weights_(power_weights(ch, prm)) {}

  [[nodiscard]] const RealVector& weights() const { return weights_; }

  bool satisfies(const ComplexVector& w, const ComplexVector& v, double t) const {
    const double eps = design_threshold(prm_);
    const double pd = detection_prob_active(w, v, ch_, eps, prm_);
    const double power = t * relaxed_power(v, weights_);
    return pd >= t - opt_.feasibility_tol &&
           power <= prm_.p_ris_max * (1.0 + opt_.feasibility_tol);
  }

  // Alternating w / v rounds; returns true with (w, v) updated in place when the target is met.
  bool run(double t, ComplexVector& w, ComplexVector& v) {
    const double k = q_inverse(t) + prm_.sqrt_samples();
    if (!(k > 0.0)) {
      return false;
    }
    const double budget = prm_.p_ris_max / t;
    v = fit_budget(v, weights_, budget);
    if (satisfies(w, v, t)) {
      return true;
    }
    double level = signal_level(w, v, ch_, prm_);
    for (int round = 1; round <= opt_.max_ao_rounds; ++round) {
      ++rounds_;
      w = combiner_step(v, k);
      if (satisfies(w, v, t)) {
        return true;
      }
      v = reflection_step(w, k, budget);
      if (satisfies(w, v, t)) {
        return true;
      }
      const double next = signal_level(w, v, ch_, prm_);
      if (next - level <= 1e-9 * level) {
        break;
      }
      level = next;
    }
    return false;
  }

  [[nodiscard]] double rank_gap() const { return rank_gap_; }
  [[nodiscard]] int rounds() const { return rounds_; }

 private:
  ComplexVector combiner_step(const ComplexVector& v, double k) {
    const int m = static_cast<int>(ch_.antennas());
    const ComplexVector c = combined_channel(ch_, v);
    const ComplexMatrix b = ch_.h_mat * v.asDiagonal();
    const ComplexMatrix a =
        (prm_.p * c * c.adjoint() + prm_.sigma2 * b * b.adjoint()) / prm_.delta2;

    ConvexSubproblem prob;
    const BlockId wb = prob.add_block("W", m);
    prob.add_equality(prob.trace(wb), 1.0);
    prob.add_objective(k * prob.trace(wb, 0.5 * (a + a.adjoint())));
    prob.add_objective_constant(k - (q_inverse(prm_.pf_max) + prm_.sqrt_samples()));
    const SubproblemSolution sol = solve_concave_subproblem(
        prob, solver_settings(opt_, w_state_ ? &*w_state_ : nullptr));
    w_state_ = sol.state;
    return dominant_eigenpair(sol.blocks[0]).second;
  }

  ComplexVector reflection_step(const ComplexVector& w, double k, double budget) {
    const int n = static_cast<int>(ch_.elements());
    const ComplexVector g = coupling(w, ch_);
    ComplexVector h1(n + 1);
    h1.head(n) = g.cwiseProduct(ch_.h_r);
    h1[n] = w.dot(ch_.h_d);
    // |h1^T [v; 1]|^2 = [v; 1]^H conj(h1) h1^T [v; 1].
    const ComplexVector hc = h1.conjugate();
    ComplexMatrix obj = prm_.p / prm_.delta2 * hc * hc.adjoint();
    for (int j = 0; j < n; ++j) {
      obj(j, j) += prm_.sigma2 / prm_.delta2 * std::norm(g[j]);
    }
    obj = 0.5 * (obj + obj.adjoint()).eval();

    RealVector scale = RealVector::Ones(n + 1);
    scale.head(n).setConstant(uniform_scale(weights_, budget));
    ConvexSubproblem prob;
    const BlockId vb = prob.add_block("V", n + 1, scale);
    prob.add_equality(prob.trace(vb, corner_indicator(n + 1)), 1.0);
    prob.add_less_equal(
        prob.trace(vb, pad(weights_.cast<cplx>().asDiagonal().toDenseMatrix(), n + 1)), budget);
    prob.add_objective(k * prob.trace(vb, obj));
    prob.add_objective_constant(k - (q_inverse(prm_.pf_max) + prm_.sqrt_samples()));
    const SubproblemSolution sol = solve_concave_subproblem(
        prob, solver_settings(opt_, v_state_ ? &*v_state_ : nullptr));
    v_state_ = sol.state;

    const ComplexMatrix& lifted = sol.blocks[0];
    rank_gap_ = relative_rank_gap(lifted);
    // Candidate 1: the coupling column (power-feasible because V >= v v^H).
    ComplexVector best = fit_budget(lifted.block(0, n, n, 1), weights_, budget);
    double best_level = signal_level(w, best, ch_, prm_);
    // Candidate 2: dominant eigenvector normalized to a unit last entry.
    const auto [lambda, u] = dominant_eigenpair(lifted);
    if (std::abs(u[n]) > 1e-12 && lambda > 0.0) {
      const ComplexVector cand = fit_budget(u.head(n) / u[n], weights_, budget);
      const double cand_level = signal_level(w, cand, ch_, prm_);
      if (cand_level > best_level) {
        best = cand;
        best_level = cand_level;
      }
    }
    return best;
  }

  const ChannelRealization& ch_;
  const SensingParams& prm_;
  const ActiveOptions& opt_;
  RealVector weights_;
  std::optional<SolverState> w_state_;
  std::optional<SolverState> v_state_;
  double rank_gap_ = 0.0;
  int rounds_ = 0;
};

}  // namespace

SensingSolution two_stage_solve(const ChannelRealization& ch, const SensingParams& prm,
                                const ActiveOptions& opt) {
  ch.validate();
  prm.validate();
  if (ch.elements() < 1) {
    throw DomainError("two_stage_solve: at least one RIS element is required");
  }
  if (!(prm.p_ris_max > 0.0)) {
    throw DomainError("two_stage_solve: amplification budget must be positive");
  }

  TwoStageFeasibility feas(ch, prm, opt);
  const SensingSolution passive = solve_passive(ch, prm);
  const ComplexVector unit = reflection_vector(passive.theta, RealVector::Ones(passive.theta.size()));

  SensingSolution sol;
  SolveDiagnostics& diag = sol.diagnostics;
  double lo = opt.t_clamp;
  double hi = 1.0 - opt.t_clamp;

  // The clamp itself is always attainable: Pd >= Pf_max > t_clamp for any design.
  ComplexVector best_w = passive.w;
  ComplexVector best_v = fill_budget(unit, feas.weights(), prm.p_ris_max / lo);
  best_w = best_combiner(best_v, ch, prm);
  if (!feas.run(lo, best_w, best_v)) {
    diag.warnings.push_back("no design meets even the clamped detection target");
  }
  bool found_midpoint = false;
  diag.objective_history.push_back(signal_level(best_w, best_v, ch, prm));

  while (hi - lo >= opt.bisection_width) {
    const double mid = 0.5 * (lo + hi);
    diag.bisection_midpoints.push_back(mid);
    const double budget = prm.p_ris_max / mid;

    // Start from the last feasible point, both as is (shrunk to the budget) and
    // rescaled to use the full budget; keep the stronger one.
    ComplexVector v_keep = fit_budget(best_v, feas.weights(), budget);
    ComplexVector v_fill = fill_budget(best_v, feas.weights(), budget);
    ComplexVector w = best_combiner(v_fill, ch, prm);
    ComplexVector v = v_fill;
    if (signal_level(best_combiner(v_keep, ch, prm), v_keep, ch, prm) >
        signal_level(w, v_fill, ch, prm)) {
      v = v_keep;
      w = best_combiner(v_keep, ch, prm);
    }

    const bool ok = feas.run(mid, w, v);
    diag.bisection_feasible.push_back(ok);
    ++diag.iterations;
    if (ok) {
      lo = mid;
      best_w = w;
      best_v = v;
      found_midpoint = true;
    } else {
      hi = mid;
    }
    diag.objective_history.push_back(signal_level(best_w, best_v, ch, prm));
  }
  diag.t_lo = lo;
  diag.t_hi = hi;
  diag.converged = true;
  diag.rank_one_gap = feas.rank_gap();
  if (!found_midpoint) {
    diag.warnings.push_back("bisection found no feasible target above the lower clamp");
  }

  finish(sol, best_w, best_v, ch, prm);
  diag.power_with_t = lo * relaxed_power(best_v, feas.weights());
  return sol;
}

}  // namespace rissense
