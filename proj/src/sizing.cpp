#include "rissense/sizing.hpp"

#include <algorithm>
#include <cmath>

namespace rissense {

SizingInputs SizingInputs::from_channels(const ChannelRealization& ch, const SensingParams& prm) {
  ch.validate();
  if (ch.antennas() != 1) {
    throw DomainError("sizing: worst-element magnitudes need a single-antenna realization");
  }
  if (ch.elements() < 1) {
    throw DomainError("sizing: realization has no RIS elements");
  }
  SizingInputs s;
  s.prm = prm;
  s.h_min = ch.h_mat.row(0).cwiseAbs().minCoeff();
  s.hr_min = ch.h_r.cwiseAbs().minCoeff();
  return s;
}

SizingInputs SizingInputs::from_geometry(const SystemGeometry& g, int antennas,
                                         const SensingParams& prm) {
  g.validate();
  if (antennas < 1) {
    throw DomainError("sizing: at least one receive antenna is required");
  }
  SizingInputs s;
  s.prm = prm;
  s.h_min = std::sqrt(antennas *
                      path_loss(distance(g.ris_pos, g.st_pos), g.beta_ris_st, g.a0_db, g.d0));
  s.hr_min = std::sqrt(path_loss(distance(g.pt_pos, g.ris_pos), g.beta_pt_ris, g.a0_db, g.d0));
  return s;
}

void SizingInputs::validate() const {
  prm.validate();
  if (!(h_min > 0.0 && hr_min > 0.0)) {
    throw DomainError("sizing: channel magnitudes must be positive");
  }
}

double near_certain_detection() { return q_function(-3.0); }

namespace {

void require_enough_samples(const SensingParams& prm) {
  if (!(prm.sqrt_samples() > 3.0)) {
    throw DomainError("sizing: needs more than 9 samples");
  }
}

// delta2 * (Q^{-1}(pf_max) + sqrt(I)), i.e. epsilon * sqrt(I).
double scaled_threshold(const SensingParams& prm) {
  return prm.delta2 * (q_inverse(prm.pf_max) + prm.sqrt_samples());
}

double cascade_gain(const SizingInputs& s) {
  return s.h_min * s.h_min * s.hr_min * s.hr_min;
}

double q_argument(const SensingParams& prm, double received) {
  return scaled_threshold(prm) / received - prm.sqrt_samples();
}

// Total received power p N^2 |h|^2 |h_r|^2 + delta2 under passive alignment.
double passive_received(const SizingInputs& s, long elements) {
  const double n = static_cast<double>(elements);
  return s.prm.p * n * n * cascade_gain(s) + s.prm.delta2;
}

// Received power with the uniform optimal amplification substituted.
double active_received(const SizingInputs& s, long elements) {
  const SensingParams& prm = s.prm;
  if (!(prm.prob_h1 > 0.0)) {
    throw DomainError("sizing: activity prior must be positive for a finite amplification");
  }
  const double hr2 = s.hr_min * s.hr_min;
  const double h2 = s.h_min * s.h_min;
  const double n = static_cast<double>(elements);
  return (prm.p * n * cascade_gain(s) * prm.p_ris_max + prm.sigma2 * h2 * prm.p_ris_max) /
             (prm.prob_h1 * (prm.p * hr2 + prm.sigma2)) +
         prm.delta2;
}

bool meets_target(const SensingParams& prm, double received) {
  return q_argument(prm, received) <= -3.0;
}

// Smallest integer >= max(start, floor_value) with the predicate true; the
// closed-form bound is exact up to rounding, so only a few steps are taken.
template <typename Pred>
long fix_up(double bound, long floor_value, Pred pred) {
  long n = std::max(floor_value, static_cast<long>(std::ceil(std::max(bound, 0.0))));
  while (!pred(n)) {
    ++n;
  }
  while (n > floor_value && pred(n - 1)) {
    --n;
  }
  return n;
}

}  // namespace

double pd_passive_uniform(const SizingInputs& s, long elements) {
  return q_function(q_argument(s.prm, passive_received(s, elements)));
}

double min_elements_passive_bound(const SizingInputs& s) {
  s.validate();
  require_enough_samples(s.prm);
  const double pc = s.prm.p * cascade_gain(s);
  const double radicand = scaled_threshold(s.prm) / ((s.prm.sqrt_samples() - 3.0) * pc) -
                          s.prm.delta2 / pc;
  return radicand > 0.0 ? std::sqrt(radicand) : 0.0;
}

long min_elements_passive(const SizingInputs& s) {
  const double bound = min_elements_passive_bound(s);
  return fix_up(bound, 1, [&](long n) { return meets_target(s.prm, passive_received(s, n)); });
}

double optimal_uniform_amplification(const SizingInputs& s, long elements) {
  if (elements < 1) {
    throw DomainError("optimal_uniform_amplification: needs at least one element");
  }
  const SensingParams& prm = s.prm;
  if (!(prm.prob_h1 > 0.0)) {
    throw DomainError("optimal_uniform_amplification: activity prior must be positive");
  }
  return std::sqrt(prm.p_ris_max / (prm.prob_h1 * static_cast<double>(elements) *
                                    (prm.p * s.hr_min * s.hr_min + prm.sigma2)));
}

double pd_active_uniform(const SizingInputs& s, long elements) {
  return q_function(q_argument(s.prm, active_received(s, elements)));
}

double min_elements_active_bound(const SizingInputs& s) {
  s.validate();
  require_enough_samples(s.prm);
  const SensingParams& prm = s.prm;
  const double hr2 = s.hr_min * s.hr_min;
  const double h2 = s.h_min * s.h_min;
  const double denom = prm.p * cascade_gain(s) * prm.p_ris_max;
  const double first = prm.prob_h1 * (prm.p * hr2 + prm.sigma2) * scaled_threshold(prm) /
                       ((prm.sqrt_samples() - 3.0) * denom);
  const double second =
      (prm.prob_h1 * prm.delta2 * (prm.p * hr2 + prm.sigma2) + prm.sigma2 * h2 * prm.p_ris_max) /
      denom;
  return std::max(first - second, 0.0);
}

long min_elements_active(const SizingInputs& s) {
  const double bound = min_elements_active_bound(s);
  return fix_up(bound, 0, [&](long n) { return meets_target(s.prm, active_received(s, n)); });
}

Comparison compare_active_passive(const SizingInputs& s, long n_act, long n_pas) {
  s.validate();
  if (n_act < 1 || n_pas < 1) {
    throw DomainError("compare_active_passive: counts must be at least one");
  }
  const SensingParams& prm = s.prm;
  const double hr2 = s.hr_min * s.hr_min;
  const double h2 = s.h_min * s.h_min;
  const double na = static_cast<double>(n_act);
  const double np = static_cast<double>(n_pas);

  const double active_side = (prm.p * cascade_gain(s) * na * prm.p_ris_max +
                              prm.sigma2 * h2 * prm.p_ris_max) /
                             (prm.prob_h1 * (prm.p * hr2 + prm.sigma2));
  const double passive_side = prm.p * cascade_gain(s) * np * np;

  Comparison c;
  c.verdict = active_side > passive_side ? Verdict::ActiveWins : Verdict::PassiveWins;
  c.sufficient_condition = na * na + prm.sigma2 / (prm.p * hr2) * na > np * np;
  c.amplifying = optimal_uniform_amplification(s, n_act) >= 1.0;
  return c;
}

ElementCounts elements_from_power_budget(PowerValue p_total, PowerValue p_c, PowerValue p_dc,
                                         PowerValue p_ris_max) {
  const double pc = p_c.in_watts();
  const double per_active = pc + p_dc.in_watts();
  if (!(pc > 0.0) || !(per_active > 0.0)) {
    throw DomainError("elements_from_power_budget: per-element power must be positive");
  }
  // Ratios that are integers in exact arithmetic must not floor one below.
  constexpr double kSlack = 1e-9;
  ElementCounts counts;
  counts.passive = static_cast<long>(std::floor(p_total.in_watts() / pc + kSlack));
  const double spare = p_total.in_watts() - p_ris_max.in_watts();
  counts.active = spare > 0.0 ? static_cast<long>(std::floor(spare / per_active + kSlack)) : 0;
  return counts;
}

}  // namespace rissense
