#pragma once

#include "rissense/channel.hpp"
#include "rissense/detector.hpp"

namespace rissense {

/// Single-antenna, no-direct-link model with worst-element channel magnitudes.
struct SizingInputs {
  SensingParams prm;
  double h_min = 0.0;   // min_n |h_n|, RIS -> ST
  double hr_min = 0.0;  // min_n |h_r,n|, PT -> RIS

  /// Extracts worst-element magnitudes from a single-antenna realization.
  static SizingInputs from_channels(const ChannelRealization& ch, const SensingParams& prm);

  /// Large-scale magnitudes of the geometry: |h_r|^2 = PL(PT-RIS) and
  /// |h|^2 = antennas * PL(RIS-ST), the receive-array gain folded into the RIS-ST link.
  static SizingInputs from_geometry(const SystemGeometry& g, int antennas,
                                    const SensingParams& prm);

  void validate() const;
};

/// Target detection probability Q(-3) used to declare "Pd close to one".
double near_certain_detection();

/// Passive Pd at N elements with every cascaded term at worst-case magnitude.
double pd_passive_uniform(const SizingInputs& s, long elements);

/// Smallest N with pd_passive_uniform(N) >= Q(-3).
long min_elements_passive(const SizingInputs& s);

/// Amplification that makes the relaxed power budget active for N equal elements.
double optimal_uniform_amplification(const SizingInputs& s, long elements);

/// Active Pd at N elements with the uniform amplification above.
double pd_active_uniform(const SizingInputs& s, long elements);

/// Smallest N >= 0 with pd_active_uniform(N) >= Q(-3).
long min_elements_active(const SizingInputs& s);

/// Unrounded lower bounds on N (the counts above are their ceilings, fixed up).
double min_elements_passive_bound(const SizingInputs& s);
double min_elements_active_bound(const SizingInputs& s);

enum class Verdict { ActiveWins, PassiveWins };

struct Comparison {
  Verdict verdict = Verdict::PassiveWins;
  bool sufficient_condition = false;  // N_act^2 + (sigma2/(p hr^2)) N_act > N_pas^2
  bool amplifying = false;  // optimal amplification at n_act is >= 1
};

/// Compares the two uniform-amplification Pd expressions at the given counts.
Comparison compare_active_passive(const SizingInputs& s, long n_act, long n_pas);

struct ElementCounts {
  long passive = 0;
  long active = 0;
};

/// floor(P_T / P_C) passive elements and floor((P_T - P_RIS) / (P_C + P_DC)) active ones.
ElementCounts elements_from_power_budget(PowerValue p_total, PowerValue p_c, PowerValue p_dc,
                                         PowerValue p_ris_max);

}  // namespace rissense
