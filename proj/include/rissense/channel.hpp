#pragma once

#include <cstdint>

#include "rissense/mathcore.hpp"

namespace rissense {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(const Point2& a, const Point2& b);

struct SystemGeometry {
  Point2 pt_pos{0.0, 0.0};
  Point2 ris_pos{50.0, 20.0};
  Point2 st_pos{500.0, 0.0};
  double beta_pt_ris = 2.0;
  double beta_ris_st = 2.6;
  double beta_pt_st = 3.5;
  double a0_db = -30.0;
  double d0 = 1.0;

  /// Throws DomainError if any distance, exponent, or d0 is nonpositive.
  void validate() const;
  bool operator==(const SystemGeometry&) const = default;
};

enum class FadingKind { Rayleigh, Rician };

struct FadingModel {
  FadingKind kind = FadingKind::Rayleigh;
  double rician_factor_db = 0.0;  // ignored for Rayleigh

  static FadingModel rayleigh() { return {}; }
  static FadingModel rician(double factor_db) { return {FadingKind::Rician, factor_db}; }
  bool operator==(const FadingModel&) const = default;
};

struct ChannelRealization {
  ComplexVector h_d;    // PT -> ST, length M
  ComplexVector h_r;    // PT -> RIS, length N
  ComplexMatrix h_mat;  // RIS -> ST, M x N

  [[nodiscard]] Eigen::Index antennas() const { return h_d.size(); }
  [[nodiscard]] Eigen::Index elements() const { return h_r.size(); }

  /// Throws DomainError on inconsistent dimensions or non-finite entries.
  void validate() const;
};

/// Large-scale gain 10^(a0_db/10) * (d/d0)^(-beta).
double path_loss(double d, double beta, double a0_db, double d0);

/// Draws one realization. Entry (m, n) of each link depends only on
/// (seed, link, m, n), so growing M or N keeps the existing entries.
ChannelRealization sample_channels(const SystemGeometry& geom, const FadingModel& fading,
                                   int antennas, int elements, std::uint64_t seed);

}  // namespace rissense
