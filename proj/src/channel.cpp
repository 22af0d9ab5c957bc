#include "rissense/channel.hpp"

#include <cmath>

#include "rissense/rng.hpp"

namespace rissense {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void SystemGeometry::validate() const {
  if (!(distance(pt_pos, ris_pos) > 0.0 && distance(ris_pos, st_pos) > 0.0 &&
        distance(pt_pos, st_pos) > 0.0)) {
    throw DomainError("geometry: node positions must be pairwise distinct");
  }
  if (!(beta_pt_ris > 0.0 && beta_ris_st > 0.0 && beta_pt_st > 0.0)) {
    throw DomainError("geometry: path-loss exponents must be positive");
  }
  if (!(d0 > 0.0) || !std::isfinite(a0_db)) {
    throw DomainError("geometry: reference distance must be positive");
  }
}

void ChannelRealization::validate() const {
  if (h_mat.rows() != h_d.size() || h_mat.cols() != h_r.size()) {
    throw DomainError("channel: h_mat must be M x N with M = |h_d| and N = |h_r|");
  }
  if (!h_d.allFinite() || !h_r.allFinite() || !h_mat.allFinite()) {
    throw DomainError("channel: entries must be finite");
  }
}

double path_loss(double d, double beta, double a0_db, double d0) {
  if (!(d > 0.0) || !(d0 > 0.0)) {
    throw DomainError("path_loss: distances must be positive");
  }
  return db_to_linear(a0_db) * std::pow(d / d0, -beta);
}

namespace {

enum Link : std::uint64_t { kDirect = 1, kIncident = 2, kReflected = 3 };

class SmallScale {
 public:
  SmallScale(const FadingModel& fading, std::uint64_t seed)
      : seed_(seed), rician_(fading.kind == FadingKind::Rician) {
    if (rician_) {
      if (!std::isfinite(fading.rician_factor_db)) {
        throw DomainError("fading: Rician factor must be finite");
      }
      const double kappa = db_to_linear(fading.rician_factor_db);
      los_ = std::sqrt(kappa / (1.0 + kappa));
      nlos_ = std::sqrt(1.0 / (1.0 + kappa));
    }
  }

  cplx draw(Link link, std::uint64_t row, std::uint64_t col) const {
    const std::uint64_t index = (row << 32) | col;
    const std::uint64_t key = derive_seed(seed_, link);
    const cplx scattered = complex_normal_at(key, 0, index);
    if (!rician_) {
      return scattered;
    }
    const double phase = uniform_phase_at(key, 1, index);
    return los_ * std::polar(1.0, phase) + nlos_ * scattered;
  }

 private:
  std::uint64_t seed_;
  bool rician_;
  double los_ = 0.0;
  double nlos_ = 1.0;
};

}  // namespace

ChannelRealization sample_channels(const SystemGeometry& geom, const FadingModel& fading,
                                   int antennas, int elements, std::uint64_t seed) {
  if (antennas < 1 || elements < 0) {
    throw DomainError("sample_channels: need M >= 1 and N >= 0");
  }
  geom.validate();
  const SmallScale fade(fading, seed);

  const double g_direct = std::sqrt(
      path_loss(distance(geom.pt_pos, geom.st_pos), geom.beta_pt_st, geom.a0_db, geom.d0));
  const double g_incident = std::sqrt(
      path_loss(distance(geom.pt_pos, geom.ris_pos), geom.beta_pt_ris, geom.a0_db, geom.d0));
  const double g_reflected = std::sqrt(
      path_loss(distance(geom.ris_pos, geom.st_pos), geom.beta_ris_st, geom.a0_db, geom.d0));

  ChannelRealization ch;
  ch.h_d.resize(antennas);
  ch.h_r.resize(elements);
  ch.h_mat.resize(antennas, elements);
  for (int m = 0; m < antennas; ++m) {
    ch.h_d[m] = g_direct * fade.draw(kDirect, static_cast<std::uint64_t>(m), 0);
  }
  for (int n = 0; n < elements; ++n) {
    ch.h_r[n] = g_incident * fade.draw(kIncident, static_cast<std::uint64_t>(n), 0);
  }
  for (int m = 0; m < antennas; ++m) {
    for (int n = 0; n < elements; ++n) {
      ch.h_mat(m, n) = g_reflected * fade.draw(kReflected, static_cast<std::uint64_t>(m),
                                               static_cast<std::uint64_t>(n));
    }
  }
  return ch;
}

}  // namespace rissense
