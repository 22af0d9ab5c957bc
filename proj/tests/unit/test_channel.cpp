#include <catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "rissense/channel.hpp"

using namespace rissense;
using Catch::Approx;

TEST_CASE("path_loss reference values") {
  CHECK(path_loss(1.0, 3.5, -30.0, 1.0) == Approx(1e-3).epsilon(1e-12));
  CHECK(path_loss(2.0, 2.7, -20.0, 2.0) == Approx(1e-2).epsilon(1e-12));
  CHECK(path_loss(100.0, 2.0, -30.0, 1.0) == Approx(1e-7).epsilon(1e-12));
  CHECK_THROWS_AS(path_loss(0.0, 2.0, -30.0, 1.0), DomainError);
  CHECK_THROWS_AS(path_loss(-1.0, 2.0, -30.0, 1.0), DomainError);
  CHECK_THROWS_AS(path_loss(1.0, 2.0, -30.0, 0.0), DomainError);
}

TEST_CASE("geometry validation") {
  SystemGeometry g;
  CHECK_NOTHROW(g.validate());
  g.ris_pos = g.st_pos;
  CHECK_THROWS_AS(g.validate(), DomainError);
  g = SystemGeometry{};
  g.beta_pt_st = 0.0;
  CHECK_THROWS_AS(g.validate(), DomainError);
}

TEST_CASE("sample_channels shapes and determinism") {
  const SystemGeometry g;
  const ChannelRealization a = sample_channels(g, FadingModel::rayleigh(), 8, 6, 1234);
  const ChannelRealization b = sample_channels(g, FadingModel::rayleigh(), 8, 6, 1234);
  const ChannelRealization c = sample_channels(g, FadingModel::rayleigh(), 8, 6, 1235);
  CHECK(a.h_d.size() == 8);
  CHECK(a.h_r.size() == 6);
  CHECK(a.h_mat.rows() == 8);
  CHECK(a.h_mat.cols() == 6);
  CHECK(a.h_d == b.h_d);
  CHECK(a.h_r == b.h_r);
  CHECK(a.h_mat == b.h_mat);
  CHECK(a.h_d != c.h_d);

  // Growing the array keeps existing entries.
  const ChannelRealization big = sample_channels(g, FadingModel::rayleigh(), 10, 9, 1234);
  CHECK(big.h_d.head(8) == a.h_d);
  CHECK(big.h_r.head(6) == a.h_r);
  CHECK(big.h_mat.topLeftCorner(8, 6) == a.h_mat);

  CHECK_THROWS_AS(sample_channels(g, FadingModel::rayleigh(), 0, 6, 1), DomainError);
}

TEST_CASE("strong Rician factor collapses to line of sight") {
  const SystemGeometry g;
  const ChannelRealization ch = sample_channels(g, FadingModel::rician(300.0), 4, 5, 77);
  const double direct = std::sqrt(path_loss(distance(g.pt_pos, g.st_pos), g.beta_pt_st,
                                            g.a0_db, g.d0));
  const double incident = std::sqrt(path_loss(distance(g.pt_pos, g.ris_pos), g.beta_pt_ris,
                                              g.a0_db, g.d0));
  const double reflected = std::sqrt(path_loss(distance(g.ris_pos, g.st_pos), g.beta_ris_st,
                                               g.a0_db, g.d0));
  for (Eigen::Index m = 0; m < 4; ++m) {
    CHECK(std::abs(ch.h_d[m]) == Approx(direct).epsilon(1e-12));
    for (Eigen::Index n = 0; n < 5; ++n) {
      CHECK(std::abs(ch.h_mat(m, n)) == Approx(reflected).epsilon(1e-12));
    }
  }
  for (Eigen::Index n = 0; n < 5; ++n) {
    CHECK(std::abs(ch.h_r[n]) == Approx(incident).epsilon(1e-12));
  }
}

TEST_CASE("average link power equals configured path loss") {
  const SystemGeometry g;
  const double pl_direct = path_loss(distance(g.pt_pos, g.st_pos), g.beta_pt_st, g.a0_db, g.d0);
  const double pl_incident =
      path_loss(distance(g.pt_pos, g.ris_pos), g.beta_pt_ris, g.a0_db, g.d0);
  const double pl_reflected =
      path_loss(distance(g.ris_pos, g.st_pos), g.beta_ris_st, g.a0_db, g.d0);

  for (const FadingModel& fading : {FadingModel::rayleigh(), FadingModel::rician(3.0)}) {
    const int draws = 100000;
    double sd = 0.0, sr = 0.0, sh = 0.0;
    for (int k = 0; k < draws; ++k) {
      const ChannelRealization ch =
          sample_channels(g, fading, 1, 1, static_cast<std::uint64_t>(k));
      sd += std::norm(ch.h_d[0]);
      sr += std::norm(ch.h_r[0]);
      sh += std::norm(ch.h_mat(0, 0));
    }
    // |h|^2 / path_loss has unit mean and standard deviation at most one.
    const double tol = 3.0 / std::sqrt(draws);
    CHECK(sd / draws / pl_direct == Approx(1.0).margin(tol));
    CHECK(sr / draws / pl_incident == Approx(1.0).margin(tol));
    CHECK(sh / draws / pl_reflected == Approx(1.0).margin(tol));
    CHECK(sd / draws / pl_direct == Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("vanishing Rician factor matches the Rayleigh magnitude law") {
  const SystemGeometry g;
  const double pl = path_loss(distance(g.pt_pos, g.st_pos), g.beta_pt_st, g.a0_db, g.d0);
  const int draws = 10000;
  std::vector<double> mags;
  mags.reserve(draws);
  for (int k = 0; k < draws; ++k) {
    const ChannelRealization ch =
        sample_channels(g, FadingModel::rician(-300.0), 1, 1, static_cast<std::uint64_t>(k));
    mags.push_back(std::abs(ch.h_d[0]));
  }
  std::sort(mags.begin(), mags.end());
  double ks = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double cdf = 1.0 - std::exp(-mags[k] * mags[k] / pl);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(k) / draws),
                   std::abs(cdf - static_cast<double>(k + 1) / draws)});
  }
  // Kolmogorov critical value at the 1% level.
  CHECK(ks < 1.628 / std::sqrt(draws));
}
