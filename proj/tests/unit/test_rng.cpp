#include <catch_amalgamated.hpp>

#include <set>

#include "rissense/rng.hpp"

using namespace rissense;
using Catch::Approx;

namespace {

std::uint64_t pack(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(Philox4x32::block(0, 0, 0) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  const std::uint64_t ones = ~std::uint64_t{0};
  CHECK(Philox4x32::block(ones, ones, ones) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(pack(0xa4093822, 0x299f31d0), pack(0x13198a2e, 0x03707344),
                          pack(0x243f6a88, 0x85a308d3)) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Philox stream is deterministic and keyed") {
  Philox4x32 a(42);
  Philox4x32 b(42);
  Philox4x32 c(43);
  int differ = 0;
  for (int k = 0; k < 100; ++k) {
    const auto x = a();
    CHECK(x == b());
    differ += x != c() ? 1 : 0;
  }
  CHECK(differ > 95);
}

TEST_CASE("uniform_open stays inside (0,1) with the right mean") {
  Philox4x32 gen(7);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = gen.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == Approx(0.5).margin(3.0 * std::sqrt(1.0 / 12.0 / n)));
}

TEST_CASE("complex_normal_at has unit power and zero mean") {
  const int n = 100000;
  cplx mean = 0.0;
  double power = 0.0;
  double pseudo = 0.0;
  for (int k = 0; k < n; ++k) {
    const cplx z = complex_normal_at(99, 0, static_cast<std::uint64_t>(k));
    mean += z;
    power += std::norm(z);
    pseudo += (z * z).real();
  }
  mean /= n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(power / n == Approx(1.0).margin(4.0 / std::sqrt(n)));
  CHECK(std::abs(pseudo / n) < 4.0 / std::sqrt(n));
}

TEST_CASE("derived seeds do not collide") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t parent = 0; parent < 50; ++parent) {
    for (std::uint64_t label = 0; label < 50; ++label) {
      seen.insert(derive_seed(parent, label));
    }
  }
  CHECK(seen.size() == 2500);
}
