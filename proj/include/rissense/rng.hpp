#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "rissense/mathcore.hpp"

namespace rissense {

/// splitmix64 finalizer; used to derive independent 64-bit seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a stream label.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label);

/// Philox4x32-10 counter-based generator. Satisfies UniformRandomBitGenerator.
///
/// The 64-bit key selects the stream; the 128-bit counter is split into a
/// 64-bit block index (incremented as output is consumed) and a 64-bit
/// substream id, so random access to any (substream, block) is O(1).
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  explicit Philox4x32(std::uint64_t key, std::uint64_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Four 32-bit outputs for an explicit counter, independent of the internal position.
  static std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t substream,
                                            std::uint64_t index);

  /// Uniform double in (0,1) with 53 random bits, never 0 or 1.
  double uniform_open();

 private:
  std::uint64_t key_;
  std::uint64_t substream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

/// Unit-variance circularly-symmetric complex Gaussian from a fixed counter
/// (Box-Muller on one Philox block). Deterministic in (key, substream, index).
cplx complex_normal_at(std::uint64_t key, std::uint64_t substream, std::uint64_t index);

/// Uniform phase in [0, 2*pi) from a fixed counter.
double uniform_phase_at(std::uint64_t key, std::uint64_t substream, std::uint64_t index);

}  // namespace rissense
