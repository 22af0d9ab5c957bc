#include "rissense/rng.hpp"

#include <cmath>
#include <numbers>

namespace rissense {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) {
  return splitmix64(splitmix64(parent) ^ (label * 0xD1B54A32D192ED03ULL));
}

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::uint64_t key, std::uint64_t substream,
                                               std::uint64_t index) {
  std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(index),
                                   static_cast<std::uint32_t>(index >> 32),
                                   static_cast<std::uint32_t>(substream),
                                   static_cast<std::uint32_t>(substream >> 32)};
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t substream)
    : key_(key), substream_(substream) {}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = block(key_, substream_, index_++);
    used_ = 0;
  }
  return buffer_[static_cast<std::size_t>(used_++)];
}

double Philox4x32::uniform_open() {
  const std::uint32_t hi = (*this)();
  const std::uint32_t lo = (*this)();
  return to_unit_open(hi, lo);
}

cplx complex_normal_at(std::uint64_t key, std::uint64_t substream, std::uint64_t index) {
  const auto b = Philox4x32::block(key, substream, index);
  const double u1 = to_unit_open(b[0], b[1]);
  const double u2 = to_unit_open(b[2], b[3]);
  // Each component has variance 1/2, so E|z|^2 = 1.
  const double radius = std::sqrt(-std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double uniform_phase_at(std::uint64_t key, std::uint64_t substream, std::uint64_t index) {
  const auto b = Philox4x32::block(key, substream, index);
  return 2.0 * std::numbers::pi * (to_unit_open(b[0], b[1]) - 0.5 * 0x1.0p-53);
}

}  // namespace rissense
