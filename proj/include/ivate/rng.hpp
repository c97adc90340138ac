#pragma once

#include <array>
#include <cstdint>

namespace ivate {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A generator is identified by (seed, stream). The 64-bit seed is the Philox
// key; the stream id occupies the upper 64 bits of the 128-bit counter and a
// block index the lower 64 bits, so distinct streams never overlap and any
// (seed, stream) pair reproduces the same sequence on every platform.
// Distributions are implemented here rather than taken from <random>, whose
// distribution algorithms are implementation-defined.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace ivate
