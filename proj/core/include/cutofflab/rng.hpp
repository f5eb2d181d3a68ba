#pragma once

// Counter-based pseudo-random generator with per-sample streams.
//
// Generator: Philox2x64-10.  One block maps (counter0, counter1, key) to two
// 64-bit words through 10 rounds of
//     (hi, lo) = 128-bit product M * x0
//     x0' = hi ^ key ^ x1,  x1' = lo,  key += W
// with M = 0xD2B74407B1CE6E93 and W = 0x9E3779B97F4A7C15 (the round count and
// constants are part of the reproducibility contract; see README).
//
// Stream split: sample index i uses blocks counter = (block_index, i) under
// key = seed, consuming the two words of each block in order.  Distinct sample
// indices therefore never share generator output, so parallel simulation is
// reproducible for a fixed seed regardless of scheduling.

#include <array>
#include <cstdint>

namespace cutofflab {

std::array<std::uint64_t, 2> philox2x64(std::uint64_t counter0,
                                        std::uint64_t counter1,
                                        std::uint64_t key);

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t sample_index)
      : seed_(seed), sample_(sample_index) {}

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  // Poisson(mean): sequential inversion for mean <= 30, transformed-rejection
  // (PTRS) beyond.  mean must be finite and >= 0.
  std::int64_t poisson(double mean);

 private:
  std::uint64_t seed_;
  std::uint64_t sample_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

}  // namespace cutofflab
