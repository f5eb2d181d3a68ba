#include "cutofflab/rng.hpp"

#include <cmath>

#include "cutofflab/errors.hpp"

namespace cutofflab {

namespace {
constexpr std::uint64_t kMultiplier = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
}  // namespace

std::array<std::uint64_t, 2> philox2x64(std::uint64_t counter0,
                                        std::uint64_t counter1,
                                        std::uint64_t key) {
  std::uint64_t x0 = counter0;
  std::uint64_t x1 = counter1;
  for (int round = 0; round < 10; ++round) {
    const unsigned __int128 prod =
        static_cast<unsigned __int128>(kMultiplier) * x0;
    const auto hi = static_cast<std::uint64_t>(prod >> 64);
    const auto lo = static_cast<std::uint64_t>(prod);
    x0 = hi ^ key ^ x1;
    x1 = lo;
    key += kWeyl;
  }
  return {x0, x1};
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) {
    buffer_ = philox2x64(block_++, sample_, seed_);
    buffered_ = 2;
  }
  return buffer_[2 - buffered_--];
}

double RngStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw validation_error("poisson mean must be finite and nonnegative");
  }
  if (mean == 0.0) return 0;
  if (mean <= 30.0) {
    // Sequential inversion; exp(-30) ~ 9.4e-14 is well inside double range.
    const double u = next_unit();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 4000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // Hörmann's PTRS transformed-rejection sampler (valid for mean >= 10).
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = next_unit() - 0.5;
    double v = next_unit();
    const double us = 0.5 - std::fabs(u);
    const auto k = static_cast<std::int64_t>(
        std::floor((2.0 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    const double rhs =
        -mean + static_cast<double>(k) * log_mean - std::lgamma(static_cast<double>(k) + 1.0);
    if (lhs <= rhs) return k;
  }
}

}  // namespace cutofflab
