#pragma once

// Monte-Carlo endpoint simulation and the moment-method lower bound on
// total-variation distance.
//
// The distinguishing statistic is psi(x) = sum_i cos(2 pi x_i / q).  Under the
// uniform law psi has mean 0 and variance m/2 (q >= 3); under the time-t law
// its mean is sum_i lambda_{e_i}(t) with e_i the coordinate frequencies.  For
// two laws with means a, b and variances v_a, v_b, writing
// eta^2 = (v_a + v_b) / 2 and gap = |a - b|,
//   TV >= gap^2 / (4 eta^2 + gap^2).
//
// Sampling is counter-based: sample i consumes a private generator stream
// keyed by (seed, i), so a fixed seed reproduces every endpoint bit-for-bit
// regardless of thread count or evaluation order.

#include <cstdint>
#include <span>
#include <vector>

#include "cutofflab/spectral.hpp"
#include "cutofflab/torus.hpp"
#include "cutofflab/walks.hpp"

namespace cutofflab {

// Draws endpoints of the rate-1 continuous-time walk: a Poisson(t) number of
// jumps, each chosen from the increment distribution by inverse CDF.
class EndpointSampler {
 public:
  explicit EndpointSampler(const WalkSpec& walk);

  // Endpoint at time t for the given sample index, as nonnegative residues in
  // [0, q); digits.size() must equal m.
  void sample_digits(double t, std::uint64_t seed, std::uint64_t sample_index,
                     std::span<std::int64_t> digits) const;

  // Same endpoint as canonical representatives in [-q/2, q/2).
  TorusVector sample(double t, std::uint64_t seed,
                     std::uint64_t sample_index) const;

  std::int64_t q() const { return q_; }
  int m() const { return m_; }

 private:
  std::int64_t q_ = 0;
  int m_ = 0;
  std::vector<std::vector<std::int64_t>> steps_;  // increments as residues in [0, q)
  std::vector<double> cum_;                       // cumulative probabilities; back() == 1
};

// psi(x) = sum_i cos(2 pi x_i / q).
double psi_value(const TorusVector& x);

struct PsiMoments {
  double mean = 0;
  double variance = 0;
};

// Exact time-t mean of psi: sum over coordinates i of lambda_{e_i}(t).
double psi_exact_mean(const WalkSpec& walk, double t);

// Mean and variance of psi under an explicit dense law (weights taken as-is;
// pass a kernel of mass 1 for true moments).
PsiMoments psi_moments(const KernelVector& kernel);

// Moments of psi under the uniform law: mean 0; variance m/2 for q >= 3
// (q = 2 degenerates to m because every cosine is +-1).
PsiMoments psi_stationary_moments(const WalkSpec& walk);

struct PsiEstimate {
  double mean = 0;
  double variance = 0;  // unbiased sample variance
  double ci95 = 0;      // 1.96 sqrt(variance / samples)
  std::int64_t samples = 0;
};

// Simulates `samples` endpoints at time t and returns sample moments of psi.
// Deterministic in (walk, t, samples, seed); requires samples >= 2.
PsiEstimate estimate_psi_stats(const WalkSpec& walk, double t,
                               std::int64_t samples, std::uint64_t seed,
                               const SpectralOptions& opts = {});

// Moment-method bound gap^2 / (4 eta^2 + gap^2); a degenerate eta = 0 yields
// 1 when the means differ and 0 otherwise.
double tv_lower_bound(double mean_a, double var_a, double mean_b, double var_b);

// Monte-Carlo moments at time t against exact stationary moments, fed through
// tv_lower_bound.
double mc_lower_bound(const WalkSpec& walk, double t, std::int64_t samples,
                      std::uint64_t seed, const SpectralOptions& opts = {});

// Histogram of simulated endpoints over all q^m states under the dense state
// indexing; q^m must fit the dense budget.  Counts are exact integers, so the
// result is independent of accumulation order.
std::vector<std::uint64_t> endpoint_counts(const WalkSpec& walk, double t,
                                           std::int64_t samples,
                                           std::uint64_t seed,
                                           const SpectralOptions& opts = {});

}  // namespace cutofflab
