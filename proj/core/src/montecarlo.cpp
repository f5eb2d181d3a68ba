#include "cutofflab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cutofflab/errors.hpp"
#include "cutofflab/parallel.hpp"
#include "cutofflab/rng.hpp"

namespace cutofflab {

namespace {

void require_time(double t) {
  if (!(t >= 0.0)) throw validation_error("invalid time: t must be >= 0 and finite");
  if (!std::isfinite(t)) throw validation_error("invalid time: t must be finite");
}

std::vector<double> cos_table(std::int64_t q) {
  std::vector<double> cs(static_cast<std::size_t>(q));
  for (std::int64_t d = 0; d < q; ++d) {
    cs[static_cast<std::size_t>(d)] =
        std::cos(2.0 * std::numbers::pi * static_cast<double>(d) /
                 static_cast<double>(q));
  }
  return cs;
}

}  // namespace

EndpointSampler::EndpointSampler(const WalkSpec& walk)
    : q_(walk.q), m_(walk.m) {
  const auto& support = walk.increments.support;
  if (support.empty()) {
    throw validation_error("endpoint sampler: empty increment support");
  }
  steps_.reserve(support.size());
  cum_.reserve(support.size());
  Kahan running;
  for (const auto& entry : support) {
    std::vector<std::int64_t> residues(entry.v.size());
    for (std::size_t k = 0; k < residues.size(); ++k) {
      residues[k] = ((entry.v[k] % q_) + q_) % q_;
    }
    steps_.push_back(std::move(residues));
    running.add(to_double(entry.p));
    cum_.push_back(running.get());
  }
  // Guarantee the inverse-CDF search always lands inside the table.
  cum_.back() = 1.0;
}

void EndpointSampler::sample_digits(double t, std::uint64_t seed,
                                    std::uint64_t sample_index,
                                    std::span<std::int64_t> digits) const {
  require_time(t);
  if (static_cast<int>(digits.size()) != m_) {
    throw validation_error("endpoint sampler: digit span must have length m");
  }
  std::fill(digits.begin(), digits.end(), std::int64_t{0});
  RngStream rng(seed, sample_index);
  const std::int64_t jumps = rng.poisson(t);
  for (std::int64_t j = 0; j < jumps; ++j) {
    const double u = rng.next_unit();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    const std::size_t pick =
        it == cum_.end() ? cum_.size() - 1
                         : static_cast<std::size_t>(it - cum_.begin());
    const auto& step = steps_[pick];
    for (int k = 0; k < m_; ++k) {
      const std::size_t ks = static_cast<std::size_t>(k);
      digits[ks] += step[ks];
      if (digits[ks] >= q_) digits[ks] -= q_;
    }
  }
}

TorusVector EndpointSampler::sample(double t, std::uint64_t seed,
                                    std::uint64_t sample_index) const {
  std::vector<std::int64_t> digits(static_cast<std::size_t>(m_));
  sample_digits(t, seed, sample_index, digits);
  for (auto& d : digits) d = canonical_rep(d, q_);
  return TorusVector{std::move(digits), q_};
}

double psi_value(const TorusVector& x) {
  if (x.q < 2) throw validation_error("psi: q must be >= 2");
  Kahan sum;
  const double w = 2.0 * std::numbers::pi / static_cast<double>(x.q);
  for (const std::int64_t c : x.c) {
    // |c| keeps psi exactly even in x without relying on cos(-a) == cos(a).
    sum.add(std::cos(w * static_cast<double>(std::abs(c))));
  }
  return sum.get();
}

double psi_exact_mean(const WalkSpec& walk, double t) {
  require_time(t);
  Kahan sum;
  std::vector<std::int64_t> unit(static_cast<std::size_t>(walk.m), 0);
  for (int i = 0; i < walk.m; ++i) {
    unit[static_cast<std::size_t>(i)] = 1;
    sum.add(eigenvalue_at(walk, TorusVector{unit, walk.q}, t));
    unit[static_cast<std::size_t>(i)] = 0;
  }
  return sum.get();
}

PsiMoments psi_moments(const KernelVector& kernel) {
  if (kernel.q < 2 || kernel.m < 1) {
    throw validation_error("psi moments: kernel must carry q >= 2 and m >= 1");
  }
  const std::int64_t q = kernel.q;
  const int m = kernel.m;
  const std::vector<double> cs = cos_table(q);
  const std::size_t n_states = kernel.p.size();

  std::vector<std::int64_t> digits(static_cast<std::size_t>(m), 0);
  // Incremental psi along the digit odometer, re-anchored every 65536 states
  // to keep the running value drift-free.
  const auto fresh_psi = [&]() {
    Kahan s;
    for (int k = 0; k < m; ++k) {
      s.add(cs[static_cast<std::size_t>(digits[static_cast<std::size_t>(k)])]);
    }
    return s.get();
  };
  const auto pass = [&](auto&& weight) {
    std::fill(digits.begin(), digits.end(), std::int64_t{0});
    double psi = fresh_psi();
    Kahan acc;
    for (std::size_t idx = 0; idx < n_states; ++idx) {
      if ((idx & 0xFFFFu) == 0 && idx != 0) psi = fresh_psi();
      acc.add(weight(kernel.p[idx], psi));
      for (int k = 0; k < m; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const std::int64_t old = digits[ks];
        digits[ks] = old + 1 == q ? 0 : old + 1;
        psi += cs[static_cast<std::size_t>(digits[ks])] -
               cs[static_cast<std::size_t>(old)];
        if (digits[ks] != 0) break;
      }
    }
    return acc.get();
  };

  PsiMoments out;
  out.mean = pass([](double p, double psi) { return p * psi; });
  const double mean = out.mean;
  out.variance = pass([mean](double p, double psi) {
    const double d = psi - mean;
    return p * d * d;
  });
  return out;
}

PsiMoments psi_stationary_moments(const WalkSpec& walk) {
  PsiMoments out;
  out.mean = 0.0;
  if (walk.q >= 3) {
    out.variance = static_cast<double>(walk.m) / 2.0;
  } else {
    out.variance = walk.q == 2 ? static_cast<double>(walk.m) : 0.0;
  }
  return out;
}

PsiEstimate estimate_psi_stats(const WalkSpec& walk, double t,
                               std::int64_t samples, std::uint64_t seed,
                               const SpectralOptions& opts) {
  require_time(t);
  if (samples < 2) {
    throw validation_error("psi estimate: at least 2 samples are required");
  }
  const int threads = resolve_threads(opts.threads);
  const EndpointSampler sampler(walk);
  const std::vector<double> cs = cos_table(walk.q);

  std::vector<double> values(static_cast<std::size_t>(samples));
  const std::int64_t chunks = chunk_count(samples);
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [begin, end] = chunk_bounds(samples, chunks, c);
    std::vector<std::int64_t> digits(static_cast<std::size_t>(walk.m));
    for (std::int64_t i = begin; i < end; ++i) {
      sampler.sample_digits(t, seed, static_cast<std::uint64_t>(i), digits);
      Kahan s;
      for (const std::int64_t d : digits) {
        s.add(cs[static_cast<std::size_t>(d)]);
      }
      values[static_cast<std::size_t>(i)] = s.get();
    }
  });

  PsiEstimate out;
  out.samples = samples;
  const double total = reduce_chunked(
      samples, threads, [&](std::int64_t begin, std::int64_t end) {
        Kahan s;
        for (std::int64_t i = begin; i < end; ++i) {
          s.add(values[static_cast<std::size_t>(i)]);
        }
        return s.get();
      });
  out.mean = total / static_cast<double>(samples);
  const double mean = out.mean;
  const double ss = reduce_chunked(
      samples, threads, [&](std::int64_t begin, std::int64_t end) {
        Kahan s;
        for (std::int64_t i = begin; i < end; ++i) {
          const double d = values[static_cast<std::size_t>(i)] - mean;
          s.add(d * d);
        }
        return s.get();
      });
  out.variance = ss / static_cast<double>(samples - 1);
  out.ci95 = 1.96 * std::sqrt(out.variance / static_cast<double>(samples));
  return out;
}

double tv_lower_bound(double mean_a, double var_a, double mean_b,
                      double var_b) {
  if (!(var_a >= 0.0) || !(var_b >= 0.0)) {
    throw validation_error("tv lower bound: variances must be >= 0");
  }
  const double gap = std::abs(mean_a - mean_b);
  const double eta_sq = 0.5 * (var_a + var_b);
  if (eta_sq == 0.0) return gap > 0.0 ? 1.0 : 0.0;
  const double gap_sq = gap * gap;
  return gap_sq / (4.0 * eta_sq + gap_sq);
}

double mc_lower_bound(const WalkSpec& walk, double t, std::int64_t samples,
                      std::uint64_t seed, const SpectralOptions& opts) {
  const PsiEstimate est = estimate_psi_stats(walk, t, samples, seed, opts);
  const PsiMoments pi = psi_stationary_moments(walk);
  return tv_lower_bound(est.mean, est.variance, pi.mean, pi.variance);
}

std::vector<std::uint64_t> endpoint_counts(const WalkSpec& walk, double t,
                                           std::int64_t samples,
                                           std::uint64_t seed,
                                           const SpectralOptions& opts) {
  require_time(t);
  if (samples < 1) {
    throw validation_error("endpoint counts: at least 1 sample is required");
  }
  const std::uint64_t n_states =
      state_count(walk, static_cast<std::uint64_t>(opts.dense_budget));
  const EndpointSampler sampler(walk);
  std::vector<std::uint64_t> counts(n_states, 0);
  std::vector<std::int64_t> digits(static_cast<std::size_t>(walk.m));
  for (std::int64_t i = 0; i < samples; ++i) {
    sampler.sample_digits(t, seed, static_cast<std::uint64_t>(i), digits);
    std::uint64_t idx = 0;
    std::uint64_t mult = 1;
    for (int k = 0; k < walk.m; ++k) {
      idx += static_cast<std::uint64_t>(digits[static_cast<std::size_t>(k)]) * mult;
      mult *= static_cast<std::uint64_t>(walk.q);
    }
    ++counts[idx];
  }
  return counts;
}

}  // namespace cutofflab
