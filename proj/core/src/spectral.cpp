#include "cutofflab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cutofflab/errors.hpp"
#include "cutofflab/parallel.hpp"

namespace cutofflab {
namespace {

// Beyond this many states the axis-pass in-memory kernel is refused and the
// half-spectrum FFTW engine takes over (see DenseTvEvaluator).
constexpr std::uint64_t kOwnPathMax = std::uint64_t{1} << 24;
// The discrete-power oracle and the Dirichlet form keep explicit permutation
// tables; they are meant for cross-checks on small instances only.
constexpr std::uint64_t kOracleMaxStates = 100'000;
constexpr double kOracleMaxTime = 600.0;
// Kernel post-processing contract.
constexpr double kImagTol = 1e-10;
constexpr double kNegTol = 1e-12;
constexpr double kMassTol = 1e-9;

void require_time(double t) {
  if (!(t >= 0.0)) throw validation_error("invalid time: t must be >= 0 and finite");
  if (!std::isfinite(t)) throw validation_error("invalid time: t must be finite");
}

// All phases that occur in the closed-form characteristic functions are
// integer multiples of 2 pi / q, so every cosine is a table lookup.  cs4
// covers phase indices in [-2q, 2q) shifted by +2q, which is enough for the
// four-corner differences of the dg_nxn form.
struct TrigTables {
  std::int64_t q = 0;
  std::vector<double> cs, sn;  // cos/sin(2 pi k / q), k in [0, q)
  std::vector<double> cs4;     // cos(2 pi x / q) at index x + 2q
};

TrigTables make_trig(std::int64_t q) {
  TrigTables tt;
  tt.q = q;
  tt.cs.resize(static_cast<std::size_t>(q));
  tt.sn.resize(static_cast<std::size_t>(q));
  const double w = 2.0 * std::numbers::pi / static_cast<double>(q);
  for (std::int64_t k = 0; k < q; ++k) {
    tt.cs[static_cast<std::size_t>(k)] = std::cos(w * static_cast<double>(k));
    tt.sn[static_cast<std::size_t>(k)] = std::sin(w * static_cast<double>(k));
  }
  tt.cs4.resize(static_cast<std::size_t>(4 * q));
  for (std::int64_t x = -2 * q; x < 2 * q; ++x) {
    const std::int64_t k = ((x % q) + q) % q;
    tt.cs4[static_cast<std::size_t>(x + 2 * q)] = tt.cs[static_cast<std::size_t>(k)];
  }
  return tt;
}

// Folded cosine terms for a generic (custom) support: one term per increment
// pair {g, -g} with weight 2p (weight p for self-inverse increments).
struct GenericTerms {
  std::vector<std::int64_t> flat;  // terms x m coordinates
  std::vector<double> w;
};

GenericTerms fold_support(const IncrementDistribution& mu) {
  GenericTerms terms;
  for (const auto& entry : mu.support) {
    std::vector<std::int64_t> neg(entry.v.size());
    for (std::size_t k = 0; k < entry.v.size(); ++k) {
      neg[k] = canonical_rep(-entry.v[k], mu.q);
    }
    if (entry.v < neg) continue;  // the partner entry contributes the term
    terms.w.push_back((entry.v == neg ? 1.0 : 2.0) * to_double(entry.p));
    terms.flat.insert(terms.flat.end(), entry.v.begin(), entry.v.end());
  }
  return terms;
}

struct PhiContext {
  TrigTables tt;
  GenericTerms gen;  // populated for custom walks only
};

PhiContext make_context(const WalkSpec& walk) {
  PhiContext ctx;
  ctx.tt = make_trig(walk.q);
  if (walk.kind == WalkKind::custom) ctx.gen = fold_support(walk.increments);
  return ctx;
}

// Incremental evaluators of Phi(2 pi y / q) over the digit odometer.  The
// scan resets at every chunk boundary, so incremental drift never accumulates
// past ~10^5 updates, and the fixed chunk decomposition makes results
// identical for every worker count.

class Dg1xnEval {
 public:
  Dg1xnEval(const PhiContext& ctx, const WalkSpec& walk)
      : tt_(ctx.tt),
        n_(static_cast<double>(walk.n)),
        inv_(1.0 / (static_cast<double>(walk.n) * (walk.n - 1))) {}

  void reset(const std::int64_t* dig, int m) {
    re_ = 1.0;
    im_ = 0.0;
    for (int k = 0; k < m; ++k) {
      re_ += tt_.cs[static_cast<std::size_t>(dig[k])];
      im_ += tt_.sn[static_cast<std::size_t>(dig[k])];
    }
  }
  void advance(int, std::int64_t od, std::int64_t nd) {
    re_ += tt_.cs[static_cast<std::size_t>(nd)] - tt_.cs[static_cast<std::size_t>(od)];
    im_ += tt_.sn[static_cast<std::size_t>(nd)] - tt_.sn[static_cast<std::size_t>(od)];
  }
  // Phi = (|1 + sum_j e^{i theta_j}|^2 - n) / (n (n - 1)).
  double value() const { return (re_ * re_ + im_ * im_ - n_) * inv_; }

 private:
  const TrigTables& tt_;
  double n_, inv_;
  double re_ = 0.0, im_ = 0.0;
};

class SrwEval {
 public:
  SrwEval(const PhiContext& ctx, const WalkSpec& walk)
      : tt_(ctx.tt), inv_(1.0 / static_cast<double>(walk.m)) {}

  void reset(const std::int64_t* dig, int m) {
    sum_ = 0.0;
    for (int k = 0; k < m; ++k) sum_ += tt_.cs[static_cast<std::size_t>(dig[k])];
  }
  void advance(int, std::int64_t od, std::int64_t nd) {
    sum_ += tt_.cs[static_cast<std::size_t>(nd)] - tt_.cs[static_cast<std::size_t>(od)];
  }
  double value() const { return sum_ * inv_; }

 private:
  const TrigTables& tt_;
  double inv_;
  double sum_ = 0.0;
};

class DgnxnEval {
 public:
  DgnxnEval(const PhiContext& ctx, const WalkSpec& walk)
      : tt_(ctx.tt), d_(walk.n - 1), dig_(static_cast<std::size_t>(walk.m), 0) {
    const double pairs = static_cast<double>(walk.n) * (walk.n - 1) / 2.0;
    inv_ = 1.0 / (pairs * pairs);
  }

  void reset(const std::int64_t* dig, int m) {
    dig_.assign(dig, dig + m);
  }
  void advance(int axis, std::int64_t, std::int64_t nd) {
    dig_[static_cast<std::size_t>(axis)] = nd;
  }
  double value() const {
    const std::int64_t off = 2 * tt_.q;
    const auto at = [&](int row, int col) {
      return dig_[static_cast<std::size_t>(row * d_ + col)];
    };
    Kahan acc;
    for (int i = 1; i < d_; ++i)
      for (int l = 0; l < i; ++l)
        for (int j = 1; j < d_; ++j)
          for (int k = 0; k < j; ++k)
            acc.add(tt_.cs4[static_cast<std::size_t>(
                at(i, j) - at(i, k) - at(l, j) + at(l, k) + off)]);
    for (int i = 1; i < d_; ++i)
      for (int l = 0; l < i; ++l)
        for (int j = 0; j < d_; ++j)
          acc.add(tt_.cs4[static_cast<std::size_t>(at(i, j) - at(l, j) + off)]);
    for (int j = 1; j < d_; ++j)
      for (int k = 0; k < j; ++k)
        for (int i = 0; i < d_; ++i)
          acc.add(tt_.cs4[static_cast<std::size_t>(at(i, j) - at(i, k) + off)]);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        acc.add(tt_.cs[static_cast<std::size_t>(at(i, j))]);
    return acc.get() * inv_;
  }

 private:
  const TrigTables& tt_;
  int d_;
  double inv_ = 0.0;
  std::vector<std::int64_t> dig_;
};

class GenericEval {
 public:
  GenericEval(const PhiContext& ctx, const WalkSpec& walk)
      : tt_(ctx.tt), gen_(ctx.gen), m_(walk.m),
        dig_(static_cast<std::size_t>(walk.m), 0) {}

  void reset(const std::int64_t* dig, int m) { dig_.assign(dig, dig + m); }
  void advance(int axis, std::int64_t, std::int64_t nd) {
    dig_[static_cast<std::size_t>(axis)] = nd;
  }
  double value() const {
    const std::int64_t q = tt_.q;
    Kahan acc;
    const std::size_t terms = gen_.w.size();
    for (std::size_t r = 0; r < terms; ++r) {
      const std::int64_t* g = gen_.flat.data() + r * static_cast<std::size_t>(m_);
      std::int64_t dot = 0;
      for (int k = 0; k < m_; ++k) dot += dig_[static_cast<std::size_t>(k)] * g[k];
      acc.add(gen_.w[r] * tt_.cs[static_cast<std::size_t>(((dot % q) + q) % q)]);
    }
    return acc.get();
  }

 private:
  const TrigTables& tt_;
  const GenericTerms& gen_;
  int m_;
  std::vector<std::int64_t> dig_;
};

// use(make_eval) with make_eval a factory producing a fresh evaluator; the
// switch keeps virtual dispatch out of the inner loops.
template <class Use>
decltype(auto) dispatch_eval(const WalkSpec& walk, const PhiContext& ctx, Use&& use) {
  switch (walk.kind) {
    case WalkKind::dg_1xn:
      return use([&] { return Dg1xnEval(ctx, walk); });
    case WalkKind::dg_nxn:
      return use([&] { return DgnxnEval(ctx, walk); });
    case WalkKind::srw:
      return use([&] { return SrwEval(ctx, walk); });
    case WalkKind::custom:
      return use([&] { return GenericEval(ctx, walk); });
  }
  throw validation_error("unknown walk kind");
}

std::vector<std::int64_t> decode_digits(std::uint64_t index, std::int64_t q, int m) {
  std::vector<std::int64_t> dig(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    dig[static_cast<std::size_t>(k)] =
        static_cast<std::int64_t>(index % static_cast<std::uint64_t>(q));
    index /= static_cast<std::uint64_t>(q);
  }
  return dig;
}

// Runs body(index, eval) over [lo, hi) in index order; digit 0 varies fastest
// and every digit change is forwarded to the evaluator.
template <class Eval, class Body>
void scan_range(std::int64_t q, int m, std::uint64_t lo, std::uint64_t hi,
                Eval& eval, Body&& body) {
  if (lo >= hi) return;
  std::vector<std::int64_t> dig = decode_digits(lo, q, m);
  eval.reset(dig.data(), m);
  for (std::uint64_t idx = lo;;) {
    body(idx, eval);
    if (++idx == hi) break;
    int axis = 0;
    for (;;) {
      const std::int64_t od = dig[static_cast<std::size_t>(axis)];
      std::int64_t nd = od + 1;
      if (nd == q) nd = 0;
      dig[static_cast<std::size_t>(axis)] = nd;
      eval.advance(axis, od, nd);
      if (nd != 0) break;
      ++axis;
    }
  }
}

std::uint64_t checked_states(std::int64_t q, int m, std::uint64_t cap,
                             const char* what) {
  std::uint64_t count = 1;
  for (int k = 0; k < m; ++k) {
    if (count > cap / static_cast<std::uint64_t>(q)) {
      throw budget_error(std::string(what) + ": state space q^m with q=" +
                         std::to_string(q) + ", m=" + std::to_string(m) +
                         " exceeds the budget of " + std::to_string(cap) +
                         " states");
    }
    count *= static_cast<std::uint64_t>(q);
  }
  return count;
}

// ---------------------------------------------------------------------------
// Axis-pass DFT for the in-memory kernel path.

void dft_axes(std::complex<double>* a, std::uint64_t n_states, std::int64_t q,
              int m, const TrigTables& tt, int threads) {
  const std::uint64_t lines = n_states / static_cast<std::uint64_t>(q);
  const std::size_t qz = static_cast<std::size_t>(q);
  // Twiddle table W[k][j] = e^{-2 pi i k j / q}; recomputed via index
  // arithmetic for very large q to keep memory bounded.
  const bool use_table = q <= 1024;
  std::vector<std::complex<double>> w_table;
  if (use_table) {
    w_table.resize(qz * qz);
    for (std::int64_t k = 0; k < q; ++k) {
      for (std::int64_t j = 0; j < q; ++j) {
        const std::size_t idx = static_cast<std::size_t>((k * j) % q);
        w_table[static_cast<std::size_t>(k) * qz + static_cast<std::size_t>(j)] =
            {tt.cs[idx], -tt.sn[idx]};
      }
    }
  }
  std::uint64_t stride = 1;
  for (int axis = 0; axis < m; ++axis) {
    const std::int64_t chunks = chunk_count(static_cast<std::int64_t>(lines));
    parallel_chunks(chunks, threads, [&](std::int64_t c) {
      const auto [lo, hi] =
          chunk_bounds(static_cast<std::int64_t>(lines), chunks, c);
      std::vector<std::complex<double>> in(qz), out(qz);
      for (std::int64_t line = lo; line < hi; ++line) {
        const std::uint64_t block = static_cast<std::uint64_t>(line) / stride;
        const std::uint64_t inner = static_cast<std::uint64_t>(line) % stride;
        const std::uint64_t base = block * stride * static_cast<std::uint64_t>(q) + inner;
        for (std::size_t j = 0; j < qz; ++j) in[j] = a[base + j * stride];
        if (use_table) {
          for (std::size_t k = 0; k < qz; ++k) {
            const std::complex<double>* row = w_table.data() + k * qz;
            double re = 0.0, im = 0.0;
            for (std::size_t j = 0; j < qz; ++j) {
              const std::complex<double> w = row[j];
              const std::complex<double> x = in[j];
              re += w.real() * x.real() - w.imag() * x.imag();
              im += w.real() * x.imag() + w.imag() * x.real();
            }
            out[k] = {re, im};
          }
        } else {
          for (std::int64_t k = 0; k < q; ++k) {
            double re = 0.0, im = 0.0;
            for (std::int64_t j = 0; j < q; ++j) {
              const std::size_t idx = static_cast<std::size_t>((k * j) % q);
              const double wr = tt.cs[idx], wi = -tt.sn[idx];
              const std::complex<double> x = in[static_cast<std::size_t>(j)];
              re += wr * x.real() - wi * x.imag();
              im += wr * x.imag() + wi * x.real();
            }
            out[static_cast<std::size_t>(k)] = {re, im};
          }
        }
        for (std::size_t k = 0; k < qz; ++k) a[base + k * stride] = out[k];
      }
    });
    stride *= static_cast<std::uint64_t>(q);
  }
}

template <class MakeEval>
double fill_spectrum(const WalkSpec& walk, double t, std::complex<double>* spec,
                     std::uint64_t n_states, int threads, const MakeEval& make) {
  const std::int64_t chunks = chunk_count(static_cast<std::int64_t>(n_states));
  std::vector<Kahan> parts(static_cast<std::size_t>(chunks));
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [lo, hi] =
        chunk_bounds(static_cast<std::int64_t>(n_states), chunks, c);
    auto eval = make();
    Kahan part;
    scan_range(walk.q, walk.m, static_cast<std::uint64_t>(lo),
               static_cast<std::uint64_t>(hi), eval,
               [&](std::uint64_t idx, auto& ev) {
                 const double lam = std::exp(t * (ev.value() - 1.0));
                 spec[idx] = {lam, 0.0};
                 part.add(lam * lam);
               });
    parts[static_cast<std::size_t>(c)] = part;
  });
  Kahan total;
  for (const Kahan& p : parts) total.add(p.get());
  return total.get() - 1.0;  // -1 + sum_y lambda_y^2
}

KernelVector finalize_kernel(const std::complex<double>* spec, std::uint64_t n_states,
                             std::int64_t q, int m, double t, int threads) {
  const double inv_n = 1.0 / static_cast<double>(n_states);
  struct Part {
    double max_im = 0.0;
    double min_p = std::numeric_limits<double>::infinity();
    Kahan sum;
  };
  const std::int64_t chunks = chunk_count(static_cast<std::int64_t>(n_states));
  std::vector<Part> parts(static_cast<std::size_t>(chunks));
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [lo, hi] =
        chunk_bounds(static_cast<std::int64_t>(n_states), chunks, c);
    Part part;
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::complex<double> z = spec[static_cast<std::size_t>(i)];
      part.max_im = std::max(part.max_im, std::abs(z.imag()) * inv_n);
      part.min_p = std::min(part.min_p, z.real() * inv_n);
      part.sum.add(z.real());
    }
    parts[static_cast<std::size_t>(c)] = part;
  });
  Part all;
  for (const Part& p : parts) {
    all.max_im = std::max(all.max_im, p.max_im);
    all.min_p = std::min(all.min_p, p.min_p);
    all.sum.add(p.sum.get());
  }
  if (all.max_im > kImagTol) {
    throw invariant_error("kernel imaginary residue " + std::to_string(all.max_im) +
                          " exceeds " + std::to_string(kImagTol) +
                          " (asymmetric spectrum)");
  }
  if (all.min_p < -kNegTol) {
    throw invariant_error("kernel entry " + std::to_string(all.min_p) +
                          " below -" + std::to_string(kNegTol));
  }
  const double mass = all.sum.get() * inv_n;
  if (std::abs(mass - 1.0) > kMassTol) {
    throw invariant_error("kernel mass " + std::to_string(mass) +
                          " drifted from 1 by more than " + std::to_string(kMassTol));
  }
  KernelVector kernel;
  kernel.q = q;
  kernel.m = m;
  kernel.t = t;
  kernel.p.resize(n_states);
  const double inv_mass = 1.0 / mass;
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [lo, hi] =
        chunk_bounds(static_cast<std::int64_t>(n_states), chunks, c);
    for (std::int64_t i = lo; i < hi; ++i) {
      const double v = spec[static_cast<std::size_t>(i)].real() * inv_n;
      kernel.p[static_cast<std::size_t>(i)] = std::max(0.0, v) * inv_mass;
    }
  });
  return kernel;
}

KernelVector exact_kernel_into(const WalkSpec& walk, double t,
                               const SpectralOptions& opts,
                               std::vector<std::complex<double>>& spec,
                               double* l2_out) {
  require_time(t);
  const std::uint64_t cap =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.dense_budget), kOwnPathMax);
  const std::uint64_t n_states = checked_states(walk.q, walk.m, cap, "exact kernel");
  const int threads = resolve_threads(opts.threads);
  const PhiContext ctx = make_context(walk);
  spec.resize(n_states);
  const double l2 = dispatch_eval(walk, ctx, [&](const auto& make) {
    return fill_spectrum(walk, t, spec.data(), n_states, threads, make);
  });
  if (l2_out != nullptr) *l2_out = l2;
  dft_axes(spec.data(), n_states, walk.q, walk.m, ctx.tt, threads);
  return finalize_kernel(spec.data(), n_states, walk.q, walk.m, t, threads);
}

// ---------------------------------------------------------------------------
// Permutation tables for the discrete-power oracle / Dirichlet form.

std::vector<std::vector<std::uint32_t>> build_shift_tables(const WalkSpec& walk,
                                                           std::uint64_t n_states) {
  const std::int64_t q = walk.q;
  const int m = walk.m;
  std::vector<std::vector<std::uint32_t>> shift;
  shift.reserve(walk.increments.support.size());
  for (const auto& entry : walk.increments.support) {
    std::vector<std::uint32_t> perm(n_states);
    std::vector<std::int64_t> dig(static_cast<std::size_t>(m), 0);
    for (std::uint64_t idx = 0; idx < n_states; ++idx) {
      std::uint64_t shifted = 0;
      std::uint64_t mult = 1;
      for (int k = 0; k < m; ++k) {
        const std::int64_t d =
            (((dig[static_cast<std::size_t>(k)] + entry.v[static_cast<std::size_t>(k)]) % q) + q) % q;
        shifted += static_cast<std::uint64_t>(d) * mult;
        mult *= static_cast<std::uint64_t>(q);
      }
      perm[idx] = static_cast<std::uint32_t>(shifted);
      int axis = 0;
      while (axis < m) {
        if (++dig[static_cast<std::size_t>(axis)] < q) break;
        dig[static_cast<std::size_t>(axis)] = 0;
        ++axis;
      }
    }
    shift.push_back(std::move(perm));
  }
  return shift;
}

}  // namespace

std::uint64_t state_count(const WalkSpec& walk, std::uint64_t cap) {
  return checked_states(walk.q, walk.m, cap, "state count");
}

std::uint64_t encode_state(std::span<const std::int64_t> canonical, std::int64_t q) {
  if (q < 2) throw validation_error("encode_state: q must be >= 2");
  std::uint64_t idx = 0;
  std::uint64_t mult = 1;
  for (std::size_t k = 0; k < canonical.size(); ++k) {
    const std::int64_t d = ((canonical[k] % q) + q) % q;
    idx += static_cast<std::uint64_t>(d) * mult;
    if (k + 1 < canonical.size()) {
      if (mult > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(q)) {
        throw validation_error("encode_state: index overflows 64 bits");
      }
      mult *= static_cast<std::uint64_t>(q);
    }
  }
  return idx;
}

std::vector<std::int64_t> decode_state(std::uint64_t index, std::int64_t q, int m) {
  if (q < 2) throw validation_error("decode_state: q must be >= 2");
  std::vector<std::int64_t> out(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    out[static_cast<std::size_t>(k)] =
        canonical_rep(static_cast<std::int64_t>(index % static_cast<std::uint64_t>(q)), q);
    index /= static_cast<std::uint64_t>(q);
  }
  return out;
}

double eigenvalue_at(const WalkSpec& walk, const TorusVector& y, double t) {
  require_time(t);
  if (y.q != walk.q || static_cast<int>(y.c.size()) != walk.m) {
    throw validation_error("frequency vector does not match the walk's torus");
  }
  std::vector<double> theta(y.c.size());
  const double w = 2.0 * std::numbers::pi / static_cast<double>(walk.q);
  for (std::size_t k = 0; k < y.c.size(); ++k) {
    theta[k] = w * static_cast<double>(y.c[k]);
  }
  return std::exp(t * (char_fn(walk, theta) - 1.0));
}

double l2_bound(const WalkSpec& walk, double t, const SpectralOptions& opts) {
  require_time(t);
  const std::uint64_t n_states = checked_states(
      walk.q, walk.m, static_cast<std::uint64_t>(opts.enum_budget), "l2 bound");
  const int threads = resolve_threads(opts.threads);
  const PhiContext ctx = make_context(walk);
  const double sum = dispatch_eval(walk, ctx, [&](const auto& make) {
    return reduce_chunked(
        static_cast<std::int64_t>(n_states), threads,
        [&](std::int64_t lo, std::int64_t hi) {
          auto eval = make();
          Kahan part;
          scan_range(walk.q, walk.m, static_cast<std::uint64_t>(lo),
                     static_cast<std::uint64_t>(hi), eval,
                     [&](std::uint64_t, auto& ev) {
                       part.add(std::exp(2.0 * t * (ev.value() - 1.0)));
                     });
          return part.get();
        });
  });
  return sum - 1.0;
}

double l2_bound_srw_product(const WalkSpec& walk, double t) {
  require_time(t);
  if (walk.kind != WalkKind::srw) {
    throw validation_error("product-form l2 bound is defined for the srw walk only");
  }
  const TrigTables tt = make_trig(walk.q);
  const double rate = 2.0 * t / static_cast<double>(walk.m);
  Kahan axis_sum;
  for (std::int64_t j = 0; j < walk.q; ++j) {
    axis_sum.add(std::exp(rate * (tt.cs[static_cast<std::size_t>(j)] - 1.0)));
  }
  double prod = 1.0;
  for (int k = 0; k < walk.m; ++k) prod *= axis_sum.get();
  return prod - 1.0;
}

KernelVector exact_kernel(const WalkSpec& walk, double t, const SpectralOptions& opts) {
  std::vector<std::complex<double>> spec;
  return exact_kernel_into(walk, t, opts, spec, nullptr);
}

double tv_from_kernel(const KernelVector& kernel) {
  const std::uint64_t n_states = kernel.p.size();
  if (n_states == 0) throw validation_error("empty kernel");
  const double u = 1.0 / static_cast<double>(n_states);
  const double sum = reduce_chunked(
      static_cast<std::int64_t>(n_states), resolve_threads(0),
      [&](std::int64_t lo, std::int64_t hi) {
        Kahan part;
        for (std::int64_t i = lo; i < hi; ++i) {
          part.add(std::abs(kernel.p[static_cast<std::size_t>(i)] - u));
        }
        return part.get();
      });
  return 0.5 * sum;
}

double l1_distance(const KernelVector& a, const KernelVector& b) {
  if (a.q != b.q || a.m != b.m || a.p.size() != b.p.size()) {
    throw validation_error("l1 distance requires kernels on the same state space");
  }
  Kahan sum;
  for (std::size_t i = 0; i < a.p.size(); ++i) sum.add(std::abs(a.p[i] - b.p[i]));
  return sum.get();
}

KernelVector uniformization_oracle(const WalkSpec& walk, double t,
                                   const SpectralOptions& opts) {
  require_time(t);
  const std::uint64_t n_states = checked_states(
      walk.q, walk.m,
      std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.dense_budget),
                              kOracleMaxStates),
      "uniformization oracle");
  if (t > kOracleMaxTime) {
    throw budget_error("uniformization oracle: t=" + std::to_string(t) +
                       " exceeds the supported horizon " +
                       std::to_string(kOracleMaxTime));
  }
  // Poisson(t) weights until the remaining tail mass drops below eps.
  std::vector<double> pmf;
  double w = std::exp(-t);
  Kahan cum;
  pmf.push_back(w);
  cum.add(w);
  while (1.0 - cum.get() > opts.truncation_eps) {
    if (pmf.size() > 200'000) {
      throw budget_error("uniformization oracle: Poisson truncation did not converge");
    }
    w *= t / static_cast<double>(pmf.size());
    pmf.push_back(w);
    cum.add(w);
  }
  const auto shift = build_shift_tables(walk, n_states);
  std::vector<double> weights;
  weights.reserve(shift.size());
  for (const auto& entry : walk.increments.support) weights.push_back(to_double(entry.p));

  std::vector<double> u(n_states, 0.0), next(n_states, 0.0), out(n_states, 0.0);
  u[0] = 1.0;  // the all-zero state has index 0
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    for (std::uint64_t i = 0; i < n_states; ++i) out[i] += pmf[k] * u[i];
    if (k + 1 == pmf.size()) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < shift.size(); ++s) {
      const double p = weights[s];
      const std::uint32_t* perm = shift[s].data();
      for (std::uint64_t i = 0; i < n_states; ++i) next[i] += p * u[perm[i]];
    }
    std::swap(u, next);
  }
  KernelVector kernel;
  kernel.q = walk.q;
  kernel.m = walk.m;
  kernel.t = t;
  kernel.p = std::move(out);
  return kernel;
}

double dirichlet_form(const WalkSpec& walk, std::span<const double> f,
                      const SpectralOptions& opts) {
  const std::uint64_t n_states = checked_states(
      walk.q, walk.m,
      std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.dense_budget),
                              kOracleMaxStates),
      "dirichlet form");
  if (f.size() != n_states) {
    throw validation_error("dirichlet form: function must list all q^m states");
  }
  const auto shift = build_shift_tables(walk, n_states);
  std::vector<double> weights;
  weights.reserve(shift.size());
  for (const auto& entry : walk.increments.support) weights.push_back(to_double(entry.p));
  Kahan acc;
  for (std::uint64_t i = 0; i < n_states; ++i) {
    Kahan pf;
    for (std::size_t s = 0; s < shift.size(); ++s) {
      pf.add(weights[s] * f[shift[s][i]]);
    }
    acc.add(f[i] * (f[i] - pf.get()));
  }
  return acc.get() / static_cast<double>(n_states);
}

// ---------------------------------------------------------------------------
// Dense evaluator: in-memory axis passes for small state spaces, in-place
// half-spectrum c2r FFTW transform beyond.

struct DenseTvEvaluator::Impl {
  WalkSpec walk;
  SpectralOptions opts;
  PhiContext ctx;
  int threads = 1;
  std::uint64_t n_states = 0;
  bool use_fftw = false;

  // own-engine state
  std::vector<std::complex<double>> spec;

  // fftw-engine state
  std::uint64_t rest = 0;    // q^(m-1) lines
  std::int64_t half = 0;     // q/2 + 1 complex bins on the last axis
  void* buf = nullptr;       // fftw_malloc'd, rest * 2 * half scalars
  fftw_plan plan_d = nullptr;
  fftwf_plan plan_f = nullptr;

  ~Impl() {
    if (plan_d != nullptr) fftw_destroy_plan(plan_d);
    if (plan_f != nullptr) fftwf_destroy_plan(plan_f);
    if (buf != nullptr) fftw_free(buf);
  }

  template <class Real>
  Result evaluate_fftw(double t);
  Result evaluate_own(double t);
};

DenseTvEvaluator::DenseTvEvaluator(const WalkSpec& walk, const SpectralOptions& opts)
    : impl_(new Impl) {
  impl_->walk = walk;
  impl_->opts = opts;
  impl_->ctx = make_context(walk);
  impl_->threads = resolve_threads(opts.threads);
  impl_->n_states = checked_states(
      walk.q, walk.m, static_cast<std::uint64_t>(opts.dense_budget), "dense evaluator");
  switch (opts.engine) {
    case SpectralOptions::Engine::automatic:
      impl_->use_fftw = impl_->n_states > kOwnPathMax;
      break;
    case SpectralOptions::Engine::own:
      if (impl_->n_states > kOwnPathMax) {
        throw budget_error("dense evaluator: " + std::to_string(impl_->n_states) +
                           " states exceed the in-memory engine limit " +
                           std::to_string(kOwnPathMax));
      }
      impl_->use_fftw = false;
      break;
    case SpectralOptions::Engine::fftw:
      impl_->use_fftw = true;
      break;
  }
  if (impl_->use_fftw) {
    const std::int64_t q = walk.q;
    impl_->half = q / 2 + 1;
    impl_->rest = impl_->n_states / static_cast<std::uint64_t>(q);
    const std::uint64_t scalars =
        impl_->rest * 2 * static_cast<std::uint64_t>(impl_->half);
    const std::uint64_t bytes =
        scalars * (opts.use_float32 ? sizeof(float) : sizeof(double));
    if (bytes > std::uint64_t{4200} * 1024 * 1024) {
      throw budget_error(
          "dense evaluator: transform buffer of " + std::to_string(bytes) +
          " bytes exceeds the memory ceiling (consider the float32 option)");
    }
    impl_->buf = fftw_malloc(static_cast<std::size_t>(scalars) *
                             (opts.use_float32 ? sizeof(float) : sizeof(double)));
    if (impl_->buf == nullptr) throw budget_error("dense evaluator: allocation failed");
    std::vector<int> dims(static_cast<std::size_t>(walk.m), static_cast<int>(q));
    if (opts.use_float32) {
      impl_->plan_f = fftwf_plan_dft_c2r(
          walk.m, dims.data(), static_cast<fftwf_complex*>(impl_->buf),
          static_cast<float*>(impl_->buf), FFTW_ESTIMATE);
      if (impl_->plan_f == nullptr) throw invariant_error("fftw planning failed");
    } else {
      impl_->plan_d = fftw_plan_dft_c2r(
          walk.m, dims.data(), static_cast<fftw_complex*>(impl_->buf),
          static_cast<double*>(impl_->buf), FFTW_ESTIMATE);
      if (impl_->plan_d == nullptr) throw invariant_error("fftw planning failed");
    }
  }
}

DenseTvEvaluator::~DenseTvEvaluator() = default;

std::uint64_t DenseTvEvaluator::states() const { return impl_->n_states; }

DenseTvEvaluator::Result DenseTvEvaluator::Impl::evaluate_own(double t) {
  double l2 = 0.0;
  const KernelVector kernel = exact_kernel_into(walk, t, opts, spec, &l2);
  Result res;
  res.tv = tv_from_kernel(kernel);
  res.l2_bound_sq = l2;
  return res;
}

template <class Real>
DenseTvEvaluator::Result DenseTvEvaluator::Impl::evaluate_fftw(double t) {
  require_time(t);
  const std::int64_t q = walk.q;
  const int m = walk.m;
  const std::int64_t h = half;
  Real* data = static_cast<Real*>(buf);
  const std::uint64_t row_scalars = 2 * static_cast<std::uint64_t>(h);

  // Fill the half spectrum row by row.  Rows enumerate the leading m-1
  // frequency digits in FFTW's row-major order (digit m-2 fastest); the
  // halved axis is walk coordinate m-1.  Hermitian weights recover the full
  // l2 sum: bins 0 and q/2 are their own mirror.
  const std::int64_t chunks = chunk_count(static_cast<std::int64_t>(rest));
  std::vector<Kahan> l2_parts(static_cast<std::size_t>(chunks));
  dispatch_eval(walk, ctx, [&](const auto& make) {
    parallel_chunks(chunks, threads, [&](std::int64_t c) {
      const auto [lo, hi] = chunk_bounds(static_cast<std::int64_t>(rest), chunks, c);
      if (lo >= hi) return 0.0;
      auto eval = make();
      std::vector<std::int64_t> dig(static_cast<std::size_t>(m), 0);
      // Decode row index lo into digits d_0..d_{m-2} (d_{m-2} fastest).
      std::uint64_t row_idx = static_cast<std::uint64_t>(lo);
      for (int k = m - 2; k >= 0; --k) {
        dig[static_cast<std::size_t>(k)] =
            static_cast<std::int64_t>(row_idx % static_cast<std::uint64_t>(q));
        row_idx /= static_cast<std::uint64_t>(q);
      }
      eval.reset(dig.data(), m);
      Kahan part;
      for (std::int64_t row = lo; row < hi; ++row) {
        Real* out = data + static_cast<std::uint64_t>(row) * row_scalars;
        for (std::int64_t k = 0; k < h; ++k) {
          if (k > 0) eval.advance(m - 1, k - 1, k);
          const double lam = std::exp(t * (eval.value() - 1.0));
          out[2 * k] = static_cast<Real>(lam);
          out[2 * k + 1] = Real(0);
          const double weight = (k == 0 || 2 * k == q) ? 1.0 : 2.0;
          part.add(weight * lam * lam);
        }
        eval.advance(m - 1, h - 1, 0);
        if (row + 1 < hi) {
          int axis = m - 2;
          for (;;) {
            const std::int64_t od = dig[static_cast<std::size_t>(axis)];
            std::int64_t nd = od + 1;
            if (nd == q) nd = 0;
            dig[static_cast<std::size_t>(axis)] = nd;
            eval.advance(axis, od, nd);
            if (nd != 0) break;
            --axis;
          }
        }
      }
      l2_parts[static_cast<std::size_t>(c)] = part;
      return 0.0;
    });
    return 0.0;
  });
  Kahan l2_sum;
  for (const Kahan& p : l2_parts) l2_sum.add(p.get());

  if constexpr (std::is_same_v<Real, float>) {
    fftwf_execute(plan_f);
  } else {
    fftw_execute(plan_d);
  }

  // Single fused pass: TV against uniform with the analytic total mass
  // S = lambda_0(t), plus mass / negativity checks on the side.
  std::vector<double> theta0(static_cast<std::size_t>(m), 0.0);
  const double mass_analytic = std::exp(t * (char_fn(walk, theta0) - 1.0));
  const double inv_n = 1.0 / static_cast<double>(n_states);
  const double scale = inv_n / mass_analytic;
  struct Part {
    Kahan tv;
    Kahan mass;
    double min_p = std::numeric_limits<double>::infinity();
  };
  std::vector<Part> parts(static_cast<std::size_t>(chunks));
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [lo, hi] = chunk_bounds(static_cast<std::int64_t>(rest), chunks, c);
    Part part;
    for (std::int64_t row = lo; row < hi; ++row) {
      const Real* in = data + static_cast<std::uint64_t>(row) * row_scalars;
      for (std::int64_t j = 0; j < q; ++j) {
        const double p = static_cast<double>(in[j]) * scale;
        part.tv.add(std::abs(p - inv_n));
        part.mass.add(p);
        part.min_p = std::min(part.min_p, p);
      }
    }
    parts[static_cast<std::size_t>(c)] = part;
  });
  Part all;
  for (const Part& p : parts) {
    all.tv.add(p.tv.get());
    all.mass.add(p.mass.get());
    all.min_p = std::min(all.min_p, p.min_p);
  }
  const double mass_tol = std::is_same_v<Real, float> ? 1e-4 : kMassTol;
  const double neg_tol = std::is_same_v<Real, float> ? 1e-6 : kNegTol;
  if (std::abs(all.mass.get() - 1.0) > mass_tol) {
    throw invariant_error("dense evaluator: kernel mass " +
                          std::to_string(all.mass.get()) + " drifted from 1");
  }
  if (all.min_p < -neg_tol) {
    throw invariant_error("dense evaluator: kernel entry " +
                          std::to_string(all.min_p) + " below tolerance");
  }
  Result res;
  res.tv = 0.5 * all.tv.get();
  res.l2_bound_sq = l2_sum.get() - 1.0;
  return res;
}

DenseTvEvaluator::Result DenseTvEvaluator::evaluate(double t) {
  if (!impl_->use_fftw) return impl_->evaluate_own(t);
  if (impl_->opts.use_float32) return impl_->evaluate_fftw<float>(t);
  return impl_->evaluate_fftw<double>(t);
}

double exact_tv(const WalkSpec& walk, double t, const SpectralOptions& opts) {
  require_time(t);
  const std::uint64_t n_states = checked_states(
      walk.q, walk.m, static_cast<std::uint64_t>(opts.dense_budget), "exact tv");
  if (opts.engine != SpectralOptions::Engine::fftw && n_states <= kOwnPathMax) {
    const KernelVector kernel = exact_kernel(walk, t, opts);
    return tv_from_kernel(kernel);
  }
  DenseTvEvaluator eval(walk, opts);
  return eval.evaluate(t).tv;
}

DecayScan decay_condition_scan(const WalkSpec& walk, double t,
                               const SpectralOptions& opts) {
  require_time(t);
  const std::uint64_t n_states = checked_states(
      walk.q, walk.m, static_cast<std::uint64_t>(opts.enum_budget), "decay scan");
  const std::int64_t q = walk.q;
  const int m = walk.m;
  const int threads = resolve_threads(opts.threads);
  const PhiContext ctx = make_context(walk);

  DecayScan scan;
  scan.lattice_size = n_states;
  scan.t = t;
  scan.threshold = static_cast<std::int64_t>(
      std::floor(std::sqrt(static_cast<double>(q)) / (2.0 * std::numbers::pi)));
  const std::uint64_t near_axis = static_cast<std::uint64_t>(2 * scan.threshold + 1);
  std::uint64_t near_box = 1;
  for (int k = 0; k < m; ++k) near_box *= near_axis;
  scan.far_count_formula = n_states - near_box;

  // Digit classification: digit d is far when |canonical_rep(d)| > threshold.
  std::vector<unsigned char> far_digit(static_cast<std::size_t>(q));
  for (std::int64_t d = 0; d < q; ++d) {
    far_digit[static_cast<std::size_t>(d)] =
        std::abs(canonical_rep(d, q)) > scan.threshold ? 1 : 0;
  }

  struct Part {
    std::uint64_t count = 0;
    double max_phi = -std::numeric_limits<double>::infinity();
    Kahan sum;
  };
  const std::int64_t chunks = chunk_count(static_cast<std::int64_t>(n_states));
  std::vector<Part> parts(static_cast<std::size_t>(chunks));
  dispatch_eval(walk, ctx, [&](const auto& make) {
    parallel_chunks(chunks, threads, [&](std::int64_t c) {
      const auto [lo, hi] =
          chunk_bounds(static_cast<std::int64_t>(n_states), chunks, c);
      if (lo >= hi) return;
      auto eval = make();
      Part part;
      std::vector<std::int64_t> dig = decode_digits(static_cast<std::uint64_t>(lo), q, m);
      eval.reset(dig.data(), m);
      int far_digits = 0;
      for (int k = 0; k < m; ++k) {
        far_digits += far_digit[static_cast<std::size_t>(dig[static_cast<std::size_t>(k)])];
      }
      for (std::uint64_t idx = static_cast<std::uint64_t>(lo);;) {
        if (far_digits > 0) {
          const double phi = eval.value();
          ++part.count;
          part.max_phi = std::max(part.max_phi, phi);
          part.sum.add(std::exp(2.0 * t * (phi - 1.0)));
        }
        if (++idx == static_cast<std::uint64_t>(hi)) break;
        int axis = 0;
        for (;;) {
          const std::int64_t od = dig[static_cast<std::size_t>(axis)];
          std::int64_t nd = od + 1;
          if (nd == q) nd = 0;
          dig[static_cast<std::size_t>(axis)] = nd;
          eval.advance(axis, od, nd);
          far_digits += far_digit[static_cast<std::size_t>(nd)] -
                        far_digit[static_cast<std::size_t>(od)];
          if (nd != 0) break;
          ++axis;
        }
      }
      parts[static_cast<std::size_t>(c)] = part;
    });
    return 0.0;
  });
  Part all;
  for (const Part& p : parts) {
    all.count += p.count;
    all.max_phi = std::max(all.max_phi, p.max_phi);
    all.sum.add(p.sum.get());
  }
  scan.far_count = all.count;
  scan.max_phi_far = all.max_phi;
  scan.far_sum = all.sum.get();
  if (scan.far_count != scan.far_count_formula) {
    throw invariant_error("decay scan: enumerated far count " +
                          std::to_string(scan.far_count) +
                          " disagrees with the closed-form count " +
                          std::to_string(scan.far_count_formula));
  }
  const double nd = static_cast<double>(walk.n);
  const double qd = static_cast<double>(q);
  switch (walk.kind) {
    case WalkKind::dg_1xn:
      scan.reference_cap = 1.0 - 1.0 / (25.0 * nd * qd);
      break;
    case WalkKind::dg_nxn:
      scan.reference_cap = 1.0 - 1.0 / (400.0 * nd * nd * qd);
      break;
    case WalkKind::srw:
      scan.reference_cap = 1.0 - 2.0 / (25.0 * nd * qd);
      break;
    case WalkKind::custom:
      break;
  }
  if (scan.reference_cap && scan.far_count > 0) {
    scan.holds = scan.max_phi_far <= *scan.reference_cap;
  }
  return scan;
}

SpectralSummary spectral_summary(const WalkSpec& walk, double t, bool want_exact,
                                 const SpectralOptions& opts) {
  SpectralSummary summary;
  summary.t = t;
  summary.l2_bound_sq = l2_bound(walk, t, opts);
  summary.l2_tv_bound = 0.5 * std::sqrt(std::max(0.0, summary.l2_bound_sq));
  summary.lattice_size =
      checked_states(walk.q, walk.m, static_cast<std::uint64_t>(opts.enum_budget),
                     "spectral summary");
  if (want_exact) summary.exact_tv = exact_tv(walk, t, opts);
  return summary;
}

}  // namespace cutofflab
