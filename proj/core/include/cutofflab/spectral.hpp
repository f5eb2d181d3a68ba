#pragma once

// Spectral machinery: eigenvalues of the continuous-time kernel, the l2
// mixing bound, exact kernels and total-variation distance by Fourier
// inversion, and the uniformization oracle used as an independent
// cross-check.
//
// For a walk with characteristic function Phi, the heat kernel started at 0
// has Fourier coefficients lambda_y(t) = exp(t(Phi(2 pi y / q) - 1)), so
//   4 d(t)^2 <= -1 + sum_y exp(2 t (Phi(2 pi y / q) - 1))        (l2 bound)
//   H_t(0, g) = q^{-m} sum_y lambda_y(t) e^{-2 pi i <y, g> / q}  (inversion)
//
// State indexing: state index = sum_k digit_k q^k with digit_k in [0, q) the
// nonnegative residue of coordinate k (coordinate 0 varies fastest).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cutofflab/walks.hpp"

namespace cutofflab {

struct SpectralOptions {
  std::int64_t enum_budget = 100'000'000;   // lattice points for full sums
  std::int64_t dense_budget = 10'000'000;   // states for dense kernels / TV
  int threads = 0;                          // 0 = auto (capped by CUTOFFLAB_THREADS)
  double truncation_eps = 1e-12;            // uniformization Poisson tail mass
  bool use_float32 = false;                 // out-of-core transform stores float
  enum class Engine { automatic, own, fftw } engine = Engine::automatic;
};

struct SpectralSummary {
  double t = 0;
  double l2_bound_sq = 0;                 // -1 + sum_y lambda_y(t)^2
  double l2_tv_bound = 0;                 // sqrt(max(0, l2_bound_sq)) / 2
  std::optional<double> exact_tv;
  std::uint64_t lattice_size = 0;         // q^m
};

// Dense distribution over all q^m states under the documented indexing.
struct KernelVector {
  std::int64_t q = 0;
  int m = 0;
  double t = 0;
  std::vector<double> p;
};

std::uint64_t state_count(const WalkSpec& walk, std::uint64_t cap);
std::uint64_t encode_state(std::span<const std::int64_t> canonical, std::int64_t q);
std::vector<std::int64_t> decode_state(std::uint64_t index, std::int64_t q, int m);

// lambda_y(t); y must live on the walk's torus, t >= 0.
double eigenvalue_at(const WalkSpec& walk, const TorusVector& y, double t);

// -1 + sum over the full frequency lattice of exp(2t(Phi - 1)).
double l2_bound(const WalkSpec& walk, double t, const SpectralOptions& opts = {});

// Product-form evaluation of the same sum for the srw walk (O(n q) instead of
// O(q^n)); equals l2_bound within numerical noise wherever both run.
double l2_bound_srw_product(const WalkSpec& walk, double t);

// Exact kernel H_t(0, .) by axis-wise DFT passes.  Post-conditions enforced:
// imaginary residue <= 1e-10 (support-symmetry guard), entries >= -1e-12
// before clipping, mass within 1e-9 of 1 before renormalization.
KernelVector exact_kernel(const WalkSpec& walk, double t,
                          const SpectralOptions& opts = {});

double tv_from_kernel(const KernelVector& kernel);

// Exact d(t) = |H_t(0,.) - uniform|_TV.  Dispatches between the in-memory
// kernel path and the half-spectrum FFTW path for large state spaces.
double exact_tv(const WalkSpec& walk, double t, const SpectralOptions& opts = {});

// Independent oracle: Poisson mixture over discrete powers,
// H_t = sum_k e^{-t} t^k / k! P^k, truncated once the remaining tail mass is
// below truncation_eps.  The returned mass is 1 - tail (not renormalized).
KernelVector uniformization_oracle(const WalkSpec& walk, double t,
                                   const SpectralOptions& opts = {});

double l1_distance(const KernelVector& a, const KernelVector& b);

// Dirichlet form E(f) = <(I - P) f, f>_pi for f given state-by-state.
double dirichlet_form(const WalkSpec& walk, std::span<const double> f,
                      const SpectralOptions& opts = {});

SpectralSummary spectral_summary(const WalkSpec& walk, double t, bool want_exact,
                                 const SpectralOptions& opts = {});

// Far-frequency decay scan.  The far set L collects frequencies with
// Linf norm > floor-free threshold sqrt(q)/(2 pi); per axis that leaves
// 2 floor(sqrt(q)/(2 pi)) + 1 near digits, so |L| = q^m - (2 s + 1)^m.
struct DecayScan {
  std::uint64_t lattice_size = 0;
  std::int64_t threshold = 0;             // s = floor(sqrt(q) / (2 pi))
  std::uint64_t far_count = 0;            // enumerated |L|
  std::uint64_t far_count_formula = 0;    // q^m - (2 s + 1)^m
  double t = 0;
  double max_phi_far = 0;                 // max Phi over L (-inf when L empty)
  double far_sum = 0;                     // sum over L of exp(2 t (Phi - 1))
  std::optional<double> reference_cap;    // family cap on max_phi_far
  bool holds = true;                      // max_phi_far <= reference_cap
};

// Reference caps: 1 - 1/(25 n q) for dg_1xn, 1 - 1/(400 n^2 q) for dg_nxn,
// 1 - 2/(25 n q) for srw; custom walks carry no cap (holds stays vacuous).
DecayScan decay_condition_scan(const WalkSpec& walk, double t,
                               const SpectralOptions& opts = {});

// Reusable dense evaluator: one allocation/plan, many t values.  evaluate()
// returns the exact TV together with the l2 bound (harvested for free from the
// same spectrum fill).
class DenseTvEvaluator {
 public:
  DenseTvEvaluator(const WalkSpec& walk, const SpectralOptions& opts = {});
  ~DenseTvEvaluator();
  DenseTvEvaluator(const DenseTvEvaluator&) = delete;
  DenseTvEvaluator& operator=(const DenseTvEvaluator&) = delete;

  struct Result {
    double tv = 0;
    double l2_bound_sq = 0;
  };
  Result evaluate(double t);
  std::uint64_t states() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cutofflab
