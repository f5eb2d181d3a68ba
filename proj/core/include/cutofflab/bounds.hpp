#pragma once

// Mixing-time formulas and the structural conditions behind them: threshold
// alpha solvers, upper/lower theorem times for the table walks and for a
// general equivariant family, elimination (Schur) pivot sequences, the
// correlation-condition checker, the summation inequalities feeding the
// constants, and the Gaussian-comb maximization used by the small-frequency
// regime.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutofflab/walks.hpp"

namespace cutofflab {

// Smallest z >= 1 with exp(C1 / sqrt(z)) - 1 <= 4 eps^2, C1 = 4 + 4 e^{2/e}.
double alpha_for_epsilon_dg1xn(double epsilon);
// Smallest z >= 1 with exp(C2 / z^{1/4}) - 1 <= 4 eps^2,
// C2 = 6 + 12 e^{4/e} + 12 e^{8/e} + 6 e^{32/e}.
double alpha_for_epsilon_dgnxn(double epsilon);
// Smallest z >= 1 with exp((2 + psi_sup) g(z)) - 1 <= 4 eps^2 for a monotone
// decreasing g; bracketing plus bisection.
double alpha_for_epsilon_general(double epsilon, double psi_sup,
                                 const std::function<double(double)>& g);

struct TheoremTimes {
  double epsilon = 0;
  double alpha = 0;
  double t_upper = 0;
  // Absent when the combined logarithm argument is <= 1 and the formula would
  // produce a nonpositive time.
  std::optional<double> t_lower;
};

// Family-specific times:
//   dg_1xn: t_up = n q^2 log(alpha n) / (8 pi^2) * (1 - 1/(3q))^{-1},
//           t_low = n q^2 / (8 pi^2) * log((n-1) gamma),
//   dg_nxn: t_up = n^2 q^2 log(sqrt(alpha)(n-1)) / (8 pi^2) * (1 - 4/(3q))^{-1},
//           t_low = n^2 q^2 / (8 pi^2) * log((n-1) sqrt(gamma)),
// with gamma = (1/eps - 1)/5.  proof_variant swaps the dg_1xn correction for
// (1 - 3/q)^{-1} (rejected for q <= 3 and for other walk kinds).
TheoremTimes theorem_times(const WalkSpec& walk, double epsilon,
                           bool proof_variant = false);

struct GeneralParams {
  int n = 0;               // torus dimension
  std::int64_t q = 0;
  double sigma_sq = 0;     // total increment variance (n * marginal)
  int r = 0;               // L1 radius of the increment support
  double psi_sup = 0;      // sup over the family of max |Psi_ij|
  std::function<double(double)> g;  // correlation-decay bounding function
};

// General equivariant family:
//   t_up = n q^2 log(alpha n) / (4 pi^2 sigma^2) * (1 - r^2/(12 q))^{-1}
//   t_low = n q^2 / (4 pi^2 sigma^2) * log(n gamma)
// Requires r^2 < 12 q.
TheoremTimes general_times(const GeneralParams& params, double epsilon);

double lemma_sum_constant();     // 1 + e^{2/e}
double lemma_double_constant();  // 1 + 2 e^{4/e} + 2 e^{8/e} + e^{32/e}
// Correlation-decay bounding function realized by the dg_nxn family:
// lemma_double_constant() / alpha^{1/4}.
double dgnxn_g(double alpha);

// sum_{k=1}^n (alpha n)^{-k/(k+1)}; bounded by lemma_sum_constant()/sqrt(alpha).
double lemma_sum(double alpha, std::int64_t n);
// sum_{l,k=1}^n (1/n^2)^{(l/(l+1)) (k/(k+1))}; bounded by lemma_double_constant().
double lemma_double_sum(std::int64_t n);

// y^T Gamma y for the dg_1xn correlation matrix through the telescoped
// sum-of-squares identity
//   y^T Gamma y = (n/(n-1)) (y_1^2/2 + sum_{k>=2} (k/(k+1)) (y_k - mu_k)^2),
// mu_k = (sum_{j<k} y_j)/k.  y has n-1 entries.
double quadratic_form_decomposed(int n, std::span<const double> y);
double quadratic_form_direct(const Eigen::MatrixXd& gamma, std::span<const double> y);

// a_k = 1/d_k with d_k the k-th unpivoted-Cholesky pivot of psi, i.e. the
// reciprocal Schur complement of the leading block at position k.  Throws
// validation_error naming the first non-positive pivot.
std::vector<double> schur_sequence(const Eigen::MatrixXd& psi);

// Closed form for the dg_nxn Psi pivots in row-major cell order (1-based grid
// position (l, k) of the (n-1)x(n-1) block):
//   a_(l,k) = (n/(n-1))^2 * l k / ((l+1)(k+1)).
double dgnxn_schur_closed(int n, int l, int k);

struct CorrelationCheck {
  bool holds = false;
  double worst_margin = 0;       // min over members of g(alpha) - member sum
  std::size_t worst_member = 0;
  std::vector<double> sums;      // per member: sum_k (1/(alpha d))^{a_k}
  std::string failure;           // non-empty when a member is not positive definite
};

// Condition (per member of dimension d): sum_k (1/(alpha d))^{a_k} <= g(alpha),
// checked with 1e-12 slack so the uncorrelated family attains equality.
CorrelationCheck correlation_condition_check(
    const std::vector<Eigen::MatrixXd>& family, double alpha,
    const std::function<double(double)>& g);

// F(x) = sum_{j=-N}^N exp(-c (j - x)^2).
double gaussian_comb(double x, double c, int big_n);
// Grid argmax of F over [-1/2, 1/2] at the given resolution; ties resolve to
// the smallest |x|, preferring the nonnegative representative.
double gaussian_comb_argmax(double c, int big_n, double resolution);
// Bisects [lo, hi] for the transition of "grid argmax == 0"; requires the
// predicate to fail at lo and hold at hi.
double gaussian_comb_threshold(int big_n, double resolution, double lo, double hi);

}  // namespace cutofflab
