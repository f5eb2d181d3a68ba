#pragma once

// Walk families studied by the laboratory, all continuous-time rate-1 walks on
// (Z/qZ)^m driven by a symmetric increment distribution:
//
//  - dg_1xn: the 1xn contingency-table walk with fixed total, projected to the
//    first n-1 cells.  Increments a_ij (ordered pairs i != j in [n]): +1 at
//    cell i and -1 at cell j, coordinates n dropped; m = n-1, each of the
//    n(n-1) moves has probability 1/(n(n-1)).
//  - dg_nxn: the nxn table walk with fixed margins, projected to the leading
//    (n-1)x(n-1) block.  Signed basis moves +-T(i,i',j,j') over row pairs
//    i < i' and column pairs j < j', probability 1/(2 C(n,2)^2) each;
//    m = (n-1)^2, coordinates stored row-major.
//  - srw: lazy-free simple random walk on (Z/qZ)^n, increments +-e_k with
//    probability 1/(2n); the classical product-form control case.
//  - custom: any validated IncrementDistribution from a walk file.

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "cutofflab/torus.hpp"

namespace cutofflab {

enum class WalkKind { dg_1xn, dg_nxn, srw, custom };

const char* to_string(WalkKind kind);

struct WalkSpec {
  WalkKind kind = WalkKind::custom;
  int n = 0;          // source parameter (table size / srw dimension); 0 for custom
  std::int64_t q = 0;
  int m = 0;          // tracked state dimension
  int r = 0;          // max L1 norm over the support
  double sigma_sq = 0;
  IncrementDistribution increments;
};

WalkSpec make_dg_1xn(int n, std::int64_t q);  // n >= 2, q >= 3
WalkSpec make_dg_nxn(int n, std::int64_t q);  // n >= 2, q >= 3
WalkSpec make_srw(int n, std::int64_t q);     // n >= 1, q >= 3
WalkSpec make_custom(IncrementDistribution mu);

// Closed-form characteristic function; throws validation_error for custom
// walks (no closed form).
double char_fn_closed(const WalkSpec& walk, std::span<const double> theta);

// Closed form when available, otherwise the generic support sum.
double char_fn(const WalkSpec& walk, std::span<const double> theta);

// Unit-diagonal increment correlation matrix Gamma and its inverse Psi.
struct CorrelationModel {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd psi;
  bool closed_form = false;  // true for dg_1xn / dg_nxn entries by formula
};

// dg_1xn / dg_nxn use exact entry formulas; srw / custom derive Gamma from
// moments and invert numerically (throws validation_error if degenerate).
CorrelationModel correlation_model(const WalkSpec& walk);

// max_ij |(Gamma Psi - I)_ij|, the inverse-pair consistency residual.
double gamma_psi_residual(const CorrelationModel& model);

}  // namespace cutofflab
