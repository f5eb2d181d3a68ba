#pragma once

// State and increment layer for continuous-time random walks on (Z/qZ)^m.
// Coordinates are kept as the canonical representatives in [-q/2, q/2)
// (closed on the left: for even q the residue q/2 maps to -q/2), so lattice
// quantities such as L1/Linf norms are well defined.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutofflab/rational.hpp"

namespace cutofflab {

struct TorusVector {
  std::vector<std::int64_t> c;  // canonical representatives
  std::int64_t q = 0;

  friend bool operator==(const TorusVector&, const TorusVector&) = default;
};

// Canonical representative of v mod q in [-q/2, q/2); q >= 2.
std::int64_t canonical_rep(std::int64_t v, std::int64_t q);

// Reduce every coordinate; throws validation_error for q < 2.
TorusVector canonicalize(std::vector<std::int64_t> v, std::int64_t q);

struct SupportEntry {
  std::vector<std::int64_t> v;  // canonical increment
  Rational p;                   // exact probability
};

// Finitely supported symmetric increment distribution on (Z/qZ)^m.
// Valid instances satisfy: probabilities positive and summing to exactly 1;
// support vectors canonical, distinct, of dimension m, with Linf norm < q/2;
// for every (g, p) in the support, (-g, p) is present too.
struct IncrementDistribution {
  std::int64_t q = 0;
  int m = 0;
  std::vector<SupportEntry> support;
};

// Throws validation_error naming the first violated requirement.
void validate(const IncrementDistribution& mu);

// Characteristic function Phi(theta) = sum_g mu(g) cos(<theta, g>).
// Opposite increments are folded into single 2p*cos terms before a Kahan
// accumulation, so the result is exactly even in theta.
double char_fn_generic(const IncrementDistribution& mu,
                       std::span<const double> theta);

struct MomentSummary {
  Eigen::VectorXd mean;         // exactly zero for symmetric support
  Eigen::MatrixXd covariance;   // E[g g^T]
  bool equivariant = false;     // all marginal variances equal
  double marginal_variance = 0; // common marginal variance (NaN if not equivariant)
  double sigma_sq = 0;          // m * marginal_variance (NaN if not equivariant)
};

MomentSummary moments(const IncrementDistribution& mu);

// JSON wire format:
//   {"q": 5, "m": 2, "support": [{"v": [1, -1], "p": "1/6"}, ...]}
// Round-trips exactly (order and rationals preserved).
std::string to_json(const IncrementDistribution& mu);
IncrementDistribution increments_from_json(const std::string& text);

}  // namespace cutofflab
