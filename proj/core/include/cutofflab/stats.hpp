#pragma once

// Small statistics utilities shared by tests and the verification suite.

#include <cstdint>

namespace cutofflab {

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a),
// a > 0, x >= 0.  Series for x < a + 1, continued fraction otherwise.
double gamma_q(double a, double x);

// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom.
double chi_square_pvalue(double statistic, std::int64_t dof);

}  // namespace cutofflab
