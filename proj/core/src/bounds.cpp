#include "cutofflab/bounds.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include "cutofflab/errors.hpp"
#include "cutofflab/parallel.hpp"

namespace cutofflab {
namespace {

constexpr double kPi = std::numbers::pi;

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw validation_error("epsilon must lie in (0, 1)");
  }
}

double half_rate_constant() {  // C1 = 4 + 4 e^{2/e}
  return 4.0 + 4.0 * std::exp(2.0 / std::numbers::e);
}

double quarter_rate_constant() {  // C2 = 6 + 12 e^{4/e} + 12 e^{8/e} + 6 e^{32/e}
  const double e = std::numbers::e;
  return 6.0 + 12.0 * std::exp(4.0 / e) + 12.0 * std::exp(8.0 / e) +
         6.0 * std::exp(32.0 / e);
}

double lower_gamma(double epsilon) { return (1.0 / epsilon - 1.0) / 5.0; }

}  // namespace

double alpha_for_epsilon_dg1xn(double epsilon) {
  require_epsilon(epsilon);
  // 4 eps^2 >= exp(C1/sqrt(z)) - 1  <=>  z >= (C1 / log(1 + 4 eps^2))^2.
  const double ratio = half_rate_constant() / std::log1p(4.0 * epsilon * epsilon);
  return std::max(1.0, ratio * ratio);
}

double alpha_for_epsilon_dgnxn(double epsilon) {
  require_epsilon(epsilon);
  const double ratio = quarter_rate_constant() / std::log1p(4.0 * epsilon * epsilon);
  return std::max(1.0, ratio * ratio * ratio * ratio);
}

double alpha_for_epsilon_general(double epsilon, double psi_sup,
                                 const std::function<double(double)>& g) {
  require_epsilon(epsilon);
  if (!(psi_sup >= 0.0)) throw validation_error("psi_sup must be >= 0");
  if (!g) throw validation_error("missing correlation-decay function g");
  const double target = std::log1p(4.0 * epsilon * epsilon);
  const double factor = 2.0 + psi_sup;
  const auto excess = [&](double z) { return factor * g(z) - target; };
  if (excess(1.0) <= 0.0) return 1.0;
  double hi = 2.0;
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    // Quartic decay at tight epsilon legitimately needs alpha ~ 1e31, so only
    // bail out near the double range: that means g genuinely never decays.
    if (hi > 1e300) {
      throw validation_error(
          "correlation decay g never reaches the epsilon target");
    }
  }
  double lo = hi / 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

TheoremTimes theorem_times(const WalkSpec& walk, double epsilon, bool proof_variant) {
  require_epsilon(epsilon);
  TheoremTimes out;
  out.epsilon = epsilon;
  const double n = static_cast<double>(walk.n);
  const double q = static_cast<double>(walk.q);
  const double gamma = lower_gamma(epsilon);
  switch (walk.kind) {
    case WalkKind::dg_1xn: {
      out.alpha = alpha_for_epsilon_dg1xn(epsilon);
      double correction;
      if (proof_variant) {
        if (walk.q <= 3) {
          throw validation_error(
              "proof-variant correction (1 - 3/q)^{-1} is undefined for q <= 3");
        }
        correction = 1.0 / (1.0 - 3.0 / q);
      } else {
        correction = 1.0 / (1.0 - 1.0 / (3.0 * q));
      }
      out.t_upper =
          n * q * q * std::log(out.alpha * n) / (8.0 * kPi * kPi) * correction;
      const double combined = (n - 1.0) * gamma;
      if (combined > 1.0) {
        out.t_lower = n * q * q / (8.0 * kPi * kPi) * std::log(combined);
      }
      return out;
    }
    case WalkKind::dg_nxn: {
      if (proof_variant) {
        throw validation_error("proof variant applies to the dg1xn flavor only");
      }
      out.alpha = alpha_for_epsilon_dgnxn(epsilon);
      const double correction = 1.0 / (1.0 - 4.0 / (3.0 * q));
      out.t_upper = n * n * q * q * std::log(std::sqrt(out.alpha) * (n - 1.0)) /
                    (8.0 * kPi * kPi) * correction;
      const double combined = (n - 1.0) * std::sqrt(gamma);
      if (combined > 1.0) {
        out.t_lower = n * n * q * q / (8.0 * kPi * kPi) * std::log(combined);
      }
      return out;
    }
    default:
      throw validation_error(
          "theorem times cover the table walks; use general_times for other "
          "families");
  }
}

TheoremTimes general_times(const GeneralParams& params, double epsilon) {
  require_epsilon(epsilon);
  if (params.n < 1) throw validation_error("general times: n must be >= 1");
  if (params.q < 3) throw validation_error("general times: q must be >= 3");
  if (!(params.sigma_sq > 0.0)) {
    throw validation_error("general times: sigma^2 must be positive");
  }
  const double n = static_cast<double>(params.n);
  const double q = static_cast<double>(params.q);
  const double r2 = static_cast<double>(params.r) * params.r;
  if (!(r2 < 12.0 * q)) {
    throw validation_error("general times require r^2 < 12 q");
  }
  TheoremTimes out;
  out.epsilon = epsilon;
  out.alpha = alpha_for_epsilon_general(epsilon, params.psi_sup, params.g);
  const double correction = 1.0 / (1.0 - r2 / (12.0 * q));
  out.t_upper = n * q * q * std::log(out.alpha * n) /
                (4.0 * kPi * kPi * params.sigma_sq) * correction;
  const double combined = n * lower_gamma(epsilon);
  if (combined > 1.0) {
    out.t_lower =
        n * q * q / (4.0 * kPi * kPi * params.sigma_sq) * std::log(combined);
  }
  return out;
}

double lemma_sum_constant() { return 1.0 + std::exp(2.0 / std::numbers::e); }

double lemma_double_constant() {
  const double e = std::numbers::e;
  return 1.0 + 2.0 * std::exp(4.0 / e) + 2.0 * std::exp(8.0 / e) +
         std::exp(32.0 / e);
}

double dgnxn_g(double alpha) {
  if (!(alpha >= 1.0)) throw validation_error("alpha must be >= 1");
  return lemma_double_constant() / std::pow(alpha, 0.25);
}

double lemma_sum(double alpha, std::int64_t n) {
  if (!(alpha >= 1.0)) throw validation_error("alpha must be >= 1");
  if (n < 1) throw validation_error("n must be >= 1");
  const double an = alpha * static_cast<double>(n);
  Kahan acc;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double expo = static_cast<double>(k) / (static_cast<double>(k) + 1.0);
    acc.add(std::pow(an, -expo));
  }
  return acc.get();
}

double lemma_double_sum(std::int64_t n) {
  if (n < 1) throw validation_error("n must be >= 1");
  const double base = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  Kahan acc;
  for (std::int64_t l = 1; l <= n; ++l) {
    const double fl = static_cast<double>(l) / (static_cast<double>(l) + 1.0);
    for (std::int64_t k = 1; k <= n; ++k) {
      const double fk = static_cast<double>(k) / (static_cast<double>(k) + 1.0);
      acc.add(std::pow(base, fl * fk));
    }
  }
  return acc.get();
}

double quadratic_form_decomposed(int n, std::span<const double> y) {
  if (n < 2) throw validation_error("quadratic form: n must be >= 2");
  if (static_cast<int>(y.size()) != n - 1) {
    throw validation_error("quadratic form: y must have n-1 entries");
  }
  Kahan acc;
  acc.add(0.5 * y[0] * y[0]);
  double running = y[0];
  for (int k = 2; k <= n - 1; ++k) {
    const double mu = running / static_cast<double>(k);
    const double centered = y[static_cast<std::size_t>(k - 1)] - mu;
    acc.add(static_cast<double>(k) / (static_cast<double>(k) + 1.0) * centered *
            centered);
    running += y[static_cast<std::size_t>(k - 1)];
  }
  return static_cast<double>(n) / (static_cast<double>(n) - 1.0) * acc.get();
}

double quadratic_form_direct(const Eigen::MatrixXd& gamma, std::span<const double> y) {
  if (gamma.rows() != gamma.cols() ||
      gamma.rows() != static_cast<Eigen::Index>(y.size())) {
    throw validation_error("quadratic form: dimension mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> v(y.data(),
                                            static_cast<Eigen::Index>(y.size()));
  return v.transpose() * gamma * v;
}

std::vector<double> schur_sequence(const Eigen::MatrixXd& psi) {
  if (psi.rows() != psi.cols() || psi.rows() < 1) {
    throw validation_error("schur sequence requires a nonempty square matrix");
  }
  const Eigen::Index m = psi.rows();
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(m, m);
  std::vector<double> a(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    double pivot = psi(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > 0.0)) {
      throw validation_error("matrix is not positive definite at pivot index " +
                             std::to_string(j));
    }
    a[static_cast<std::size_t>(j)] = 1.0 / pivot;
    const double root = std::sqrt(pivot);
    lower(j, j) = root;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      double value = psi(i, j);
      for (Eigen::Index k = 0; k < j; ++k) value -= lower(i, k) * lower(j, k);
      lower(i, j) = value / root;
    }
  }
  return a;
}

double dgnxn_schur_closed(int n, int l, int k) {
  if (n < 2) throw validation_error("dgnxn pivots require n >= 2");
  if (l < 1 || k < 1 || l > n - 1 || k > n - 1) {
    throw validation_error("dgnxn pivot position out of range");
  }
  const double scale = static_cast<double>(n) / (static_cast<double>(n) - 1.0);
  return scale * scale * (static_cast<double>(l) * k) /
         ((static_cast<double>(l) + 1.0) * (static_cast<double>(k) + 1.0));
}

CorrelationCheck correlation_condition_check(
    const std::vector<Eigen::MatrixXd>& family, double alpha,
    const std::function<double(double)>& g) {
  if (!(alpha >= 1.0)) throw validation_error("alpha must be >= 1");
  if (!g) throw validation_error("missing correlation-decay function g");
  if (family.empty()) throw validation_error("empty matrix family");
  CorrelationCheck check;
  const double bound = g(alpha);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) {
    std::vector<double> a;
    try {
      a = schur_sequence(family[i]);
    } catch (const validation_error& err) {
      check.holds = false;
      check.failure = "family member " + std::to_string(i) + ": " + err.what();
      check.worst_member = i;
      return check;
    }
    const double d = static_cast<double>(family[i].rows());
    const double base = 1.0 / (alpha * d);
    Kahan sum;
    for (double ak : a) sum.add(std::pow(base, ak));
    check.sums.push_back(sum.get());
    const double margin = bound - sum.get();
    if (margin < worst) {
      worst = margin;
      check.worst_member = i;
    }
  }
  check.worst_margin = worst;
  check.holds = worst >= -1e-12;
  return check;
}

double gaussian_comb(double x, double c, int big_n) {
  if (!(c > 0.0)) throw validation_error("gaussian comb requires c > 0");
  if (big_n < 0) throw validation_error("gaussian comb requires N >= 0");
  Kahan acc;
  for (int j = -big_n; j <= big_n; ++j) {
    const double d = static_cast<double>(j) - x;
    acc.add(std::exp(-c * d * d));
  }
  return acc.get();
}

double gaussian_comb_argmax(double c, int big_n, double resolution) {
  if (!(resolution > 0.0 && resolution <= 0.5)) {
    throw validation_error("resolution must lie in (0, 1/2]");
  }
  const int half_steps = static_cast<int>(std::llround(0.5 / resolution));
  const double step = 0.5 / static_cast<double>(half_steps);
  double best_x = 0.0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int k = -half_steps; k <= half_steps; ++k) {
    const double x = static_cast<double>(k) * step;
    const double val = gaussian_comb(x, c, big_n);
    const bool better =
        val > best_val ||
        (val == best_val && (std::abs(x) < std::abs(best_x) ||
                             (std::abs(x) == std::abs(best_x) && x > best_x)));
    if (better) {
      best_val = val;
      best_x = x;
    }
  }
  return best_x;
}

double gaussian_comb_threshold(int big_n, double resolution, double lo, double hi) {
  if (!(lo > 0.0 && hi > lo)) throw validation_error("invalid bracket");
  const auto centered = [&](double c) {
    return gaussian_comb_argmax(c, big_n, resolution) == 0.0;
  };
  if (centered(lo) || !centered(hi)) {
    throw validation_error(
        "threshold bracket must fail at lo and hold at hi for the centered "
        "argmax predicate");
  }
  for (int iter = 0; iter < 60 && hi - lo > 1e-9 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (centered(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace cutofflab
