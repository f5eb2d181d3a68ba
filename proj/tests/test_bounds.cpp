// Bounds layer: alpha solvers, theorem times, the general-family times, the
// quadratic decomposition, Schur pivot sequences, summation lemmas, the
// Gaussian comb, and the correlation condition.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutofflab/bounds.hpp"
#include "cutofflab/errors.hpp"
#include "cutofflab/walks.hpp"

using namespace cutofflab;

namespace {

const double kE = std::numbers::e;
const double kPi = std::numbers::pi;

double c1() { return 4.0 + 4.0 * std::exp(2.0 / kE); }
double c2() {
  return 6.0 + 12.0 * std::exp(4.0 / kE) + 12.0 * std::exp(8.0 / kE) +
         6.0 * std::exp(32.0 / kE);
}

}  // namespace

TEST_CASE("alpha solvers: manufactured inverse, minimality, clamping") {
  SUBCASE("dg_1xn: forward-evaluate at z = 1e4, then invert") {
    const double z0 = 1e4;
    const double eps = std::sqrt((std::exp(c1() / std::sqrt(z0)) - 1.0) / 4.0);
    const double alpha = alpha_for_epsilon_dg1xn(eps);
    CHECK(alpha == doctest::Approx(z0).epsilon(1e-6));
    // Defining inequality holds at alpha and fails slightly below.
    CHECK(std::exp(c1() / std::sqrt(alpha)) - 1.0 <= 4.0 * eps * eps * (1 + 1e-12));
    CHECK(std::exp(c1() / std::sqrt(alpha * (1.0 - 1e-6))) - 1.0 >
          4.0 * eps * eps);
  }
  SUBCASE("dg_nxn: same with the quartic root") {
    // The quartic constant is ~7.8e5, so z0 must be huge for the forward map
    // to stay finite: c2() / z0^(1/4) < log 5 needs z0 > ~5e22.
    const double z0 = 1e24;
    const double eps =
        std::sqrt((std::exp(c2() / std::pow(z0, 0.25)) - 1.0) / 4.0);
    const double alpha = alpha_for_epsilon_dgnxn(eps);
    CHECK(alpha == doctest::Approx(z0).epsilon(1e-6));
  }
  SUBCASE("general: g(z) = 1/z, psi_sup = 1, eps = 0.9") {
    const double alpha =
        alpha_for_epsilon_general(0.9, 1.0, [](double z) { return 1.0 / z; });
    // exp(3/z) - 1 = 4 * 0.81  =>  z = 3 / log(4.24).
    CHECK(alpha == doctest::Approx(3.0 / std::log(4.24)).epsilon(1e-9));
  }
  SUBCASE("general: already satisfied at z = 1 clamps to 1") {
    const double alpha = alpha_for_epsilon_general(
        0.9, 1.0, [](double z) { return 0.01 / z; });
    CHECK(alpha == 1.0);
  }
  SUBCASE("monotone nonincreasing in epsilon") {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps = 0.05; eps < 0.96; eps += 0.05) {
      const double a = alpha_for_epsilon_dg1xn(eps);
      CHECK(a <= prev * (1 + 1e-9));
      CHECK(a >= 1.0);
      prev = a;
    }
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(alpha_for_epsilon_dg1xn(0.0), validation_error);
    CHECK_THROWS_AS(alpha_for_epsilon_dg1xn(1.0), validation_error);
  }
}

TEST_CASE("theorem times: dg_1xn formula, lower-time degeneracy") {
  const double eps = 0.25;
  const WalkSpec walk = make_dg_1xn(8, 16);
  const TheoremTimes times = theorem_times(walk, eps);
  const double alpha = alpha_for_epsilon_dg1xn(eps);
  CHECK(times.epsilon == eps);
  CHECK(times.alpha == doctest::Approx(alpha).epsilon(1e-12));

  const double t_up = 8.0 * 256.0 * std::log(alpha * 8.0) / (8.0 * kPi * kPi) /
                      (1.0 - 1.0 / 48.0);
  CHECK(times.t_upper == doctest::Approx(t_up).epsilon(1e-12));

  const double gamma = (1.0 / eps - 1.0) / 5.0;  // 0.6
  REQUIRE(times.t_lower.has_value());
  const double t_low = 8.0 * 256.0 / (8.0 * kPi * kPi) * std::log(7.0 * gamma);
  CHECK(*times.t_lower == doctest::Approx(t_low).epsilon(1e-12));
  CHECK(times.t_upper > *times.t_lower);

  // n = 2: (n-1) gamma = 0.6 <= 1, so the lower time is undefined.
  const TheoremTimes degenerate = theorem_times(make_dg_1xn(2, 16), eps);
  CHECK_FALSE(degenerate.t_lower.has_value());
}

TEST_CASE("theorem times: dg_nxn formula") {
  const double eps = 0.25;
  const WalkSpec walk = make_dg_nxn(4, 9);
  const TheoremTimes times = theorem_times(walk, eps);
  const double alpha = alpha_for_epsilon_dgnxn(eps);
  const double t_up = 16.0 * 81.0 * std::log(std::sqrt(alpha) * 3.0) /
                      (8.0 * kPi * kPi) / (1.0 - 4.0 / 27.0);
  CHECK(times.t_upper == doctest::Approx(t_up).epsilon(1e-12));
  const double gamma = 0.6;
  REQUIRE(times.t_lower.has_value());
  const double t_low =
      16.0 * 81.0 / (8.0 * kPi * kPi) * std::log(3.0 * std::sqrt(gamma));
  CHECK(*times.t_lower == doctest::Approx(t_low).epsilon(1e-12));
}

TEST_CASE("theorem times: proof variant and rejections") {
  const double eps = 0.25;
  const TheoremTimes standard = theorem_times(make_dg_1xn(8, 16), eps);
  const TheoremTimes variant = theorem_times(make_dg_1xn(8, 16), eps, true);
  const double ratio = (1.0 - 1.0 / 48.0) / (1.0 - 3.0 / 16.0);
  CHECK(variant.t_upper == doctest::Approx(standard.t_upper * ratio).epsilon(1e-12));

  CHECK_THROWS_AS(theorem_times(make_dg_1xn(8, 3), eps, true), validation_error);
  CHECK_THROWS_AS(theorem_times(make_dg_nxn(4, 9), eps, true), validation_error);
  CHECK_THROWS_AS(theorem_times(make_srw(3, 9), eps), validation_error);
}

TEST_CASE("general times: formula, gamma = 1 special case, domain") {
  GeneralParams params;
  params.n = 4;
  params.q = 16;
  params.sigma_sq = 1.0;
  params.r = 1;
  params.psi_sup = 1.0;
  params.g = [](double z) { return 1.0 / z; };

  const double eps = 0.25;
  const TheoremTimes times = general_times(params, eps);
  const double alpha = alpha_for_epsilon_general(eps, 1.0, params.g);
  const double t_up = 4.0 * 256.0 * std::log(alpha * 4.0) /
                      (4.0 * kPi * kPi * 1.0) / (1.0 - 1.0 / (12.0 * 16.0));
  CHECK(times.t_upper == doctest::Approx(t_up).epsilon(1e-12));
  REQUIRE(times.t_lower.has_value());
  CHECK(*times.t_lower == doctest::Approx(4.0 * 256.0 / (4.0 * kPi * kPi) *
                                          std::log(4.0 * 0.6))
                              .epsilon(1e-12));

  // eps = 1/6 makes gamma = 1, so t_lower = n q^2 / (4 pi^2 sigma^2) log n.
  const TheoremTimes unit = general_times(params, 1.0 / 6.0);
  REQUIRE(unit.t_lower.has_value());
  CHECK(*unit.t_lower ==
        doctest::Approx(4.0 * 256.0 / (4.0 * kPi * kPi) * std::log(4.0))
            .epsilon(1e-12));

  GeneralParams wide = params;
  wide.q = 4;
  wide.r = 7;  // r^2 = 49 >= 12 q = 48
  CHECK_THROWS_AS(general_times(wide, eps), validation_error);
}

TEST_CASE("quadratic decomposition equals the direct form") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int n : {3, 8, 20}) {
    const Eigen::MatrixXd gamma = correlation_model(make_dg_1xn(n, 5)).gamma;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> y(static_cast<std::size_t>(n - 1));
      for (double& v : y) v = unif(rng);
      const double decomposed = quadratic_form_decomposed(n, y);
      const double direct = quadratic_form_direct(gamma, y);
      CHECK(decomposed ==
            doctest::Approx(direct).epsilon(1e-10).scale(std::abs(direct) + 1.0));
    }
  }
  CHECK_THROWS_AS(quadratic_form_decomposed(3, std::vector<double>{1.0}),
                  validation_error);
}

TEST_CASE("Schur sequence: frozen dg_1xn values and the coefficient pattern") {
  const Eigen::MatrixXd psi = correlation_model(make_dg_1xn(4, 5)).psi;
  const std::vector<double> a = schur_sequence(psi);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(1.0).epsilon(1e-12));

  // a_k * (n-1)/n = 1/2 for k = 1 and k/(k+1) for k >= 2.
  const int n = 10;
  const std::vector<double> seq =
      schur_sequence(correlation_model(make_dg_1xn(n, 5)).psi);
  const double scale = static_cast<double>(n - 1) / n;
  CHECK(seq[0] * scale == doctest::Approx(0.5).epsilon(1e-10));
  for (std::size_t k = 2; k <= seq.size(); ++k) {
    CHECK(seq[k - 1] * scale ==
          doctest::Approx(static_cast<double>(k) / (k + 1)).epsilon(1e-10));
  }

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_WITH_AS(schur_sequence(bad),
                       doctest::Contains("pivot"), validation_error);
}

TEST_CASE("dg_nxn Schur closed form and grid identity") {
  SUBCASE("n = 3 frozen sequence") {
    const std::vector<double> a =
        schur_sequence(correlation_model(make_dg_nxn(3, 5)).psi);
    REQUIRE(a.size() == 4);
    CHECK(a[0] == doctest::Approx(0.5625).epsilon(1e-10));  // (3/2)^2 / 4
    CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(a[2] == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(a[3] == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("closed form matches elimination for n = 7") {
    const int n = 7;
    const std::vector<double> a =
        schur_sequence(correlation_model(make_dg_nxn(n, 5)).psi);
    for (int l = 1; l <= n - 1; ++l) {
      for (int k = 1; k <= n - 1; ++k) {
        const std::size_t j = static_cast<std::size_t>((l - 1) * (n - 1) + (k - 1));
        CHECK(a[j] == doctest::Approx(dgnxn_schur_closed(n, l, k)).epsilon(1e-10));
        // Floor inequality in the scaled ordering.
        const double floor_bound =
            static_cast<double>(l) * k / ((l + 1.0) * (k + 1.0));
        CHECK(a[j] >= floor_bound - 1e-10);
      }
    }
  }
}

TEST_CASE("summation lemmas: frozen small sums, bounds hold on a grid") {
  CHECK(lemma_sum_constant() ==
        doctest::Approx(1.0 + std::exp(2.0 / kE)).epsilon(1e-15));
  CHECK(lemma_double_constant() ==
        doctest::Approx(1.0 + 2.0 * std::exp(4.0 / kE) +
                        2.0 * std::exp(8.0 / kE) + std::exp(32.0 / kE))
            .epsilon(1e-15));
  CHECK(dgnxn_g(16.0) ==
        doctest::Approx(lemma_double_constant() / 2.0).epsilon(1e-15));

  CHECK(lemma_sum(1.0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lemma_sum(1.0, 2) ==
        doctest::Approx(std::pow(2.0, -0.5) + std::pow(2.0, -2.0 / 3.0))
            .epsilon(1e-15));

  CHECK(lemma_double_sum(1) == doctest::Approx(1.0).epsilon(1e-15));
  const double q11 = std::pow(0.25, 0.25);
  const double q12 = std::pow(0.25, 1.0 / 3.0);
  const double q22 = std::pow(0.25, 4.0 / 9.0);
  CHECK(lemma_double_sum(2) ==
        doctest::Approx(q11 + 2.0 * q12 + q22).epsilon(1e-14));

  for (double alpha : {1.0, 4.0, 100.0}) {
    const double bound = lemma_sum_constant() / std::sqrt(alpha);
    for (std::int64_t n : {1, 2, 5, 17, 100, 1000, 31623}) {
      CHECK(lemma_sum(alpha, n) <= bound);
    }
  }
  for (std::int64_t n : {1, 2, 7, 50, 400, 1000}) {
    CHECK(lemma_double_sum(n) <= lemma_double_constant());
  }
}

TEST_CASE("Gaussian comb: frozen values, evenness, argmax, threshold domain") {
  CHECK(gaussian_comb(0.0, 1.0, 1) ==
        doctest::Approx(1.0 + 2.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(gaussian_comb(0.5, 1.0, 1) ==
        doctest::Approx(2.0 * std::exp(-0.25) + std::exp(-2.25)).epsilon(1e-15));

  for (double x : {0.05, 0.21, 0.4, 0.51}) {
    CHECK(std::abs(gaussian_comb(x, 3.0, 7) - gaussian_comb(-x, 3.0, 7)) <=
          1e-14);
  }

  CHECK(gaussian_comb_argmax(50.0, 10, 1e-4) == 0.0);
  CHECK(gaussian_comb_argmax(200.0, 5, 1e-4) == 0.0);

  // Threshold bisection requires a failing lower endpoint.
  CHECK_THROWS_AS(gaussian_comb_threshold(5, 1e-4, 50.0, 60.0),
                  validation_error);
  CHECK_THROWS_AS(gaussian_comb_argmax(0.0, 5, 1e-4), validation_error);
  CHECK_THROWS_AS(gaussian_comb_argmax(1.0, 5, 0.6), validation_error);
  CHECK(gaussian_comb_argmax(1.0, 0, 1e-4) == 0.0);
}

TEST_CASE("correlation condition: identity family attains equality") {
  const auto inv = [](double z) { return 1.0 / z; };
  std::vector<Eigen::MatrixXd> family = {Eigen::MatrixXd::Identity(4, 4),
                                         Eigen::MatrixXd::Identity(9, 9)};
  for (double alpha : {1.0, 2.0, 16.0}) {
    const CorrelationCheck check = correlation_condition_check(family, alpha, inv);
    CHECK(check.holds);
    CHECK(std::abs(check.worst_margin) <= 1e-12);
    REQUIRE(check.sums.size() == 2);
    CHECK(check.sums[0] == doctest::Approx(1.0 / alpha).epsilon(1e-12));
    CHECK(check.sums[1] == doctest::Approx(1.0 / alpha).epsilon(1e-12));
    CHECK(check.failure.empty());
  }

  SUBCASE("a too-small g makes the condition fail") {
    const CorrelationCheck check = correlation_condition_check(
        family, 1.0, [](double z) { return 0.5 / z; });
    CHECK_FALSE(check.holds);
    CHECK(check.worst_margin == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(check.failure.empty());
  }
  SUBCASE("non positive definite member is reported") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    const CorrelationCheck check =
        correlation_condition_check({bad}, 1.0, inv);
    CHECK_FALSE(check.holds);
    CHECK_FALSE(check.failure.empty());
  }
}
