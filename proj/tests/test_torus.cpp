// State layer: canonical representatives, increment-distribution validation,
// the generic characteristic function, moments, and the JSON wire format.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cutofflab/errors.hpp"
#include "cutofflab/torus.hpp"

using namespace cutofflab;

namespace {

IncrementDistribution pm_one(std::int64_t q) {
  IncrementDistribution mu;
  mu.q = q;
  mu.m = 1;
  mu.support = {{{1}, make_rational(1, 2)}, {{-1}, make_rational(1, 2)}};
  return mu;
}

IncrementDistribution axes_2d(std::int64_t q) {
  IncrementDistribution mu;
  mu.q = q;
  mu.m = 2;
  mu.support = {{{1, 0}, make_rational(1, 4)},
                {{-1, 0}, make_rational(1, 4)},
                {{0, 1}, make_rational(1, 4)},
                {{0, -1}, make_rational(1, 4)}};
  return mu;
}

}  // namespace

TEST_CASE("canonical representatives live in [-q/2, q/2)") {
  // q = 5: residues map to {-2, -1, 0, 1, 2}.
  CHECK(canonical_rep(0, 5) == 0);
  CHECK(canonical_rep(1, 5) == 1);
  CHECK(canonical_rep(2, 5) == 2);
  CHECK(canonical_rep(3, 5) == -2);
  CHECK(canonical_rep(4, 5) == -1);
  CHECK(canonical_rep(7, 5) == 2);
  CHECK(canonical_rep(-3, 5) == 2);
  CHECK(canonical_rep(-7, 5) == -2);
  // Even q: the boundary residue q/2 maps to -q/2.
  CHECK(canonical_rep(2, 4) == -2);
  CHECK(canonical_rep(-2, 4) == -2);
  CHECK(canonical_rep(3, 4) == -1);
  CHECK(canonical_rep(1, 2) == -1);

  const TorusVector v = canonicalize({7, -3, 4}, 5);
  CHECK(v.c == std::vector<std::int64_t>{2, 2, -1});
  CHECK(v.q == 5);
  CHECK_THROWS_AS(canonicalize({0}, 1), validation_error);
}

TEST_CASE("canonical_rep is idempotent and consistent mod q") {
  for (std::int64_t q = 2; q <= 9; ++q) {
    for (std::int64_t v = -3 * q; v <= 3 * q; ++v) {
      const std::int64_t r = canonical_rep(v, q);
      CHECK(r >= -(q / 2));
      CHECK(r < (q + 1) / 2);
      CHECK(canonical_rep(r, q) == r);
      CHECK(((v - r) % q) == 0);
    }
  }
}

TEST_CASE("validate accepts symmetric distributions and names violations") {
  CHECK_NOTHROW(validate(pm_one(5)));
  CHECK_NOTHROW(validate(axes_2d(7)));

  SUBCASE("probabilities must sum to exactly 1") {
    auto mu = pm_one(5);
    mu.support[0].p = make_rational(1, 3);
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("support must be symmetric") {
    IncrementDistribution mu;
    mu.q = 5;
    mu.m = 1;
    mu.support = {{{1}, make_rational(1, 2)}, {{2}, make_rational(1, 2)}};
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("duplicate support vectors are rejected") {
    auto mu = pm_one(5);
    mu.support.push_back({{1}, make_rational(0, 1)});
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("probabilities must be positive") {
    auto mu = pm_one(5);
    mu.support[0].p = make_rational(0, 1);
    mu.support[1].p = make_rational(1, 1);
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("vectors must have dimension m") {
    auto mu = pm_one(5);
    mu.support[0].v = {1, 0};
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("Linf norm must stay below q/2") {
    // For q = 4 the canonical residue -2 has |.| = q/2 and is rejected.
    IncrementDistribution mu;
    mu.q = 4;
    mu.m = 1;
    mu.support = {{{-2}, make_rational(1, 1)}};
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
  SUBCASE("vectors must be canonical representatives") {
    auto mu = pm_one(5);
    mu.support[0].v = {4};  // canonical form is -1
    CHECK_THROWS_AS(validate(mu), validation_error);
  }
}

TEST_CASE("char_fn_generic matches hand formulas and is exactly even") {
  const auto mu = pm_one(5);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> unif(-7.0, 7.0);
  for (int i = 0; i < 50; ++i) {
    const double theta = unif(rng);
    const std::vector<double> th = {theta};
    const std::vector<double> th_neg = {-theta};
    CHECK(char_fn_generic(mu, th) ==
          doctest::Approx(std::cos(theta)).epsilon(1e-14));
    // Structural evenness: folding +-g pairs makes the two values identical.
    CHECK(char_fn_generic(mu, th) == char_fn_generic(mu, th_neg));
  }

  const auto mu2 = axes_2d(7);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> th = {unif(rng), unif(rng)};
    const double expected = 0.5 * (std::cos(th[0]) + std::cos(th[1]));
    CHECK(char_fn_generic(mu2, th) == doctest::Approx(expected).epsilon(1e-14));
  }

  const std::vector<double> zero = {0.0, 0.0};
  CHECK(char_fn_generic(mu2, zero) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("moments: symmetric mean, covariance, equivariance flag") {
  const MomentSummary m2 = moments(axes_2d(7));
  CHECK(m2.mean.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(m2.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m2.covariance(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(m2.covariance(0, 1)) <= 1e-15);
  CHECK(m2.equivariant);
  CHECK(m2.marginal_variance == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m2.sigma_sq == doctest::Approx(1.0).epsilon(1e-15));

  // Unequal marginal variances: coordinate 2 jumps by +-2.
  IncrementDistribution mu;
  mu.q = 7;
  mu.m = 2;
  mu.support = {{{1, 0}, make_rational(1, 4)},
                {{-1, 0}, make_rational(1, 4)},
                {{0, 2}, make_rational(1, 4)},
                {{0, -2}, make_rational(1, 4)}};
  const MomentSummary mixed = moments(mu);
  CHECK_FALSE(mixed.equivariant);
  CHECK(std::isnan(mixed.marginal_variance));
  CHECK(std::isnan(mixed.sigma_sq));
  CHECK(mixed.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mixed.covariance(1, 1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("increment JSON round-trips exactly") {
  const auto mu = axes_2d(7);
  const std::string text = to_json(mu);
  const IncrementDistribution back = increments_from_json(text);
  CHECK(back.q == mu.q);
  CHECK(back.m == mu.m);
  REQUIRE(back.support.size() == mu.support.size());
  for (std::size_t i = 0; i < mu.support.size(); ++i) {
    CHECK(back.support[i].v == mu.support[i].v);
    CHECK(back.support[i].p == mu.support[i].p);
  }
  // A second round trip is byte-identical.
  CHECK(to_json(back) == text);
}

TEST_CASE("increment JSON rejects malformed documents") {
  CHECK_THROWS_AS(increments_from_json("{"), validation_error);
  CHECK_THROWS_AS(increments_from_json("[]"), validation_error);
  CHECK_THROWS_AS(increments_from_json(R"({"q": 5, "m": 1})"),
                  validation_error);
  // Valid JSON but invalid distribution (not symmetric).
  CHECK_THROWS_AS(increments_from_json(
                      R"({"q": 5, "m": 1, "support": [{"v": [1], "p": "1"}]})"),
                  validation_error);
  // Zero denominator.
  CHECK_THROWS_AS(
      increments_from_json(
          R"({"q": 5, "m": 1, "support": [{"v": [1], "p": "1/0"}, {"v": [-1], "p": "1/2"}]})"),
      validation_error);
}

TEST_CASE("rational helpers") {
  CHECK(make_rational(2, 4) == Rational{1, 2});
  CHECK(make_rational(1, -2) == Rational{-1, 2});
  CHECK(add(make_rational(1, 6), make_rational(1, 3)) == Rational{1, 2});
  CHECK(to_double(make_rational(1, 4)) == 0.25);
  CHECK(format_rational(make_rational(3, 6)) == "1/2");
  CHECK(format_rational(make_rational(4, 2)) == "2");
  CHECK(parse_rational("1/6") == Rational{1, 6});
  CHECK(parse_rational("7") == Rational{7, 1});
  CHECK_THROWS_AS(make_rational(1, 0), validation_error);
}
