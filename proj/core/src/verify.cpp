#include "cutofflab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cutofflab/bounds.hpp"
#include "cutofflab/errors.hpp"
#include "cutofflab/montecarlo.hpp"
#include "cutofflab/rng.hpp"
#include "cutofflab/stats.hpp"
#include "cutofflab/sweep.hpp"
#include "cutofflab/torus.hpp"
#include "cutofflab/walks.hpp"

namespace cutofflab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Recorder {
  VerifyReport report;

  void add(std::string name, double measured, double tolerance,
           std::string detail = "") {
    VerifyCheck c;
    c.name = std::move(name);
    c.measured = measured;
    c.tolerance = tolerance;
    c.slack = tolerance - measured;
    c.passed = measured <= tolerance;
    c.detail = std::move(detail);
    report.checks.push_back(std::move(c));
  }
};

double unif(RngStream& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_unit();
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

// ---------------------------------------------------------------------------
// torus-core

void check_torus(Recorder& rec, VerifyLevel level) {
  const std::vector<IncrementDistribution> mus = {
      make_dg_1xn(5, 7).increments, make_dg_nxn(3, 5).increments,
      make_srw(4, 8).increments};
  const int thetas = level == VerifyLevel::quick ? 200 : 1000;

  double worst_char = 0;
  double worst_mean = 0;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const IncrementDistribution& mu = mus[i];
    const std::vector<double> zero(static_cast<std::size_t>(mu.m), 0.0);
    worst_char = std::max(worst_char, std::abs(char_fn_generic(mu, zero) - 1.0));
    RngStream rng(101, i);
    std::vector<double> theta(static_cast<std::size_t>(mu.m));
    std::vector<double> neg(static_cast<std::size_t>(mu.m));
    for (int j = 0; j < thetas; ++j) {
      for (int k = 0; k < mu.m; ++k) {
        theta[static_cast<std::size_t>(k)] =
            unif(rng, -std::numbers::pi, std::numbers::pi);
        neg[static_cast<std::size_t>(k)] = -theta[static_cast<std::size_t>(k)];
      }
      const double v = char_fn_generic(mu, theta);
      worst_char = std::max(worst_char, std::abs(v) - 1.0);
      worst_char = std::max(worst_char, std::abs(v - char_fn_generic(mu, neg)));
    }
    worst_mean = std::max(worst_mean, moments(mu).mean.cwiseAbs().maxCoeff());
  }
  rec.add("torus.characteristic_bounds", worst_char, 1e-14);
  rec.add("torus.moments_mean_zero", worst_mean, 1e-12);

  std::int64_t violations = 0;
  for (std::int64_t q = 2; q <= 5; ++q) {
    for (int m = 1; m <= 2; ++m) {
      const std::uint64_t n_states =
          static_cast<std::uint64_t>(std::pow(q, m) + 0.5);
      std::vector<std::vector<std::int64_t>> elems;
      elems.reserve(n_states);
      for (std::uint64_t idx = 0; idx < n_states; ++idx) {
        elems.push_back(decode_state(idx, q, m));
      }
      const auto plus = [&](const std::vector<std::int64_t>& a,
                            const std::vector<std::int64_t>& b) {
        std::vector<std::int64_t> c(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
          c[k] = canonical_rep(a[k] + b[k], q);
        }
        return c;
      };
      const std::vector<std::int64_t> zero(static_cast<std::size_t>(m), 0);
      for (const auto& a : elems) {
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (canonical_rep(a[k], q) != a[k]) ++violations;  // idempotence
        }
        if (plus(a, zero) != a) ++violations;  // identity
        std::vector<std::int64_t> inv(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
          inv[k] = canonical_rep(-a[k], q);
        }
        if (plus(a, inv) != zero) ++violations;  // inverse
        for (const auto& b : elems) {
          if (plus(a, b) != plus(b, a)) ++violations;  // commutativity
          for (const auto& c : elems) {
            if (plus(plus(a, b), c) != plus(a, plus(b, c))) {
              ++violations;  // associativity
            }
          }
        }
      }
    }
  }
  rec.add("torus.group_structure", static_cast<double>(violations), 0.0);
}

// ---------------------------------------------------------------------------
// walks

void check_walks(Recorder& rec, VerifyLevel level, const TamperHook& tamper) {
  {
    const std::vector<WalkSpec> walks = {
        make_dg_1xn(2, 5), make_dg_1xn(3, 7), make_dg_1xn(5, 4),
        make_dg_nxn(2, 7), make_dg_nxn(3, 5), make_srw(1, 9), make_srw(4, 6)};
    const int thetas = level == VerifyLevel::quick ? 100 : 1000;
    double worst = 0;
    for (std::size_t i = 0; i < walks.size(); ++i) {
      const WalkSpec& walk = walks[i];
      RngStream rng(303, i);
      std::vector<double> theta(static_cast<std::size_t>(walk.m));
      for (int j = 0; j < thetas; ++j) {
        for (int k = 0; k < walk.m; ++k) {
          theta[static_cast<std::size_t>(k)] =
              unif(rng, -std::numbers::pi, std::numbers::pi);
        }
        worst = std::max(worst, std::abs(char_fn_closed(walk, theta) -
                                         char_fn_generic(walk.increments, theta)));
      }
    }
    rec.add("walks.closed_matches_generic", worst, 1e-12);
  }

  {
    double worst = 0;
    std::string where;
    const auto visit = [&](const WalkSpec& walk) {
      const CorrelationModel model = correlation_model(walk);
      Eigen::MatrixXd psi = model.psi;
      if (tamper.enabled && tamper.i >= 0 && tamper.j >= 0 &&
          tamper.i < psi.rows() && tamper.j < psi.cols()) {
        psi(tamper.i, tamper.j) += tamper.delta;
      }
      const Eigen::MatrixXd res =
          model.gamma * psi -
          Eigen::MatrixXd::Identity(psi.rows(), psi.cols());
      for (Eigen::Index r = 0; r < res.rows(); ++r) {
        for (Eigen::Index c = 0; c < res.cols(); ++c) {
          const double v = std::abs(res(r, c));
          if (v > worst) {
            worst = v;
            where = std::string(to_string(walk.kind)) + " n=" +
                    std::to_string(walk.n) +
                    " residual entry (" + std::to_string(r) + "," +
                    std::to_string(c) + ")";
          }
        }
      }
    };
    for (int n = 2; n <= 64; ++n) visit(make_dg_1xn(n, 5));
    for (int n = 2; n <= 12; ++n) visit(make_dg_nxn(n, 5));
    rec.add("walks.precision_identity", worst, 1e-10, where);
  }

  {
    double worst = 0;
    const auto visit = [&](const WalkSpec& walk, double mv_expected) {
      const MomentSummary mom = moments(walk.increments);
      const CorrelationModel model = correlation_model(walk);
      worst = std::max(worst, std::abs(mom.marginal_variance - mv_expected));
      const Eigen::MatrixXd res = mom.covariance - mv_expected * model.gamma;
      worst = std::max(worst, res.cwiseAbs().maxCoeff());
    };
    for (const int n : {2, 3, 7, 16}) {
      visit(make_dg_1xn(n, 5), 2.0 / static_cast<double>(n));
    }
    for (const int n : {2, 3, 5}) {
      visit(make_dg_nxn(n, 5),
            4.0 / static_cast<double>(n) / static_cast<double>(n));
    }
    rec.add("walks.covariance_scaling", worst, 1e-12);
  }

  {
    double worst = 0;
    for (const int n : {2, 3, 8, 32, 64}) {
      const Eigen::MatrixXd gamma = correlation_model(make_dg_1xn(n, 5)).gamma;
      const int m = n - 1;
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
      worst = std::max(
          worst, (gamma * ones - ones / static_cast<double>(n - 1))
                     .cwiseAbs()
                     .maxCoeff());
      const double lam = 1.0 + 1.0 / static_cast<double>(n - 1);
      for (int i = 0; i + 1 < m; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        v(i) = 1.0;
        v(i + 1) = -1.0;
        worst = std::max(worst,
                         (gamma * v - lam * v).cwiseAbs().maxCoeff());
      }
    }
    rec.add("walks.dg1xn_gamma_spectrum", worst, 1e-12);
  }

  {
    std::int64_t violations = 0;
    const auto l1 = [](const std::vector<std::int64_t>& v) {
      std::int64_t s = 0;
      for (const std::int64_t x : v) s += std::abs(x);
      return s;
    };
    for (const int n : {2, 3, 6}) {
      const WalkSpec walk = make_dg_1xn(n, 7);
      if (static_cast<std::int64_t>(walk.increments.support.size()) !=
          static_cast<std::int64_t>(n) * (n - 1)) {
        ++violations;
      }
      std::int64_t max_l1 = 0;
      for (const auto& entry : walk.increments.support) {
        const std::int64_t norm = l1(entry.v);
        max_l1 = std::max(max_l1, norm);
        if (norm > 2) ++violations;
      }
      if (max_l1 != walk.r) ++violations;
    }
    for (const int n : {2, 3, 4}) {
      const WalkSpec walk = make_dg_nxn(n, 7);
      const std::int64_t pairs =
          static_cast<std::int64_t>(n) * (n - 1) / 2;
      if (static_cast<std::int64_t>(walk.increments.support.size()) !=
          2 * pairs * pairs) {
        ++violations;
      }
      std::int64_t max_l1 = 0;
      for (const auto& entry : walk.increments.support) {
        const std::int64_t norm = l1(entry.v);
        max_l1 = std::max(max_l1, norm);
        if (norm > 4) ++violations;
      }
      if (max_l1 != walk.r) ++violations;
    }
    rec.add("walks.support_shape", static_cast<double>(violations), 0.0);
  }
}

// ---------------------------------------------------------------------------
// spectral

void check_spectral(Recorder& rec, VerifyLevel level,
                    const SpectralOptions& opts) {
  const bool full = level == VerifyLevel::full;

  {
    struct Case {
      WalkSpec walk;
      std::vector<double> times;
    };
    std::vector<Case> cases;
    if (full) {
      const std::vector<double> t_all = {0.0, 0.5, 1.0, 5.0, 25.0};
      cases.push_back({make_dg_1xn(3, 5), t_all});
      cases.push_back({make_dg_1xn(4, 7), t_all});
      cases.push_back({make_dg_nxn(3, 3), t_all});
    } else {
      cases.push_back({make_dg_1xn(3, 5), {0.5, 5.0}});
      cases.push_back({make_dg_nxn(3, 3), {1.0}});
    }
    double worst = 0;
    for (const Case& c : cases) {
      for (const double t : c.times) {
        const KernelVector a = exact_kernel(c.walk, t, opts);
        const KernelVector b = uniformization_oracle(c.walk, t, opts);
        worst = std::max(worst, l1_distance(a, b));
      }
    }
    rec.add("spectral.oracle_equivalence", worst, 1e-9);
  }

  {
    struct Case {
      WalkSpec walk;
      std::vector<double> times;
    };
    std::vector<Case> cases = {{make_dg_1xn(3, 5), {0.25, 1.0, 4.0}},
                               {make_dg_nxn(3, 3), {0.25, 1.0, 4.0}}};
    if (full) {
      cases.push_back({make_dg_1xn(5, 11), {1.0, 5.0, 20.0}});
      cases.push_back({make_dg_nxn(4, 5), {5.0, 15.0}});
    }
    double worst = -kInf;
    for (const Case& c : cases) {
      for (const double t : c.times) {
        const double tv = exact_tv(c.walk, t, opts);
        const double l2 = l2_bound(c.walk, t, opts);
        worst = std::max(worst, 4.0 * tv * tv - l2);
      }
    }
    rec.add("spectral.l2_dominance", worst, 1e-9);
  }

  {
    double worst = -kInf;
    const auto series = [&](const WalkSpec& walk,
                            const std::vector<double>& ts) {
      DenseTvEvaluator eval(walk, opts);
      double prev = kInf;
      for (const double t : ts) {
        const double d = eval.evaluate(t).tv;
        worst = std::max(worst, d - prev);
        prev = d;
      }
    };
    series(make_dg_1xn(3, 5), {0, 1, 2, 3, 4, 5, 6, 7, 8});
    if (full) series(make_dg_nxn(4, 5), {2, 5, 9, 14});
    rec.add("spectral.tv_monotone", worst, 1e-10);
  }

  {
    double worst = 0;
    const auto visit = [&](const WalkSpec& walk, double t) {
      const KernelVector kernel = exact_kernel(walk, t, opts);
      const std::uint64_t n_states = kernel.p.size();
      const std::int64_t q = walk.q;
      for (std::uint64_t idx = 0; idx < n_states; ++idx) {
        std::uint64_t rest = idx;
        std::uint64_t neg = 0;
        std::uint64_t mult = 1;
        for (int k = 0; k < walk.m; ++k) {
          const std::uint64_t d = rest % static_cast<std::uint64_t>(q);
          rest /= static_cast<std::uint64_t>(q);
          const std::uint64_t nd =
              d == 0 ? 0 : static_cast<std::uint64_t>(q) - d;
          neg += nd * mult;
          mult *= static_cast<std::uint64_t>(q);
        }
        worst = std::max(worst, std::abs(kernel.p[idx] - kernel.p[neg]));
      }
    };
    visit(make_dg_1xn(4, 7), 2.0);
    visit(make_dg_nxn(3, 4), 1.5);
    rec.add("spectral.kernel_symmetry", worst, 1e-12);
  }

  {
    double worst = 0;
    const int samples = full ? 100 : 50;
    const auto visit = [&](const WalkSpec& walk, std::uint64_t seed) {
      const std::uint64_t n_states =
          state_count(walk, static_cast<std::uint64_t>(opts.dense_budget));
      const std::vector<double> cs = cos_table(walk.q);
      std::vector<double> sn(static_cast<std::size_t>(walk.q));
      for (std::int64_t d = 0; d < walk.q; ++d) {
        sn[static_cast<std::size_t>(d)] =
            std::sin(2.0 * std::numbers::pi * static_cast<double>(d) /
                     static_cast<double>(walk.q));
      }
      RngStream rng(404, seed);
      for (int s = 0; s < samples; ++s) {
        const std::uint64_t y_idx = rng.next_u64() % n_states;
        const std::vector<std::int64_t> y = decode_state(y_idx, walk.q, walk.m);
        std::vector<double> f_cos(n_states);
        std::vector<double> f_sin(n_states);
        for (std::uint64_t idx = 0; idx < n_states; ++idx) {
          std::uint64_t rest = idx;
          std::int64_t dot = 0;
          for (int k = 0; k < walk.m; ++k) {
            const std::int64_t d =
                static_cast<std::int64_t>(rest % static_cast<std::uint64_t>(walk.q));
            rest /= static_cast<std::uint64_t>(walk.q);
            dot += y[static_cast<std::size_t>(k)] * d;
          }
          const std::int64_t r = ((dot % walk.q) + walk.q) % walk.q;
          f_cos[idx] = cs[static_cast<std::size_t>(r)];
          f_sin[idx] = sn[static_cast<std::size_t>(r)];
        }
        std::vector<double> theta(static_cast<std::size_t>(walk.m));
        for (int k = 0; k < walk.m; ++k) {
          theta[static_cast<std::size_t>(k)] =
              2.0 * std::numbers::pi *
              static_cast<double>(y[static_cast<std::size_t>(k)]) /
              static_cast<double>(walk.q);
        }
        const double expect = 1.0 - char_fn(walk, theta);
        const double got =
            dirichlet_form(walk, f_cos, opts) + dirichlet_form(walk, f_sin, opts);
        worst = std::max(worst, std::abs(got - expect));
      }
    };
    visit(make_dg_1xn(3, 5), 0);
    visit(make_srw(2, 9), 1);
    rec.add("spectral.dirichlet_eigen", worst, 1e-10);
  }

  {
    double worst = 0;
    const WalkSpec walk = make_srw(3, 5);
    for (const double t : {0.5, 2.0, 10.0}) {
      const double a = l2_bound(walk, t, opts);
      const double b = l2_bound_srw_product(walk, t);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    rec.add("spectral.srw_product_path", worst, 1e-12);
  }

  {
    double worst = -kInf;
    std::string detail;
    const auto visit = [&](const WalkSpec& walk, double t) {
      const DecayScan scan = decay_condition_scan(walk, t, opts);
      if (!scan.reference_cap.has_value() || !scan.holds) worst = kInf;
      if (scan.reference_cap.has_value()) {
        worst = std::max(worst, scan.max_phi_far - *scan.reference_cap);
      }
      detail += std::string(to_string(walk.kind)) + " far=" +
                std::to_string(scan.far_count) + "/" +
                std::to_string(scan.lattice_size) + " ";
    };
    visit(make_dg_1xn(4, 16), theorem_times(make_dg_1xn(4, 16), 0.25).t_upper);
    visit(make_srw(4, 16), 10.0);
    rec.add("spectral.decay_condition", worst, 0.0, detail);
  }

  if (full) {
    const WalkSpec walk = make_dg_nxn(4, 5);
    double worst = 0;
    SpectralOptions own = opts;
    own.engine = SpectralOptions::Engine::own;
    SpectralOptions fftw = opts;
    fftw.engine = SpectralOptions::Engine::fftw;
    DenseTvEvaluator eval(walk, fftw);
    for (const double t : {4.0, 10.0}) {
      worst = std::max(worst,
                       std::abs(exact_tv(walk, t, own) - eval.evaluate(t).tv));
    }
    rec.add("spectral.engine_agreement", worst, 1e-9);

    SpectralOptions f32 = fftw;
    f32.use_float32 = true;
    DenseTvEvaluator eval32(walk, f32);
    const double delta =
        std::abs(eval.evaluate(6.0).tv - eval32.evaluate(6.0).tv);
    rec.add("spectral.float32_consistency", delta, 1e-4);
  }
}

// ---------------------------------------------------------------------------
// bounds

void check_bounds(Recorder& rec, VerifyLevel level) {
  const bool full = level == VerifyLevel::full;

  {
    double worst = 0;
    std::vector<int> ns = {3, 8, 20};
    if (full) ns.push_back(40);
    const int draws = full ? 1000 : 100;
    for (const int n : ns) {
      const Eigen::MatrixXd gamma = correlation_model(make_dg_1xn(n, 5)).gamma;
      RngStream rng(505, static_cast<std::uint64_t>(n));
      std::vector<double> y(static_cast<std::size_t>(n - 1));
      for (int j = 0; j < draws; ++j) {
        for (auto& v : y) v = unif(rng, -3.0, 3.0);
        const double direct = quadratic_form_direct(gamma, y);
        const double decomposed = quadratic_form_decomposed(n, y);
        worst = std::max(worst, std::abs(direct - decomposed) /
                                    std::max(std::abs(direct), 1e-12));
      }
    }
    rec.add("bounds.quadratic_decomposition", worst, 1e-10);
  }

  {
    double worst = 0;
    for (const int n : {4, 10, 32}) {
      const Eigen::MatrixXd psi = correlation_model(make_dg_1xn(n, 5)).psi;
      const std::vector<double> a = schur_sequence(psi);
      const double factor = static_cast<double>(n - 1) / static_cast<double>(n);
      worst = std::max(worst, std::abs(a[0] * factor - 0.5));
      for (int k = 2; k <= n - 1; ++k) {
        worst = std::max(
            worst, std::abs(a[static_cast<std::size_t>(k - 1)] * factor -
                            static_cast<double>(k) / static_cast<double>(k + 1)));
      }
    }
    rec.add("bounds.schur_dg1xn_pattern", worst, 1e-10);
  }

  {
    const int n = 9;  // grid block 8x8, elimination in row-major cell order
    const Eigen::MatrixXd psi = correlation_model(make_dg_nxn(n, 5)).psi;
    const std::vector<double> a = schur_sequence(psi);
    const double s = std::pow(static_cast<double>(n - 1) / n, 2);
    const int d = n - 1;
    double worst = 0;
    for (int l = 1; l <= d; ++l) {
      for (int k = 1; k <= d; ++k) {
        const std::size_t j = static_cast<std::size_t>((l - 1) * d + (k - 1));
        const double pivot = 1.0 / (a[j] * s);
        const double expected =
            1.0 + static_cast<double>(l + k + 1) /
                      (static_cast<double>(l) * static_cast<double>(k));
        worst = std::max(worst, std::abs(pivot - expected));
      }
    }
    rec.add("bounds.schur_grid_closed_form", worst, 1e-10);
  }

  {
    const int n = 7;  // indices l,k <= 6
    const Eigen::MatrixXd psi = correlation_model(make_dg_nxn(n, 5)).psi;
    const std::vector<double> a = schur_sequence(psi);
    const int d = n - 1;
    double worst = -kInf;
    for (int l = 1; l <= d; ++l) {
      for (int k = 1; k <= d; ++k) {
        const std::size_t j = static_cast<std::size_t>((l - 1) * d + (k - 1));
        const double closed = dgnxn_schur_closed(n, l, k);
        const double floor_bound =
            static_cast<double>(l) * k /
            (static_cast<double>(l + 1) * static_cast<double>(k + 1));
        worst = std::max(worst, std::abs(a[j] - closed));
        worst = std::max(worst, floor_bound - a[j]);
      }
    }
    rec.add("bounds.dgnxn_schur_sequence", worst, 1e-10);
  }

  {
    double worst = -kInf;
    const auto sweep_alpha = [&](const std::function<double(double)>& alpha_of) {
      double prev = kInf;
      for (int i = 1; i <= 19; ++i) {
        const double eps = 0.05 * i;
        const double a = alpha_of(eps);
        worst = std::max(worst, (a - prev) / std::max(1.0, prev));
        prev = a;
      }
    };
    sweep_alpha([](double e) { return alpha_for_epsilon_dg1xn(e); });
    sweep_alpha([](double e) { return alpha_for_epsilon_dgnxn(e); });
    sweep_alpha([](double e) {
      return alpha_for_epsilon_general(e, 4.0, [](double z) { return dgnxn_g(z); });
    });
    rec.add("bounds.alpha_monotone", worst, 1e-9);
  }

  {
    double worst = -kInf;
    std::vector<std::int64_t> grid;
    for (std::int64_t n = 1; n <= 10; ++n) grid.push_back(n);
    for (double x = 13; x <= 1e5; x *= 1.3) {
      grid.push_back(static_cast<std::int64_t>(x));
    }
    grid.push_back(100000);
    for (const double alpha : {1.0, 4.0, 100.0}) {
      const double cap = lemma_sum_constant() / std::sqrt(alpha);
      for (const std::int64_t n : grid) {
        worst = std::max(worst, lemma_sum(alpha, n) - cap);
      }
    }
    rec.add("bounds.sum_inequality", worst, 0.0);
  }

  {
    double worst = -kInf;
    const double cap = lemma_double_constant();
    std::vector<std::int64_t> grid;
    for (std::int64_t n = 1; n <= 10; ++n) grid.push_back(n);
    for (double x = 13; x <= 1e3; x *= 1.3) {
      grid.push_back(static_cast<std::int64_t>(x));
    }
    grid.push_back(1000);
    for (const std::int64_t n : grid) {
      worst = std::max(worst, lemma_double_sum(n) - cap);
    }
    rec.add("bounds.double_sum_inequality", worst, 0.0);
  }

  {
    double worst = 0;
    std::vector<double> cs = {50.0, 1000.0};
    if (full) cs.push_back(200.0);
    for (const double c : cs) {
      for (const int big_n : {5, 50}) {
        worst = std::max(worst, std::abs(gaussian_comb_argmax(c, big_n, 1e-4)));
      }
    }
    rec.add("bounds.comb_argmax", worst, 0.0);
  }

  {
    double worst_neg_margin = -kInf;
    std::string detail;
    std::vector<Eigen::MatrixXd> family;
    for (const int n : {3, 6, 10}) {
      family.push_back(correlation_model(make_dg_nxn(n, 5)).psi);
    }
    for (const double alpha : {1.0, 16.0}) {
      const CorrelationCheck res = correlation_condition_check(
          family, alpha, [](double z) { return dgnxn_g(z); });
      if (!res.holds) worst_neg_margin = kInf;
      worst_neg_margin = std::max(worst_neg_margin, -res.worst_margin);
      detail += "dgnxn alpha=" + std::to_string(alpha) +
                " margin=" + format_g17(res.worst_margin) + " ";
    }
    std::vector<Eigen::MatrixXd> identity_family = {
        Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(9, 9)};
    const CorrelationCheck res = correlation_condition_check(
        identity_family, 2.0, [](double z) { return 1.0 / z; });
    if (!res.holds) worst_neg_margin = kInf;
    worst_neg_margin = std::max(worst_neg_margin, -res.worst_margin);
    rec.add("bounds.correlation_condition", worst_neg_margin, 1e-12, detail);
  }
}

// ---------------------------------------------------------------------------
// montecarlo + harness

void check_montecarlo(Recorder& rec, VerifyLevel level,
                      const SpectralOptions& opts) {
  const bool full = level == VerifyLevel::full;

  {
    double worst = 0;
    RngStream rng(606, 0);
    for (int j = 0; j < 100; ++j) {
      const std::int64_t q = 4 + static_cast<std::int64_t>(rng.next_u64() % 6);
      const int m = 2 + static_cast<int>(rng.next_u64() % 2);
      std::vector<std::int64_t> c(static_cast<std::size_t>(m));
      std::vector<std::int64_t> neg(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        c[static_cast<std::size_t>(k)] = canonical_rep(
            static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(q)),
            q);
        neg[static_cast<std::size_t>(k)] =
            canonical_rep(-c[static_cast<std::size_t>(k)], q);
      }
      worst = std::max(worst, std::abs(psi_value(TorusVector{c, q}) -
                                       psi_value(TorusVector{neg, q})));
    }
    rec.add("montecarlo.psi_even", worst, 0.0);
  }

  {
    double worst = -kInf;
    const auto visit = [&](const WalkSpec& walk, double t) {
      const KernelVector kernel = exact_kernel(walk, t, opts);
      const PsiMoments nu = psi_moments(kernel);
      const PsiMoments pi = psi_stationary_moments(walk);
      const double bound =
          tv_lower_bound(nu.mean, nu.variance, pi.mean, pi.variance);
      worst = std::max(worst, bound - tv_from_kernel(kernel));
    };
    visit(make_dg_1xn(3, 5), 1.0);
    visit(make_dg_1xn(3, 5), 3.0);
    visit(make_dg_nxn(3, 3), 2.0);
    rec.add("montecarlo.lower_bound_validity", worst, 1e-9);
  }

  {
    const WalkSpec walk = make_dg_1xn(3, 5);
    const double t = 4.0;
    const std::int64_t samples = full ? 100000 : 20000;
    const std::vector<std::uint64_t> seeds =
        full ? std::vector<std::uint64_t>{11, 12, 13}
             : std::vector<std::uint64_t>{11};
    const KernelVector kernel = exact_kernel(walk, t, opts);
    const double exact_mean = psi_exact_mean(walk, t);

    double min_p = 1.0;
    double worst_ratio = 0.0;
    std::string detail;
    for (const std::uint64_t seed : seeds) {
      const std::vector<std::uint64_t> counts =
          endpoint_counts(walk, t, samples, seed, opts);
      double stat = 0;
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = kernel.p[i] * static_cast<double>(samples);
        const double diff = static_cast<double>(counts[i]) - expected;
        stat += diff * diff / expected;
      }
      const double p = chi_square_pvalue(
          stat, static_cast<std::int64_t>(counts.size()) - 1);
      min_p = std::min(min_p, p);
      const PsiEstimate est = estimate_psi_stats(walk, t, samples, seed, opts);
      worst_ratio =
          std::max(worst_ratio, std::abs(est.mean - exact_mean) / est.ci95);
      detail += "seed=" + std::to_string(seed) + " p=" + format_g17(p) + " ";
    }
    rec.add("montecarlo.endpoint_gof", 0.001 - min_p, 0.0, detail);
    rec.add("montecarlo.psi_mean_ci", worst_ratio, 4.0);
  }
}

void check_harness(Recorder& rec, const SpectralOptions& opts) {
  ExperimentConfig config;
  config.kind = WalkKind::dg_1xn;
  config.instances = {{3, 5}};
  config.grid.kind = GridKind::linear;
  config.grid.start = 0.0;
  config.grid.stop = 6.0;
  config.grid.points = 5;
  config.spectral = opts;
  config.seed = 7;

  const CutoffReport a = run_sweep(config);
  const CutoffReport b = run_sweep(config);
  std::ostringstream csv_a;
  std::ostringstream csv_b;
  write_csv(a, csv_a);
  write_csv(b, csv_b);

  double worst = -kInf;
  std::string detail;
  if (csv_a.str() != csv_b.str()) {
    worst = kInf;
    detail = "serialization differs between identical runs";
  }
  for (const SweepRow& row : a.rows) {
    if (row.exact_tv.has_value()) {
      worst = std::max(worst, *row.exact_tv - row.l2_tv_bound);
    }
  }
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    const bool sorted = a.rows[i - 1].n < a.rows[i].n ||
                        (a.rows[i - 1].n == a.rows[i].n &&
                         a.rows[i - 1].t <= a.rows[i].t);
    if (!sorted) {
      worst = kInf;
      detail = "rows not sorted by (n, t)";
    }
  }
  rec.add("harness.sweep_consistency", worst, 1e-9, detail);
}

}  // namespace

VerifyReport run_verification_suite(VerifyLevel level, const TamperHook& tamper,
                                    const SpectralOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  Recorder rec;
  rec.report.level = level;

  check_torus(rec, level);
  check_walks(rec, level, tamper);
  check_spectral(rec, level, opts);
  check_bounds(rec, level);
  check_montecarlo(rec, level, opts);
  check_harness(rec, opts);

  rec.report.all_passed =
      std::all_of(rec.report.checks.begin(), rec.report.checks.end(),
                  [](const VerifyCheck& c) { return c.passed; });
  rec.report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return rec.report;
}

std::string verify_report_to_json(const VerifyReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = "cutofflab-verify-v1";
  j["level"] = report.level == VerifyLevel::quick ? "quick" : "full";
  j["all_passed"] = report.all_passed;
  j["checks"] = nlohmann::ordered_json::array();
  for (const VerifyCheck& c : report.checks) {
    nlohmann::ordered_json jc;
    jc["name"] = c.name;
    jc["passed"] = c.passed;
    jc["measured"] = c.measured;
    jc["tolerance"] = c.tolerance;
    jc["slack"] = c.slack;
    jc["detail"] = c.detail;
    j["checks"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

}  // namespace cutofflab
