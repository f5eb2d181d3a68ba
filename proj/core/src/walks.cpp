#include "cutofflab/walks.hpp"

#include <cmath>
#include <string>

#include "cutofflab/errors.hpp"
#include "cutofflab/parallel.hpp"

namespace cutofflab {

const char* to_string(WalkKind kind) {
  switch (kind) {
    case WalkKind::dg_1xn: return "dg1xn";
    case WalkKind::dg_nxn: return "dgnxn";
    case WalkKind::srw: return "srw";
    case WalkKind::custom: return "custom";
  }
  return "?";
}

namespace {

void require_params(int n, int n_min, std::int64_t q, const char* what) {
  if (n < n_min) {
    throw validation_error(std::string(what) + ": n must be >= " +
                           std::to_string(n_min));
  }
  if (q < 3) throw validation_error(std::string(what) + ": q must be >= 3");
}

int max_l1(const IncrementDistribution& mu) {
  std::int64_t best = 0;
  for (const auto& [v, p] : mu.support) {
    std::int64_t norm = 0;
    for (std::int64_t x : v) norm += std::abs(x);
    best = std::max(best, norm);
  }
  return static_cast<int>(best);
}

WalkSpec finish(WalkKind kind, int n, std::int64_t q, double sigma_sq,
                IncrementDistribution mu) {
  validate(mu);
  WalkSpec w;
  w.kind = kind;
  w.n = n;
  w.q = q;
  w.m = mu.m;
  w.r = max_l1(mu);
  w.sigma_sq = sigma_sq;
  w.increments = std::move(mu);
  return w;
}

}  // namespace

WalkSpec make_dg_1xn(int n, std::int64_t q) {
  require_params(n, 2, q, "dg1xn");
  IncrementDistribution mu;
  mu.q = q;
  mu.m = n - 1;
  const Rational p = make_rational(1, static_cast<std::int64_t>(n) * (n - 1));
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      std::vector<std::int64_t> v(static_cast<std::size_t>(n - 1), 0);
      if (i <= n - 1) v[static_cast<std::size_t>(i - 1)] += 1;
      if (j <= n - 1) v[static_cast<std::size_t>(j - 1)] -= 1;
      mu.support.push_back({std::move(v), p});
    }
  }
  const double nd = n;
  return finish(WalkKind::dg_1xn, n, q, 2.0 * (nd - 1.0) / nd, std::move(mu));
}

WalkSpec make_dg_nxn(int n, std::int64_t q) {
  require_params(n, 2, q, "dgnxn");
  IncrementDistribution mu;
  mu.q = q;
  mu.m = (n - 1) * (n - 1);
  const std::int64_t pairs = static_cast<std::int64_t>(n) * (n - 1) / 2;
  const Rational p = make_rational(1, 2 * pairs * pairs);
  const auto at = [n](int row, int col) {
    return static_cast<std::size_t>((row - 1) * (n - 1) + (col - 1));
  };
  for (int i = 1; i <= n; ++i) {
    for (int i2 = i + 1; i2 <= n; ++i2) {
      for (int j = 1; j <= n; ++j) {
        for (int j2 = j + 1; j2 <= n; ++j2) {
          for (int sign : {+1, -1}) {
            std::vector<std::int64_t> v(
                static_cast<std::size_t>((n - 1) * (n - 1)), 0);
            if (i <= n - 1 && j <= n - 1) v[at(i, j)] += sign;
            if (i <= n - 1 && j2 <= n - 1) v[at(i, j2)] -= sign;
            if (i2 <= n - 1 && j <= n - 1) v[at(i2, j)] -= sign;
            if (i2 <= n - 1 && j2 <= n - 1) v[at(i2, j2)] += sign;
            mu.support.push_back({std::move(v), p});
          }
        }
      }
    }
  }
  const double nd = n;
  return finish(WalkKind::dg_nxn, n, q, 4.0 * (nd - 1.0) * (nd - 1.0) / (nd * nd),
                std::move(mu));
}

WalkSpec make_srw(int n, std::int64_t q) {
  require_params(n, 1, q, "srw");
  IncrementDistribution mu;
  mu.q = q;
  mu.m = n;
  const Rational p = make_rational(1, 2 * static_cast<std::int64_t>(n));
  for (int k = 0; k < n; ++k) {
    for (int sign : {+1, -1}) {
      std::vector<std::int64_t> v(static_cast<std::size_t>(n), 0);
      v[static_cast<std::size_t>(k)] = sign;
      mu.support.push_back({std::move(v), p});
    }
  }
  return finish(WalkKind::srw, n, q, 1.0, std::move(mu));
}

WalkSpec make_custom(IncrementDistribution mu) {
  validate(mu);
  const MomentSummary mom = moments(mu);
  WalkSpec w;
  w.kind = WalkKind::custom;
  w.n = 0;
  w.q = mu.q;
  w.m = mu.m;
  w.r = max_l1(mu);
  w.sigma_sq = mom.sigma_sq;  // NaN when marginals are not equivariant
  w.increments = std::move(mu);
  return w;
}

double char_fn_closed(const WalkSpec& walk, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != walk.m) {
    throw validation_error("theta dimension mismatch");
  }
  switch (walk.kind) {
    case WalkKind::dg_1xn: {
      const int n = walk.n;
      Kahan acc;
      for (int j = 0; j < n - 1; ++j) acc.add(std::cos(theta[static_cast<std::size_t>(j)]));
      for (int j = 1; j < n - 1; ++j) {
        for (int k = 0; k < j; ++k) {
          acc.add(std::cos(theta[static_cast<std::size_t>(j)] - theta[static_cast<std::size_t>(k)]));
        }
      }
      return acc.get() / (static_cast<double>(n) * (n - 1) / 2.0);
    }
    case WalkKind::dg_nxn: {
      const int n = walk.n;
      const int d = n - 1;
      const auto th = [&](int row, int col) {
        return theta[static_cast<std::size_t>(row * d + col)];
      };
      Kahan acc;
      // Both index pairs interior: full 4-corner phase.
      for (int i = 1; i < d; ++i)
        for (int l = 0; l < i; ++l)
          for (int j = 1; j < d; ++j)
            for (int k = 0; k < j; ++k)
              acc.add(std::cos(th(i, j) - th(i, k) - th(l, j) + th(l, k)));
      // Column pair involves the dropped column: row differences.
      for (int i = 1; i < d; ++i)
        for (int l = 0; l < i; ++l)
          for (int j = 0; j < d; ++j) acc.add(std::cos(th(i, j) - th(l, j)));
      // Row pair involves the dropped row: column differences.
      for (int j = 1; j < d; ++j)
        for (int k = 0; k < j; ++k)
          for (int i = 0; i < d; ++i) acc.add(std::cos(th(i, j) - th(i, k)));
      // Both involve dropped row and column: plain entries.
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc.add(std::cos(th(i, j)));
      const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
      return acc.get() / (pairs * pairs);
    }
    case WalkKind::srw: {
      Kahan acc;
      for (int k = 0; k < walk.m; ++k) acc.add(std::cos(theta[static_cast<std::size_t>(k)]));
      return acc.get() / static_cast<double>(walk.m);
    }
    case WalkKind::custom:
      throw validation_error("unsupported closed form for custom walk");
  }
  throw validation_error("unknown walk kind");
}

double char_fn(const WalkSpec& walk, std::span<const double> theta) {
  if (walk.kind == WalkKind::custom) return char_fn_generic(walk.increments, theta);
  return char_fn_closed(walk, theta);
}

CorrelationModel correlation_model(const WalkSpec& walk) {
  CorrelationModel model;
  const int m = walk.m;
  switch (walk.kind) {
    case WalkKind::dg_1xn: {
      const double nd = walk.n;
      const double off_gamma = -1.0 / (nd - 1.0);
      model.gamma = Eigen::MatrixXd::Constant(m, m, off_gamma);
      model.gamma.diagonal().setConstant(1.0);
      // Psi = Gamma^{-1} = ((n-1)/n) (I + J).
      const double base = (nd - 1.0) / nd;
      model.psi = Eigen::MatrixXd::Constant(m, m, base);
      model.psi.diagonal().setConstant(2.0 * base);
      model.closed_form = true;
      break;
    }
    case WalkKind::dg_nxn: {
      const double nd = walk.n;
      const int d = walk.n - 1;
      model.gamma.resize(m, m);
      model.psi.resize(m, m);
      const double s = (nd - 1.0) * (nd - 1.0) / (nd * nd);
      for (int a = 0; a < m; ++a) {
        const int ra = a / d, ca = a % d;
        for (int b = 0; b < m; ++b) {
          const int rb = b / d, cb = b % d;
          if (a == b) {
            model.gamma(a, b) = 1.0;
            model.psi(a, b) = 4.0 * s;
          } else if ((ra == rb) != (ca == cb)) {  // share a row xor a column
            model.gamma(a, b) = -1.0 / (nd - 1.0);
            model.psi(a, b) = 2.0 * s;
          } else {  // disjoint row and column
            model.gamma(a, b) = 1.0 / ((nd - 1.0) * (nd - 1.0));
            model.psi(a, b) = s;
          }
        }
      }
      model.closed_form = true;
      break;
    }
    case WalkKind::srw:
    case WalkKind::custom: {
      const MomentSummary mom = moments(walk.increments);
      model.gamma.resize(m, m);
      for (int i = 0; i < m; ++i) {
        if (!(mom.covariance(i, i) > 0.0)) {
          throw validation_error(
              "singular correlation: coordinate with zero marginal variance");
        }
      }
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          model.gamma(i, j) = mom.covariance(i, j) /
                              std::sqrt(mom.covariance(i, i) * mom.covariance(j, j));
        }
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(model.gamma);
      if (!lu.isInvertible()) {
        throw validation_error("singular correlation: Gamma is not invertible");
      }
      model.psi = lu.inverse();
      model.closed_form = false;
      break;
    }
  }
  return model;
}

double gamma_psi_residual(const CorrelationModel& model) {
  const Eigen::MatrixXd prod = model.gamma * model.psi;
  const Eigen::MatrixXd eye =
      Eigen::MatrixXd::Identity(prod.rows(), prod.cols());
  return (prod - eye).cwiseAbs().maxCoeff();
}

}  // namespace cutofflab
