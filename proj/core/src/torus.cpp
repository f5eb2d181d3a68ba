#include "cutofflab/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "cutofflab/errors.hpp"
#include "cutofflab/parallel.hpp"

namespace cutofflab {

std::int64_t canonical_rep(std::int64_t v, std::int64_t q) {
  if (q < 2) throw validation_error("invalid modulus: q must be >= 2");
  std::int64_t r = v % q;
  if (r < 0) r += q;
  if (2 * r >= q) r -= q;
  return r;
}

TorusVector canonicalize(std::vector<std::int64_t> v, std::int64_t q) {
  for (auto& x : v) x = canonical_rep(x, q);
  return TorusVector{std::move(v), q};
}

namespace {

std::vector<std::int64_t> negated(const std::vector<std::int64_t>& v,
                                  std::int64_t q) {
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = canonical_rep(-v[i], q);
  return out;
}

}  // namespace

void validate(const IncrementDistribution& mu) {
  if (mu.q < 2) throw validation_error("invalid modulus: q must be >= 2");
  if (mu.m < 1) throw validation_error("dimension m must be >= 1");
  if (mu.support.empty()) throw validation_error("support must be nonempty");

  std::map<std::vector<std::int64_t>, Rational> index;
  Rational total{0, 1};
  for (const auto& [v, p] : mu.support) {
    if (static_cast<int>(v.size()) != mu.m) {
      throw validation_error("support vector dimension mismatch");
    }
    for (std::int64_t x : v) {
      if (canonical_rep(x, mu.q) != x) {
        throw validation_error("support vector not canonical");
      }
      // |g|inf < q/2 keeps the lattice lift of the walk well defined and makes
      // negation an involution on the support.
      if (2 * std::abs(x) >= mu.q) {
        throw validation_error("support vector with |coordinate| >= q/2");
      }
    }
    if (p.num <= 0) throw validation_error("support probability must be positive");
    if (!index.emplace(v, p).second) {
      throw validation_error("duplicate support vector");
    }
    total = add(total, p);
  }
  if (!(total == Rational{1, 1})) {
    throw validation_error("support probabilities must sum to exactly 1, got " +
                           format_rational(total));
  }
  for (const auto& [v, p] : mu.support) {
    const auto it = index.find(negated(v, mu.q));
    if (it == index.end() || !(it->second == p)) {
      throw validation_error(
          "support must be symmetric: missing or mismatched -g partner");
    }
  }
}

double char_fn_generic(const IncrementDistribution& mu,
                       std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != mu.m) {
    throw validation_error("theta dimension mismatch");
  }
  // Fold (g, -g) pairs; the only self-negating canonical vector with
  // |g|inf < q/2 is zero.
  std::map<std::vector<std::int64_t>, std::size_t> seen;
  Kahan acc;
  std::vector<char> consumed(mu.support.size(), 0);
  for (std::size_t i = 0; i < mu.support.size(); ++i) seen.emplace(mu.support[i].v, i);
  for (std::size_t i = 0; i < mu.support.size(); ++i) {
    if (consumed[i]) continue;
    const auto& [v, p] = mu.support[i];
    const auto neg = negated(v, mu.q);
    if (neg == v) {  // zero increment
      consumed[i] = 1;
      acc.add(to_double(p));
      continue;
    }
    const auto it = seen.find(neg);
    if (it == seen.end()) throw validation_error("asymmetric support");
    consumed[i] = 1;
    consumed[it->second] = 1;
    double dot = 0.0;
    for (int k = 0; k < mu.m; ++k) {
      dot += theta[static_cast<std::size_t>(k)] * static_cast<double>(v[static_cast<std::size_t>(k)]);
    }
    acc.add(2.0 * to_double(p) * std::cos(dot));
  }
  return acc.get();
}

MomentSummary moments(const IncrementDistribution& mu) {
  validate(mu);
  MomentSummary out;
  out.mean = Eigen::VectorXd::Zero(mu.m);  // exact: support is symmetric
  out.covariance = Eigen::MatrixXd::Zero(mu.m, mu.m);
  for (const auto& [v, p] : mu.support) {
    const double pd = to_double(p);
    for (int i = 0; i < mu.m; ++i) {
      const double vi = static_cast<double>(v[static_cast<std::size_t>(i)]);
      if (vi == 0.0) continue;
      for (int j = 0; j < mu.m; ++j) {
        const double vj = static_cast<double>(v[static_cast<std::size_t>(j)]);
        if (vj != 0.0) out.covariance(i, j) += pd * vi * vj;
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < mu.m; ++i) {
    lo = std::min(lo, out.covariance(i, i));
    hi = std::max(hi, out.covariance(i, i));
  }
  out.equivariant = (hi - lo) <= 1e-12 * std::max(1.0, hi);
  if (out.equivariant) {
    out.marginal_variance = out.covariance(0, 0);
    out.sigma_sq = static_cast<double>(mu.m) * out.marginal_variance;
  } else {
    out.marginal_variance = std::numeric_limits<double>::quiet_NaN();
    out.sigma_sq = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::string to_json(const IncrementDistribution& mu) {
  nlohmann::json j;
  j["q"] = mu.q;
  j["m"] = mu.m;
  j["support"] = nlohmann::json::array();
  for (const auto& [v, p] : mu.support) {
    j["support"].push_back({{"v", v}, {"p", format_rational(p)}});
  }
  return j.dump(2);
}

IncrementDistribution increments_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(std::string("walk file is not valid JSON: ") + e.what());
  }
  IncrementDistribution mu;
  try {
    mu.q = j.at("q").get<std::int64_t>();
    mu.m = j.at("m").get<int>();
    for (const auto& entry : j.at("support")) {
      SupportEntry s;
      s.v = entry.at("v").get<std::vector<std::int64_t>>();
      s.p = parse_rational(entry.at("p").get<std::string>());
      mu.support.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("walk file schema error: ") + e.what());
  }
  validate(mu);
  return mu;
}

}  // namespace cutofflab
