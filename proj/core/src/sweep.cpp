#include "cutofflab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>

#include <json.hpp>

#include "cutofflab/bounds.hpp"
#include "cutofflab/errors.hpp"
#include "cutofflab/montecarlo.hpp"

namespace cutofflab {

namespace {

WalkSpec make_walk(const ExperimentConfig& config, const InstanceSpec& inst) {
  switch (config.kind) {
    case WalkKind::dg_1xn:
      return make_dg_1xn(inst.n, inst.q);
    case WalkKind::dg_nxn:
      return make_dg_nxn(inst.n, inst.q);
    case WalkKind::srw:
      return make_srw(inst.n, inst.q);
    case WalkKind::custom:
      return make_custom(*config.custom_increments);
  }
  throw validation_error("sweep: unknown walk kind");
}

TheoryMarkers markers_for(const WalkSpec& walk, double epsilon) {
  TheoryMarkers out;
  if (walk.kind != WalkKind::dg_1xn && walk.kind != WalkKind::dg_nxn) {
    return out;
  }
  const TheoremTimes times = theorem_times(walk, epsilon);
  out.alpha = times.alpha;
  out.t_upper = times.t_upper;
  out.t_lower = times.t_lower;
  return out;
}

// First t where the monotone envelope of the profile reaches level, by linear
// interpolation between the bracketing grid points; nullopt when the grid does
// not bracket the crossing.
std::optional<double> crossing(const std::vector<std::pair<double, double>>& profile,
                               double level) {
  double prev_t = 0;
  double prev_d = 0;
  bool have_prev = false;
  double envelope = std::numeric_limits<double>::infinity();
  for (const auto& [t, d_raw] : profile) {
    envelope = std::min(envelope, d_raw);
    const double d = envelope;
    if (have_prev && prev_d > level && d <= level) {
      const double frac = (prev_d - level) / (prev_d - d);
      return prev_t + frac * (t - prev_t);
    }
    prev_t = t;
    prev_d = d;
    have_prev = true;
  }
  return std::nullopt;
}

}  // namespace

std::vector<double> make_grid(const GridSpec& grid, double t_theory) {
  std::vector<double> out;
  switch (grid.kind) {
    case GridKind::linear:
    case GridKind::log: {
      if (grid.points < 1) {
        throw validation_error("grid: points must be >= 1");
      }
      if (!(grid.start >= 0) || !(grid.stop >= grid.start) ||
          !std::isfinite(grid.stop)) {
        throw validation_error("grid: need 0 <= start <= stop < infinity");
      }
      if (grid.kind == GridKind::log && !(grid.start > 0)) {
        throw validation_error("grid: log spacing needs start > 0");
      }
      out.reserve(static_cast<std::size_t>(grid.points));
      for (int i = 0; i < grid.points; ++i) {
        const double frac =
            grid.points == 1
                ? 0.0
                : static_cast<double>(i) / static_cast<double>(grid.points - 1);
        if (grid.kind == GridKind::linear) {
          out.push_back(grid.start + frac * (grid.stop - grid.start));
        } else {
          out.push_back(std::exp(std::log(grid.start) +
                                 frac * (std::log(grid.stop) - std::log(grid.start))));
        }
      }
      return out;
    }
    case GridKind::c_multiples: {
      if (grid.c_values.empty()) {
        throw validation_error("grid: c_values must be nonempty");
      }
      if (!(t_theory > 0) || !std::isfinite(t_theory)) {
        throw validation_error(
            "grid: c-multiples need a walk family with a theory time");
      }
      out.reserve(grid.c_values.size());
      for (const double c : grid.c_values) {
        if (!(c > 0) || !std::isfinite(c)) {
          throw validation_error("grid: c values must be positive and finite");
        }
        out.push_back(c * t_theory);
      }
      return out;
    }
  }
  throw validation_error("grid: unknown kind");
}

CutoffReport run_sweep(const ExperimentConfig& config) {
  if (config.kind == WalkKind::custom) {
    if (!config.custom_increments.has_value()) {
      throw validation_error("sweep: custom walks need an increment distribution");
    }
  } else if (config.custom_increments.has_value()) {
    throw validation_error("sweep: increment file is only valid for custom walks");
  }
  std::vector<InstanceSpec> instances = config.instances;
  if (config.kind == WalkKind::custom && instances.empty()) {
    instances.push_back(InstanceSpec{});  // the file fixes the single instance
  }
  if (instances.empty()) {
    throw validation_error("sweep: at least one instance is required");
  }
  if (config.mc_samples < 0) {
    throw validation_error("sweep: mc_samples must be >= 0");
  }

  CutoffReport report;
  std::uint64_t row_ordinal = 0;
  for (const InstanceSpec& inst : instances) {
    const WalkSpec walk = make_walk(config, inst);
    InstanceSummary summary;
    summary.n = walk.n;
    summary.q = walk.q;
    summary.markers = markers_for(walk, config.epsilon);
    const double t_theory = summary.markers.t_upper.value_or(
        std::numeric_limits<double>::quiet_NaN());
    const std::vector<double> times = make_grid(config.grid, t_theory);

    // One evaluator per instance: the spectrum buffer and transform plan are
    // reused across the whole grid.  A budget refusal downgrades the instance
    // to bound-only rows instead of failing the sweep.
    std::unique_ptr<DenseTvEvaluator> evaluator;
    if (config.want_exact) {
      try {
        evaluator = std::make_unique<DenseTvEvaluator>(walk, config.spectral);
      } catch (const budget_error&) {
        evaluator = nullptr;
      }
    }

    std::vector<std::pair<double, double>> profile;
    for (const double t : times) {
      SweepRow row;
      row.n = walk.n;
      row.q = walk.q;
      row.t = t;
      if (summary.markers.t_upper.has_value()) {
        row.c = t / *summary.markers.t_upper;
      }
      if (evaluator != nullptr) {
        const DenseTvEvaluator::Result res = evaluator->evaluate(t);
        row.l2_bound_sq = res.l2_bound_sq;
        row.exact_tv = res.tv;
        profile.emplace_back(t, res.tv);
      } else {
        row.bound_only = config.want_exact;
        row.l2_bound_sq = walk.kind == WalkKind::srw
                              ? l2_bound_srw_product(walk, t)
                              : l2_bound(walk, t, config.spectral);
      }
      row.l2_tv_bound = 0.5 * std::sqrt(std::max(0.0, row.l2_bound_sq));
      if (config.mc_samples > 0) {
        row.mc_lower_bound = mc_lower_bound(walk, t, config.mc_samples,
                                            config.seed + row_ordinal,
                                            config.spectral);
      }
      ++row_ordinal;
      report.rows.push_back(std::move(row));
    }

    if (!profile.empty()) {
      summary.t90 = crossing(profile, 0.9);
      summary.t50 = crossing(profile, 0.5);
      summary.t10 = crossing(profile, 0.1);
      if (summary.t90 && summary.t10) {
        summary.width = *summary.t10 - *summary.t90;
        if (summary.t50 && *summary.t50 > 0) {
          summary.norm_width = *summary.width / *summary.t50;
        }
      }
      if (summary.markers.t_upper.has_value()) {
        summary.d_at_upper = evaluator->evaluate(*summary.markers.t_upper).tv;
      }
    }
    report.instances.push_back(std::move(summary));
  }

  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     if (a.n != b.n) return a.n < b.n;
                     return a.t < b.t;
                   });
  return report;
}

std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

namespace {

constexpr const char* kCsvSchema =
    "# cutofflab sweep schema v1: n,q,t,c,l2_tv_bound,exact_tv,mc_lower_bound,"
    "bound_only; empty field = not computed";

std::string opt_field(const std::optional<double>& v) {
  return v.has_value() ? format_g17(*v) : std::string();
}

std::string opt_comment(const std::optional<double>& v) {
  return v.has_value() ? format_g17(*v) : std::string("na");
}

}  // namespace

void write_csv(const CutoffReport& report, std::ostream& out) {
  out << kCsvSchema << "\n";
  for (const InstanceSummary& s : report.instances) {
    out << "# instance n=" << s.n << " q=" << s.q
        << " alpha=" << opt_comment(s.markers.alpha)
        << " t_upper=" << opt_comment(s.markers.t_upper)
        << " t_lower=" << opt_comment(s.markers.t_lower)
        << " t90=" << opt_comment(s.t90) << " t50=" << opt_comment(s.t50)
        << " t10=" << opt_comment(s.t10) << " width=" << opt_comment(s.width)
        << " norm_width=" << opt_comment(s.norm_width)
        << " d_at_upper=" << opt_comment(s.d_at_upper) << "\n";
  }
  out << "n,q,t,c,l2_tv_bound,exact_tv,mc_lower_bound,bound_only\n";
  for (const SweepRow& r : report.rows) {
    out << r.n << "," << r.q << "," << format_g17(r.t) << "," << opt_field(r.c)
        << "," << format_g17(r.l2_tv_bound) << "," << opt_field(r.exact_tv)
        << "," << opt_field(r.mc_lower_bound) << "," << (r.bound_only ? 1 : 0)
        << "\n";
  }
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

}  // namespace

void write_json(const CutoffReport& report, std::ostream& out) {
  nlohmann::ordered_json j;
  j["schema"] = "cutofflab-sweep-v1";
  j["instances"] = nlohmann::ordered_json::array();
  for (const InstanceSummary& s : report.instances) {
    nlohmann::ordered_json js;
    js["n"] = s.n;
    js["q"] = s.q;
    js["alpha"] = opt_json(s.markers.alpha);
    js["t_upper"] = opt_json(s.markers.t_upper);
    js["t_lower"] = opt_json(s.markers.t_lower);
    js["t90"] = opt_json(s.t90);
    js["t50"] = opt_json(s.t50);
    js["t10"] = opt_json(s.t10);
    js["width"] = opt_json(s.width);
    js["norm_width"] = opt_json(s.norm_width);
    js["d_at_upper"] = opt_json(s.d_at_upper);
    j["instances"].push_back(std::move(js));
  }
  j["rows"] = nlohmann::ordered_json::array();
  for (const SweepRow& r : report.rows) {
    nlohmann::ordered_json jr;
    jr["n"] = r.n;
    jr["q"] = r.q;
    jr["t"] = r.t;
    jr["c"] = opt_json(r.c);
    jr["l2_bound_sq"] = r.l2_bound_sq;
    jr["l2_tv_bound"] = r.l2_tv_bound;
    jr["exact_tv"] = opt_json(r.exact_tv);
    jr["mc_lower_bound"] = opt_json(r.mc_lower_bound);
    jr["bound_only"] = r.bound_only;
    j["rows"].push_back(std::move(jr));
  }
  out << j.dump(2) << "\n";
}

WalkKind kind_from_string(const std::string& s) {
  if (s == "dg_1xn" || s == "dg1xn") return WalkKind::dg_1xn;
  if (s == "dg_nxn" || s == "dgnxn") return WalkKind::dg_nxn;
  if (s == "srw") return WalkKind::srw;
  if (s == "custom") return WalkKind::custom;
  throw validation_error("config: unknown walk kind '" + s + "'");
}

GridKind grid_kind_from_string(const std::string& s) {
  if (s == "linear") return GridKind::linear;
  if (s == "log") return GridKind::log;
  if (s == "c_multiples") return GridKind::c_multiples;
  throw validation_error("config: unknown grid kind '" + s + "'");
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw validation_error(std::string("config: unknown key '") + item.key() +
                             "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) throw validation_error("config: root must be an object");
    reject_unknown_keys(j,
                        {"walk", "grid", "epsilon", "exact", "mc_samples",
                         "seed", "threads", "float32", "dense_budget",
                         "enum_budget", "output", "format"},
                        "the config root");
    ExperimentConfig config;

    const nlohmann::json& walk = j.at("walk");
    reject_unknown_keys(walk, {"kind", "instances", "file"}, "walk");
    config.kind = kind_from_string(walk.at("kind").get<std::string>());
    if (walk.contains("instances")) {
      for (const auto& inst : walk.at("instances")) {
        reject_unknown_keys(inst, {"n", "q"}, "an instance");
        InstanceSpec spec;
        spec.n = inst.at("n").get<int>();
        spec.q = inst.at("q").get<std::int64_t>();
        config.instances.push_back(spec);
      }
    }
    // walk.file (custom increments) is loaded by the CLI layer, which owns
    // file access; here its presence is merely allowed.

    const nlohmann::json& grid = j.at("grid");
    reject_unknown_keys(grid, {"kind", "start", "stop", "points", "c_values"},
                        "grid");
    config.grid.kind = grid_kind_from_string(grid.at("kind").get<std::string>());
    if (config.grid.kind == GridKind::c_multiples) {
      config.grid.c_values =
          grid.at("c_values").get<std::vector<double>>();
    } else {
      config.grid.start = grid.at("start").get<double>();
      config.grid.stop = grid.at("stop").get<double>();
      config.grid.points = grid.at("points").get<int>();
    }

    if (j.contains("epsilon")) config.epsilon = j.at("epsilon").get<double>();
    if (j.contains("exact")) config.want_exact = j.at("exact").get<bool>();
    if (j.contains("mc_samples")) {
      config.mc_samples = j.at("mc_samples").get<std::int64_t>();
    }
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) {
      config.spectral.threads = j.at("threads").get<int>();
    }
    if (j.contains("float32")) {
      config.spectral.use_float32 = j.at("float32").get<bool>();
    }
    if (j.contains("dense_budget")) {
      config.spectral.dense_budget = j.at("dense_budget").get<std::int64_t>();
    }
    if (j.contains("enum_budget")) {
      config.spectral.enum_budget = j.at("enum_budget").get<std::int64_t>();
    }
    if (j.contains("output")) {
      config.output_path = j.at("output").get<std::string>();
    }
    if (j.contains("format")) {
      const std::string f = j.at("format").get<std::string>();
      if (f == "csv") {
        config.format = ExperimentConfig::Format::csv;
      } else if (f == "json") {
        config.format = ExperimentConfig::Format::json;
      } else {
        throw validation_error("config: format must be 'csv' or 'json'");
      }
    }
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }
}

}  // namespace cutofflab
