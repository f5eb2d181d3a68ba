#pragma once

// Experiment harness: evaluates the distance-to-stationarity profile of one or
// more walk instances over a time grid and reports cutoff diagnostics
// (theory-marker times, profile widths, normalized widths).
//
// Reproducibility contract: for a fixed config and seed the report, and hence
// the serialized CSV/JSON, is byte-identical across runs and thread counts.
// Data files never contain timestamps.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cutofflab/spectral.hpp"
#include "cutofflab/torus.hpp"
#include "cutofflab/walks.hpp"

namespace cutofflab {

enum class GridKind { linear, log, c_multiples };

struct GridSpec {
  GridKind kind = GridKind::linear;
  double start = 0;                // linear / log grids
  double stop = 0;
  int points = 0;
  std::vector<double> c_values;    // c_multiples grid: t = c * t_theory
};

// Times for one instance; t_theory is required (finite, > 0) only for
// c_multiples grids.
std::vector<double> make_grid(const GridSpec& grid, double t_theory);

struct InstanceSpec {
  int n = 0;
  std::int64_t q = 0;
};

struct ExperimentConfig {
  WalkKind kind = WalkKind::dg_1xn;
  std::vector<InstanceSpec> instances;                  // nonempty
  std::optional<IncrementDistribution> custom_increments;  // kind == custom
  GridSpec grid;
  double epsilon = 0.25;       // theory markers and c = t / t_theory
  bool want_exact = true;
  std::int64_t mc_samples = 0;  // 0 = omit the Monte-Carlo column
  std::uint64_t seed = 1;
  SpectralOptions spectral;
  std::string output_path;      // empty = stdout (CLI concern)
  enum class Format { csv, json } format = Format::csv;
};

struct SweepRow {
  int n = 0;
  std::int64_t q = 0;
  double t = 0;
  std::optional<double> c;            // t / t_theory when markers exist
  double l2_bound_sq = 0;
  double l2_tv_bound = 0;
  std::optional<double> exact_tv;
  std::optional<double> mc_lower_bound;
  bool bound_only = false;            // exact TV skipped for budget reasons
};

struct TheoryMarkers {
  std::optional<double> alpha;
  std::optional<double> t_upper;
  std::optional<double> t_lower;
};

struct InstanceSummary {
  int n = 0;
  std::int64_t q = 0;
  TheoryMarkers markers;
  std::optional<double> t90;          // first t with d(t) <= 0.9 (interpolated)
  std::optional<double> t50;
  std::optional<double> t10;
  std::optional<double> width;        // t10 - t90
  std::optional<double> norm_width;   // width / t50
  std::optional<double> d_at_upper;   // exact d at markers.t_upper
};

struct CutoffReport {
  std::vector<SweepRow> rows;               // sorted by (n, t)
  std::vector<InstanceSummary> instances;   // config order
};

// Evaluates the l2 bound on every grid point, the exact TV where the state
// space fits the dense budget (otherwise rows are marked bound_only), and the
// Monte-Carlo lower bound when mc_samples > 0.  Profile times t90/t50/t10 are
// read off the exact TV column by monotone piecewise-linear interpolation.
CutoffReport run_sweep(const ExperimentConfig& config);

// 17-significant-digit, locale-independent rendering used by every data file.
std::string format_g17(double x);

// CSV layout: one `# schema` comment, one `# instance` comment per instance
// summary, a header row, then data rows.  Missing optional fields are empty.
void write_csv(const CutoffReport& report, std::ostream& out);
void write_json(const CutoffReport& report, std::ostream& out);

// Parses the published JSON config schema (see README).  Unknown keys are
// rejected; malformed documents raise validation_error.
ExperimentConfig config_from_json(const std::string& text);

// Name parsers shared by the config loader and the CLI.  Walk kinds accept
// both the underscored ("dg_1xn") and compact ("dg1xn") spellings; unknown
// names raise validation_error.
WalkKind kind_from_string(const std::string& s);
GridKind grid_kind_from_string(const std::string& s);

}  // namespace cutofflab
