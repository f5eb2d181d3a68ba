#pragma once

// Self-contained verification suite: re-checks the library's documented
// invariants at a chosen scale and reports a named slack for every check.
//
// Slack convention: every check is normalized to "measured <= tolerance";
// slack = tolerance - measured, so a passing check has slack >= 0.  Checks of
// the form "margin >= -tol" are encoded with measured = -margin.

#include <string>
#include <vector>

#include "cutofflab/spectral.hpp"

namespace cutofflab {

enum class VerifyLevel { quick, full };

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double measured = 0;
  double tolerance = 0;
  double slack = 0;      // tolerance - measured
  std::string detail;    // location / worst case; empty when unremarkable
};

// Negative-control hook: adds delta to entry (i, j) of every closed-form
// precision matrix before the identity-residual check, which must then fail
// and name the perturbed location.
struct TamperHook {
  bool enabled = false;
  int i = 0;
  int j = 0;
  double delta = 0;
};

struct VerifyReport {
  VerifyLevel level = VerifyLevel::quick;
  std::vector<VerifyCheck> checks;
  bool all_passed = false;
  double elapsed_seconds = 0;   // reported on the console, never in data files
};

VerifyReport run_verification_suite(VerifyLevel level,
                                    const TamperHook& tamper = {},
                                    const SpectralOptions& opts = {});

// Deterministic JSON summary (excludes wall-clock fields), 2-space indented.
std::string verify_report_to_json(const VerifyReport& report);

}  // namespace cutofflab
