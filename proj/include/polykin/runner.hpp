#ifndef POLYKIN_RUNNER_HPP
#define POLYKIN_RUNNER_HPP

#include <iosfwd>
#include <string>

#include "polykin/config.hpp"

namespace polykin {

// Diagnostic tolerances the runner enforces; they are pinned here and echoed
// into summary.json so every artifact records the gate it was held to.
struct RunTolerances {
  double entropy_rel = 1e-10;      // per-step dH <= entropy_rel * max(1, |H|)
  double mass_rel = 1e-12;         // species mass drift beyond this trips the run
  double chu_gap = 1e-8;           // full-vs-reduced moment gap bound
  double closure_residual = 1e-12; // sampled energy-balance residual bound
};

struct RunnerOptions {
  std::string out_dir;        // artifacts (moments.csv, summary.json); empty = no files
  int threads = 1;
  bool second_order = false;  // minmod-limited reconstruction in transport runs
  bool strict_h = false;      // abort at the first per-step entropy increase
                              // beyond tol.entropy_rel and exit nonzero; off by
                              // default because the model's dissipation
                              // guarantee concerns the collision-term
                              // production, not the per-step change of the
                              // time-discretized H report, so a strict gate
                              // can abort structurally sound runs
  RunTolerances tol;
};

// Exit codes: 0 = clean, 1 = an invariant tripped (mass drift, internal
// cross-temperature audit failure, moment-gap overflow, or — only under
// strict_h — a per-step entropy increase beyond tolerance), 3 = integration
// failure (partial CSV is retained).  Entropy diagnostics (max per-step dH,
// violating-step count) are always reported in the summary regardless of
// strict_h.  Config/usage problems are reported by the CLI as exit 2 before a
// runner is entered.
struct RunOutcome {
  int exit_code = 0;
  std::string status;        // "ok" | "invariant-violation" | "run-error"
  std::string headline;      // one-line result for terminal output
  std::string summary_json;  // summary document (also written to out_dir/summary.json)
};

// Space-homogeneous relaxation of the full kinetic system.  CSV rows carry
// instantaneous moments, relaxation temperatures, entropy, and conservation
// drifts; the summary records the final distance from global equilibrium.
RunOutcome run_relax(const RunConfig& config, const RunnerOptions& opts);

// 1-D finite-volume transport of the reduced system with per-cell relaxation.
// CSV rows carry density-weighted domain aggregates; entropy columns are not
// defined for the reduced field and hold nan.
RunOutcome run_transport1d(const RunConfig& config, const RunnerOptions& opts);

// Integrates the same initial state through the full phase-space dynamics and
// through the reduced dynamics with shared time steps, and reports the
// largest macroscopic gap (no CSV).
RunOutcome run_chu_compare(const RunConfig& config, const RunnerOptions& opts);

// Prints the admissibility report for the configured mixture: the admissible
// delta interval, the gamma bound, the energy-balance residual of the
// configured initial state and of a seeded random sweep of admissible states,
// and the entropy-monotonicity precondition flags.
RunOutcome run_validate_closure(const RunConfig& config, const RunnerOptions& opts,
                                std::ostream& out);

}  // namespace polykin

#endif  // POLYKIN_RUNNER_HPP
