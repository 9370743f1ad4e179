#include "polykin/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "polykin/chu.hpp"

namespace polykin {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kValidateSamples = 1000;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double elapsed_s(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double offdiag_norm(const Eigen::MatrixXd& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

const char* axis_name(int a) {
  static const char* names[3] = {"x", "y", "z"};
  return names[a];
}

// --- CSV sink ----------------------------------------------------------------

// Column order is fixed per dimension d:
//   t,
//   per species k = 1, 2:
//     n{k}, u{k}_x[, u{k}_y[, u{k}_z]], t_tr{k}, t_rot{k}, lambda{k},
//     theta{k}, p_offdiag{k}, clipped{k},
//   entropy, dh_step, mass_drift1, mass_drift2, momentum_drift, energy_drift.
std::vector<std::string> csv_columns(int d) {
  std::vector<std::string> cols = {"t"};
  for (int k = 1; k <= 2; ++k) {
    const std::string s = std::to_string(k);
    cols.push_back("n" + s);
    for (int a = 0; a < d; ++a) cols.push_back("u" + s + "_" + axis_name(a));
    cols.push_back("t_tr" + s);
    cols.push_back("t_rot" + s);
    cols.push_back("lambda" + s);
    cols.push_back("theta" + s);
    cols.push_back("p_offdiag" + s);
    cols.push_back("clipped" + s);
  }
  for (const char* c : {"entropy", "dh_step", "mass_drift1", "mass_drift2", "momentum_drift",
                        "energy_drift"})
    cols.emplace_back(c);
  return cols;
}

// Append-only writer, flushed after every row so a killed run leaves a
// readable prefix.
class CsvSink {
 public:
  void open(const std::string& path, int d) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    out_ << "# moments-csv v1\n";
    const std::vector<std::string> cols = csv_columns(d);
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
    out_.flush();
  }

  void row(const std::vector<double>& vals) {
    if (!out_.is_open()) return;
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << fmt17(vals[i]);
    out_ << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

// One species' share of a CSV row.
struct SpeciesRow {
  double n = 0.0;
  Eigen::VectorXd u;
  double t_tr = 0.0;
  double t_rot = 0.0;
  double lambda = 0.0;
  double theta = 0.0;
  double p_offdiag = 0.0;
  double clipped = 0.0;
};

struct GlobalRow {
  double entropy = std::numeric_limits<double>::quiet_NaN();
  double dh_step = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 2> mass_drift{};
  double momentum_drift = 0.0;
  double energy_drift = 0.0;
};

std::vector<double> assemble_row(double t, int d, const std::array<SpeciesRow, 2>& sp,
                                 const GlobalRow& glob) {
  std::vector<double> row;
  row.push_back(t);
  for (int k = 0; k < 2; ++k) {
    row.push_back(sp[k].n);
    for (int a = 0; a < d; ++a) row.push_back(sp[k].u.size() > a ? sp[k].u[a] : 0.0);
    row.push_back(sp[k].t_tr);
    row.push_back(sp[k].t_rot);
    row.push_back(sp[k].lambda);
    row.push_back(sp[k].theta);
    row.push_back(sp[k].p_offdiag);
    row.push_back(sp[k].clipped);
  }
  row.push_back(glob.entropy);
  row.push_back(glob.dh_step);
  row.push_back(glob.mass_drift[0]);
  row.push_back(glob.mass_drift[1]);
  row.push_back(glob.momentum_drift);
  row.push_back(glob.energy_drift);
  return row;
}

// --- shared summary plumbing ----------------------------------------------------

json base_summary(const RunConfig& cfg, const std::string& mode, const RunnerOptions& opts) {
  json j;
  j["schema"] = "polykin-summary v1";
  j["scenario"] = cfg.scenario;
  j["mode"] = mode;
  j["d"] = cfg.mix.d;
  if (cfg.mix.d != 3)
    j["dimension_note"] = "reduced-dimension configuration (d = " + std::to_string(cfg.mix.d) +
                          "); the model is stated for d = 3";
  j["t_end"] = cfg.time.t_end;
  j["seed"] = cfg.seed;
  j["threads"] = opts.threads;
  j["second_order"] = opts.second_order;
  j["strict_h"] = opts.strict_h;
  j["tolerances"] = {{"entropy_rel", opts.tol.entropy_rel},
                     {"mass_rel", opts.tol.mass_rel},
                     {"chu_gap", opts.tol.chu_gap},
                     {"closure_residual", opts.tol.closure_residual}};
  return j;
}

void write_summary_file(const RunnerOptions& opts, const json& summary) {
  if (opts.out_dir.empty()) return;
  std::ofstream out(opts.out_dir + "/summary.json", std::ios::binary | std::ios::trunc);
  if (out) out << summary.dump(2) << "\n";
}

// Fills status/exit/summary from the violation list (empty = clean) and
// serializes the summary, writing it to out_dir when one is configured.
void finalize(RunOutcome& out, json& summary, const std::vector<std::string>& violations,
              const RunnerOptions& opts, Clock::time_point start) {
  summary["wall_time_s"] = elapsed_s(start);
  if (out.status != "run-error") {
    out.status = violations.empty() ? "ok" : "invariant-violation";
    out.exit_code = violations.empty() ? 0 : 1;
  }
  summary["status"] = out.status;
  summary["invariant_violations"] = violations;
  out.summary_json = summary.dump(2);
  write_summary_file(opts, summary);
}

bool theta21_applicable(const Mixture& mix) {
  return mix.species[0].dof_internal == 0 && mix.species[1].dof_internal > 0;
}

json audit_json(const Mixture& mix, const Theta21Audit& audit) {
  return {{"applicable", theta21_applicable(mix)},
          {"evaluations", audit.evaluations},
          {"violations", audit.violations}};
}

double rel_drift(double now, double ref) {
  return std::abs(now - ref) / std::max(1e-300, std::abs(ref));
}

// --- space-homogeneous relaxation -----------------------------------------------

std::array<SpeciesRow, 2> relax_species_rows(const Mixture& mix, const EvalContext& ctx,
                                             const std::array<double, 2>& clipped) {
  std::array<SpeciesRow, 2> rows;
  for (int k = 0; k < 2; ++k) {
    SpeciesRow& r = rows[k];
    r.n = ctx.mom[k].n;
    r.u = ctx.mom[k].u;
    r.t_tr = ctx.mom[k].t_tr;
    r.t_rot = ctx.mom[k].t_rot;
    r.lambda = ctx.tt[k].lambda;
    r.theta = mix.species[k].dof_internal > 0 ? ctx.tt[k].theta : 0.0;
    r.p_offdiag = offdiag_norm(ctx.mom[k].pressure / ctx.mom[k].n);
    r.clipped = clipped[k];
  }
  return rows;
}

}  // namespace

RunOutcome run_relax(const RunConfig& cfg, const RunnerOptions& opts) {
  const auto start = Clock::now();
  const Mixture& mix = cfg.mix;
  RunOutcome out;
  json summary = base_summary(cfg, "relax", opts);
  std::vector<std::string> violations;
  CsvSink csv;
  try {
    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      csv.open(opts.out_dir + "/moments.csv", mix.d);
      summary["csv"] = "moments.csv";
    }

    const auto grids = build_grids(cfg);
    SystemState state = build_full_state(cfg, grids, opts.threads);
    EvalContext ctx = evaluate_state(mix, state, opts.threads);

    const PreconditionReport precond = entropy_preconditions(mix, ctx);
    const ConservedTotals totals0 = conserved_totals(mix, ctx);
    const std::array<double, 2> n0 = {ctx.mom[0].n, ctx.mom[1].n};
    const double mom_scale = std::max(1.0, totals0.momentum.lpNorm<Eigen::Infinity>());

    double h_prev = compute_entropy(mix, state, ctx, opts.threads).total;
    const double h0 = h_prev;

    Theta21Audit audit;
    StepOptions sopts;
    sopts.threads = opts.threads;
    sopts.theta21 = &audit;

    std::array<double, 2> clipped = {0.0, 0.0};
    long long steps = 0, last_row_step = 0, entropy_violations = 0;
    constexpr double kNoStep = -std::numeric_limits<double>::infinity();
    double max_dh = kNoStep, max_dh_rel = kNoStep, stride_dh = kNoStep;
    // Collision-term dissipation, sampled at output rows (once per stride,
    // not per step); non-positive under passing preconditions.
    double max_production = entropy_production(mix, state, ctx, opts.threads).total;
    bool strict_stop = false;

    auto make_global = [&](double h, double dh) {
      GlobalRow g;
      g.entropy = h;
      g.dh_step = dh;
      const ConservedTotals tot = conserved_totals(mix, ctx);
      for (int k = 0; k < 2; ++k) g.mass_drift[k] = rel_drift(ctx.mom[k].n, n0[k]);
      g.momentum_drift = (tot.momentum - totals0.momentum).lpNorm<Eigen::Infinity>() / mom_scale;
      g.energy_drift = rel_drift(tot.energy, totals0.energy);
      return g;
    };
    csv.row(assemble_row(state.time, mix.d, relax_species_rows(mix, ctx, clipped),
                         make_global(h_prev, 0.0)));

    const double t_end = cfg.time.t_end;
    while (state.time < t_end * (1.0 - 1e-12) && !strict_stop) {
      const double dt = std::min(stable_dt(mix, ctx, cfg.time.cfl_relax), t_end - state.time);
      if (!(dt > 0.0)) break;
      const StepReport rep = step_relax(mix, state, dt, sopts);
      clipped[0] += rep.clipped_density[0];
      clipped[1] += rep.clipped_density[1];
      ctx = evaluate_state(mix, state, opts.threads);
      const double h = compute_entropy(mix, state, ctx, opts.threads).total;
      const double dh = h - h_prev;
      max_dh = std::max(max_dh, dh);
      max_dh_rel = std::max(max_dh_rel, dh / std::max(1.0, std::abs(h_prev)));
      stride_dh = std::max(stride_dh, dh);
      if (precond.ok && dh > opts.tol.entropy_rel * std::max(1.0, std::abs(h_prev))) {
        ++entropy_violations;
        if (opts.strict_h) strict_stop = true;
      }
      h_prev = h;
      ++steps;
      if (steps % cfg.time.output_stride == 0 || strict_stop) {
        csv.row(assemble_row(state.time, mix.d, relax_species_rows(mix, ctx, clipped),
                             make_global(h, stride_dh)));
        last_row_step = steps;
        stride_dh = kNoStep;
        max_production =
            std::max(max_production, entropy_production(mix, state, ctx, opts.threads).total);
      }
    }
    if (last_row_step != steps) {
      csv.row(assemble_row(state.time, mix.d, relax_species_rows(mix, ctx, clipped),
                           make_global(h_prev, std::isfinite(stride_dh) ? stride_dh : 0.0)));
    }
    if (!std::isfinite(max_dh)) max_dh = 0.0;
    if (!std::isfinite(max_dh_rel)) max_dh_rel = 0.0;

    const EquilibriumResidual resid = equilibrium_residual(mix, state, ctx, opts.threads);
    const ConservedTotals totals1 = conserved_totals(mix, ctx);
    const std::array<double, 2> mass_drift = {rel_drift(ctx.mom[0].n, n0[0]),
                                              rel_drift(ctx.mom[1].n, n0[1])};

    summary["steps"] = steps;
    summary["t_final"] = state.time;
    summary["entropy"] = {
        {"preconditions_ok", precond.ok},
        {"precondition_notes", precond.violations},
        {"initial", h0},
        {"final", h_prev},
        {"max_dh", max_dh},
        {"max_dh_rel", max_dh_rel},
        {"max_production", max_production},
        {"violating_steps", entropy_violations},
        {"stopped_early", strict_stop}};
    summary["equilibrium_residual"] = {
        {"velocity_gap", resid.velocity_gap},
        {"temperature_spread", resid.temperature_spread},
        {"anisotropy", resid.anisotropy},
        {"maxwellian_distance", resid.maxwellian_distance},
        {"max", resid.max_residual}};
    summary["conservation"] = {
        {"mass_rel", {mass_drift[0], mass_drift[1]}},
        {"momentum_drift",
         (totals1.momentum - totals0.momentum).lpNorm<Eigen::Infinity>() / mom_scale},
        {"energy_rel", rel_drift(totals1.energy, totals0.energy)}};
    summary["clipped_density"] = {clipped[0], clipped[1]};
    summary["theta21_audit"] = audit_json(mix, audit);

    // Per-step entropy increases are counted and reported unconditionally,
    // but they only trip the exit status under --strict-h.  The preconditions
    // guarantee non-positive collision-term production (max_production), not
    // per-step decrease of the H functional itself: H additionally carries a
    // carrier-relaxation remainder, and the integrator contributes O(dt^3)
    // local error; neither is sign-controlled in general, so the strict gate
    // stays opt-in even though observed preconditioned runs are monotone.
    if (opts.strict_h && precond.ok && entropy_violations > 0)
      violations.push_back("entropy increased beyond tolerance on " +
                           std::to_string(entropy_violations) + " step(s)");
    for (int k = 0; k < 2; ++k)
      if (mass_drift[k] > opts.tol.mass_rel)
        violations.push_back("species " + std::to_string(k + 1) + " mass drift " +
                             fmt17(mass_drift[k]) + " exceeds " + fmt17(opts.tol.mass_rel));
    if (audit.violations > 0)
      violations.push_back("internal cross-temperature audit failed on " +
                           std::to_string(audit.violations) + " evaluation(s)");

    out.headline = "relax: steps=" + std::to_string(steps) +
                   " equilibrium_residual=" + fmt17(resid.max_residual) +
                   " max_dh=" + fmt17(max_dh);
  } catch (const std::exception& e) {
    summary["error"] = e.what();
    out.status = "run-error";
    out.exit_code = 3;
    out.headline = std::string("relax failed: ") + e.what();
  }
  finalize(out, summary, violations, opts, start);
  return out;
}

// --- 1-D transport ----------------------------------------------------------------

namespace {

struct DomainTotals {
  std::array<double, 2> number{};     // integral of n_k over the domain
  Eigen::VectorXd momentum;           // integral of sum_k m_k n_k u_k
  double energy = 0.0;                // drift + translational + internal
  std::array<SpeciesRow, 2> agg;      // density-weighted domain averages
};

DomainTotals domain_totals(const Mixture& mix, const SpatialField1D& field, int threads) {
  const int d = mix.d;
  const double dx = field.dx();
  DomainTotals tot;
  tot.momentum = Eigen::VectorXd::Zero(d);
  std::array<Eigen::VectorXd, 2> u_sum;
  std::array<double, 2> t_tr_sum{}, t_rot_sum{}, lambda_sum{}, theta_sum{}, off_sum{};
  for (int k = 0; k < 2; ++k) u_sum[k] = Eigen::VectorXd::Zero(d);

  for (int ix = 0; ix < field.n_cells; ++ix) {
    const std::array<MacroMoments, 2> mom = cell_moments(mix, field, ix, threads);
    for (int k = 0; k < 2; ++k) {
      const SpeciesParams& sp = mix.species[k];
      const MacroMoments& m = mom[k];
      const int l = sp.dof_internal;
      const double w = dx * m.n;
      tot.number[k] += dx * m.n;
      tot.momentum += dx * sp.mass * m.n * m.u;
      tot.energy += dx * (0.5 * sp.mass * m.n * m.u.squaredNorm() + 0.5 * d * m.n * m.t_tr +
                          0.5 * l * m.n * m.t_rot);
      u_sum[k] += w * m.u;
      t_tr_sum[k] += w * m.t_tr;
      t_rot_sum[k] += w * m.t_rot;
      double lam = m.t_tr;
      double theta = 0.0;
      if (l > 0) {
        lam = field.lambda_ten[k][ix].trace() / d;
        theta = m.t_rot - static_cast<double>(d) / l * (lam - m.t_tr);
      }
      lambda_sum[k] += w * lam;
      theta_sum[k] += w * theta;
      off_sum[k] += w * offdiag_norm(m.pressure / m.n);
    }
  }
  for (int k = 0; k < 2; ++k) {
    SpeciesRow& r = tot.agg[k];
    const double w = std::max(tot.number[k], 1e-300);
    r.n = tot.number[k] / (field.x_hi - field.x_lo);
    r.u = u_sum[k] / w;
    r.t_tr = t_tr_sum[k] / w;
    r.t_rot = t_rot_sum[k] / w;
    r.lambda = lambda_sum[k] / w;
    r.theta = theta_sum[k] / w;
    r.p_offdiag = off_sum[k] / w;
  }
  return tot;
}

}  // namespace

RunOutcome run_transport1d(const RunConfig& cfg, const RunnerOptions& opts) {
  const auto start = Clock::now();
  const Mixture& mix = cfg.mix;
  RunOutcome out;
  json summary = base_summary(cfg, "transport1d", opts);
  summary["n_x"] = cfg.grid.n_x;
  summary["boundary"] = to_string(cfg.grid.boundary);
  std::vector<std::string> violations;
  CsvSink csv;
  try {
    if (cfg.grid.n_x < 2)
      throw std::invalid_argument("transport1d needs [grid] n_x >= 2, got " +
                                  std::to_string(cfg.grid.n_x));
    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      csv.open(opts.out_dir + "/moments.csv", mix.d);
      summary["csv"] = "moments.csv";
    }

    const auto grids = build_grids(cfg);
    const std::array<std::shared_ptr<const PhaseGrid>, 2> vel_grids = {
        velocity_grid_of(grids[0]), velocity_grid_of(grids[1])};
    SpatialField1D field = build_field(cfg, vel_grids, opts.threads);

    TransportOptions topts;
    topts.threads = opts.threads;
    topts.second_order = opts.second_order;
    topts.cfl_advection = cfg.time.cfl_adv;
    topts.cfl_relaxation = cfg.time.cfl_relax;

    const DomainTotals totals0 = domain_totals(mix, field, opts.threads);
    const double mom_scale = std::max(1.0, totals0.momentum.lpNorm<Eigen::Infinity>());
    Theta21Audit audit;
    std::array<double, 2> clipped = {0.0, 0.0};
    long long steps = 0, last_row_step = 0;

    auto write_row = [&]() {
      const DomainTotals tot = domain_totals(mix, field, opts.threads);
      std::array<SpeciesRow, 2> rows = tot.agg;
      rows[0].clipped = clipped[0];
      rows[1].clipped = clipped[1];
      GlobalRow g;  // entropy columns stay nan: the reduced field does not
                    // determine the full-distribution entropy
      for (int k = 0; k < 2; ++k) g.mass_drift[k] = rel_drift(tot.number[k], totals0.number[k]);
      g.momentum_drift = (tot.momentum - totals0.momentum).lpNorm<Eigen::Infinity>() / mom_scale;
      g.energy_drift = rel_drift(tot.energy, totals0.energy);
      csv.row(assemble_row(field.time, mix.d, rows, g));
    };
    write_row();

    const double t_end = cfg.time.t_end;
    while (field.time < t_end * (1.0 - 1e-12)) {
      const double dt = std::min(transport_stable_dt(mix, field, topts), t_end - field.time);
      if (!(dt > 0.0)) break;
      const TransportStepReport rep = step_transport(mix, field, dt, topts);
      clipped[0] += rep.clipped_density[0];
      clipped[1] += rep.clipped_density[1];
      audit.evaluations += rep.theta21.evaluations;
      audit.violations += rep.theta21.violations;
      ++steps;
      if (steps % cfg.time.output_stride == 0) {
        write_row();
        last_row_step = steps;
      }
    }
    if (last_row_step != steps) write_row();

    const DomainTotals totals1 = domain_totals(mix, field, opts.threads);
    const std::array<double, 2> mass_drift = {rel_drift(totals1.number[0], totals0.number[0]),
                                              rel_drift(totals1.number[1], totals0.number[1])};
    summary["steps"] = steps;
    summary["t_final"] = field.time;
    summary["conservation"] = {
        {"mass_rel", {mass_drift[0], mass_drift[1]}},
        {"momentum_drift",
         (totals1.momentum - totals0.momentum).lpNorm<Eigen::Infinity>() / mom_scale},
        {"energy_rel", rel_drift(totals1.energy, totals0.energy)}};
    summary["clipped_density"] = {clipped[0], clipped[1]};
    summary["theta21_audit"] = audit_json(mix, audit);

    if (cfg.grid.boundary == Boundary::Periodic) {
      for (int k = 0; k < 2; ++k)
        if (mass_drift[k] > opts.tol.mass_rel)
          violations.push_back("species " + std::to_string(k + 1) + " mass drift " +
                               fmt17(mass_drift[k]) + " exceeds " + fmt17(opts.tol.mass_rel));
    }
    if (audit.violations > 0)
      violations.push_back("internal cross-temperature audit failed on " +
                           std::to_string(audit.violations) + " evaluation(s)");

    out.headline = "transport1d: steps=" + std::to_string(steps) + " mass_drift=[" +
                   fmt17(mass_drift[0]) + ", " + fmt17(mass_drift[1]) +
                   "] theta21_violations=" + std::to_string(audit.violations);
  } catch (const std::exception& e) {
    summary["error"] = e.what();
    out.status = "run-error";
    out.exit_code = 3;
    out.headline = std::string("transport1d failed: ") + e.what();
  }
  finalize(out, summary, violations, opts, start);
  return out;
}

// --- full vs reduced -----------------------------------------------------------------

RunOutcome run_chu_compare(const RunConfig& cfg, const RunnerOptions& opts) {
  const auto start = Clock::now();
  const Mixture& mix = cfg.mix;
  RunOutcome out;
  json summary = base_summary(cfg, "chu-compare", opts);
  std::vector<std::string> violations;
  try {
    if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);
    const auto grids = build_grids(cfg);
    SystemState full = build_full_state(cfg, grids, opts.threads);
    ReducedState reduced = reduce_state(full, opts.threads);
    const EquivalenceReport rep = full_vs_reduced_check(mix, std::move(full), std::move(reduced),
                                                        cfg.time.t_end, cfg.time.cfl_relax,
                                                        opts.threads);
    summary["steps"] = rep.steps;
    summary["equivalence"] = {{"max_density_gap", rep.max_density_gap},
                              {"max_velocity_gap", rep.max_velocity_gap},
                              {"max_translational_gap", rep.max_translational_gap},
                              {"max_rotational_gap", rep.max_rotational_gap},
                              {"max_gap", rep.max_gap}};
    if (!(rep.max_gap <= opts.tol.chu_gap))
      violations.push_back("full-vs-reduced moment gap " + fmt17(rep.max_gap) + " exceeds " +
                           fmt17(opts.tol.chu_gap));
    out.headline = "chu-compare: max moment discrepancy = " + fmt17(rep.max_gap) + " over " +
                   std::to_string(rep.steps) + " steps (bound " + fmt17(opts.tol.chu_gap) + ")";
  } catch (const std::exception& e) {
    summary["error"] = e.what();
    out.status = "run-error";
    out.exit_code = 3;
    out.headline = std::string("chu-compare failed: ") + e.what();
  }
  finalize(out, summary, violations, opts, start);
  return out;
}

// --- closure validation ----------------------------------------------------------------

RunOutcome run_validate_closure(const RunConfig& cfg, const RunnerOptions& opts,
                                std::ostream& os) {
  const auto start = Clock::now();
  const Mixture& mix = cfg.mix;
  RunOutcome out;
  json summary = base_summary(cfg, "validate-closure", opts);
  std::vector<std::string> violations;
  try {
    if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);
    const double m1 = mix.species[0].mass, m2 = mix.species[1].mass;
    const int l1 = mix.species[0].dof_internal, l2 = mix.species[1].dof_internal;

    os << "closure admissibility report for scenario '" << cfg.scenario << "'\n";
    const DeltaInterval iv = delta_admissible_interval(m1, m2, mix.coupling.epsilon);
    os << "  admissible delta interval: (" << iv.lo << ", " << iv.hi << "]\n";
    const GammaBound gb = gamma_bound(m1, m2, mix.coupling.epsilon, mix.coupling.delta, mix.d);
    if (gb.delta_admissible) {
      os << "  gamma bound at delta = " << mix.coupling.delta << ": " << gb.value
         << " (configured gamma = " << mix.coupling.gamma
         << (cfg.gamma_is_max ? ", from token 'max'" : "") << ")\n";
    } else {
      os << "  configured delta = " << mix.coupling.delta
         << " lies outside the interval; no admissible gamma exists\n";
    }
    const std::vector<std::string> mix_violations = validate(mix);
    if (mix_violations.empty()) {
      os << "  mixture parameters: admissible\n";
    } else {
      os << "  mixture parameters: INADMISSIBLE\n";
      for (const std::string& v : mix_violations) os << "    - " << v << "\n";
    }

    // Energy-balance residual of the configured initial state(s).
    auto block_state = [&](const InitialBlock& blk, int k) {
      const SpeciesParams& sp = mix.species[k];
      RelaxedState s;
      s.n = blk.n;
      s.u = blk.u;
      s.lambda = blk.t_tr + (sp.dof_internal > 0
                                 ? static_cast<double>(sp.dof_internal) / mix.d *
                                       (blk.t_rot - blk.theta0)
                                 : 0.0);
      s.theta = sp.dof_internal > 0 ? blk.theta0 : blk.t_tr;
      return s;
    };
    double state_residual = 0.0;
    if (mix_violations.empty()) {
      const RelaxedState s1 = block_state(cfg.initial[0], 0);
      const RelaxedState s2 = block_state(cfg.initial[1], 1);
      const InterspeciesState inter = build_interspecies(mix, s1, s2);
      state_residual = energy_constraint_residual(mix, s1, s2, inter);
      os << "  energy-balance residual at the configured initial state: " << state_residual
         << "\n";
      if (cfg.has_right) {
        const RelaxedState r1 = block_state(cfg.initial_right[0], 0);
        const RelaxedState r2 = block_state(cfg.initial_right[1], 1);
        const double rr =
            energy_constraint_residual(mix, r1, r2, build_interspecies(mix, r1, r2));
        state_residual = std::max(state_residual, rr);
        os << "  energy-balance residual at the right-state blocks: " << rr << "\n";
      }
    }

    // Entropy-monotonicity preconditions at the configured densities.
    const double n1 = cfg.initial[0].n, n2 = cfg.initial[1].n;
    const bool flag_11 = mix.species[0].nu_self * n1 >= mix.species[0].nu_cross * n2;
    const bool flag_22 = mix.species[1].nu_self * n2 >= mix.species[1].nu_cross * n1;
    const bool flag_alpha = mix.coupling.alpha != 1.0;
    const bool flag_delta = mix.coupling.delta != 1.0;
    os << "  entropy-monotonicity preconditions at the initial densities:\n";
    os << "    nu_11 n_1 >= nu_12 n_2: " << (flag_11 ? "satisfied" : "violated") << "\n";
    os << "    nu_22 n_2 >= nu_21 n_1: " << (flag_22 ? "satisfied" : "violated") << "\n";
    os << "    alpha != 1:             " << (flag_alpha ? "satisfied" : "violated") << "\n";
    os << "    delta != 1:             " << (flag_delta ? "satisfied" : "violated") << "\n";
    if (!flag_alpha)
      os << "    note: alpha = 1 means the cross attractors exchange no momentum and no "
            "energy\n";

    // Seeded sweep over random admissible parameter/state draws.
    double max_residual = 0.0, max_momentum = 0.0, max_energy = 0.0;
    if (mix_violations.empty()) {
      Lcg64 rng(cfg.seed);
      for (int i = 0; i < kValidateSamples; ++i) {
        const ClosureSample cs = sample_admissible(rng, mix.d, l1, l2);
        const InterspeciesState inter = build_interspecies(cs.mix, cs.s1, cs.s2);
        max_residual =
            std::max(max_residual, energy_constraint_residual(cs.mix, cs.s1, cs.s2, inter));
        const ExchangeFluxes fl = exchange_fluxes(cs.mix, cs.s1, cs.s2);
        const double mom_scale = std::max(
            {fl.momentum_12.lpNorm<Eigen::Infinity>(), fl.momentum_21.lpNorm<Eigen::Infinity>(),
             1.0});
        max_momentum = std::max(
            max_momentum, (fl.momentum_12 + fl.momentum_21).lpNorm<Eigen::Infinity>() / mom_scale);
        const double en_scale = std::max({std::abs(fl.energy_12), std::abs(fl.energy_21), 1.0});
        max_energy = std::max(max_energy, std::abs(fl.energy_12 + fl.energy_21) / en_scale);
      }
      os << "  random admissible sweep (" << kValidateSamples << " samples, d = " << mix.d
         << ", l = [" << l1 << ", " << l2 << "], seed " << cfg.seed << "):\n";
      os << "    max energy-balance residual:    " << max_residual << "\n";
      os << "    max momentum-exchange residual: " << max_momentum << "\n";
      os << "    max energy-exchange residual:   " << max_energy << "\n";
    }

    summary["admissible"] = mix_violations.empty();
    summary["mixture_violations"] = mix_violations;
    summary["delta_interval"] = {{"lo", iv.lo}, {"hi", iv.hi}};
    summary["gamma_bound"] = gb.delta_admissible ? json(gb.value) : json();
    summary["state_energy_residual"] = state_residual;
    summary["preconditions"] = {{"nu11_n1_ge_nu12_n2", flag_11},
                                {"nu22_n2_ge_nu21_n1", flag_22},
                                {"alpha_ne_1", flag_alpha},
                                {"delta_ne_1", flag_delta}};
    summary["sweep"] = {{"samples", kValidateSamples},
                        {"max_energy_balance_residual", max_residual},
                        {"max_momentum_exchange_residual", max_momentum},
                        {"max_energy_exchange_residual", max_energy}};

    if (!mix_violations.empty())
      violations.push_back("mixture parameters are inadmissible (" +
                           std::to_string(mix_violations.size()) + " violation(s))");
    if (max_residual > opts.tol.closure_residual)
      violations.push_back("sampled energy-balance residual " + fmt17(max_residual) +
                           " exceeds " + fmt17(opts.tol.closure_residual));

    out.headline = mix_violations.empty()
                       ? "validate-closure: admissible; max sampled energy-balance residual = " +
                             fmt17(max_residual)
                       : "validate-closure: mixture inadmissible";
  } catch (const std::exception& e) {
    summary["error"] = e.what();
    out.status = "run-error";
    out.exit_code = 3;
    out.headline = std::string("validate-closure failed: ") + e.what();
  }
  finalize(out, summary, violations, opts, start);
  return out;
}

}  // namespace polykin
