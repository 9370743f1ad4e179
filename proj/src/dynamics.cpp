#include "polykin/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "polykin/common.hpp"

namespace polykin {

namespace {

// Clip negative nodal values to zero; returns the clipped number density and
// records the most negative value seen.
double clip_negative(std::vector<double>& values, double node_weight, double* min_seen) {
  double removed = 0.0;
  double mn = 0.0;
  for (double& v : values) {
    if (v < mn) mn = v;
    if (v < 0.0) {
      removed -= v;
      v = 0.0;
    }
  }
  if (mn < *min_seen) *min_seen = mn;
  return node_weight * removed;
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x, int threads) {
  parallel_for(y.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) y[i] += a * x[i];
  });
}

}  // namespace

EvalContext evaluate_state(const Mixture& mix, const SystemState& state, int threads) {
  EvalContext ctx;
  std::array<RelaxedState, 2> rs;
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = mix.species[k];
    ctx.mom[k] = compute_moments(state.species[k].f, sp.mass, threads);
    ctx.tt[k] = build_tensor_temps(ctx.mom[k], state.species[k].lambda_ten, sp, mix.d);
    rs[k].n = ctx.mom[k].n;
    rs[k].u = ctx.mom[k].u;
    rs[k].lambda = ctx.tt[k].lambda;
    rs[k].theta = ctx.tt[k].theta;
  }
  ctx.inter = build_interspecies(mix, rs[0], rs[1]);
  ctx.attractors = build_attractor_set(mix, ctx.mom, ctx.tt, ctx.inter);
  return ctx;
}

Derivative collision_rhs(const Mixture& mix, const SystemState& state, const EvalContext& ctx,
                         int threads) {
  Derivative der;
  for (int k = 0; k < 2; ++k) {
    const int j = 1 - k;
    const SpeciesParams& sp = mix.species[k];
    const double rate_self = sp.nu_self * ctx.mom[k].n;
    const double rate_cross = sp.nu_cross * ctx.mom[j].n;
    const DiscreteDistribution& f = state.species[k].f;

    ProjectionResult self_p = project_attractor(ctx.attractors.self[k], f.grid, threads);
    ProjectionResult cross_p;
    if (rate_cross != 0.0) {
      cross_p = project_attractor(ctx.attractors.cross[k], f.grid, threads);
    }

    der.df[k].resize(f.values.size());
    const double* fv = f.values.data();
    const double* gv = self_p.dist.values.data();
    const double* mv = rate_cross != 0.0 ? cross_p.dist.values.data() : nullptr;
    double* out = der.df[k].data();
    parallel_for(f.values.size(), threads, [&](std::size_t b, std::size_t e) {
      if (mv) {
        for (std::size_t i = b; i < e; ++i) {
          out[i] = rate_self * (gv[i] - fv[i]) + rate_cross * (mv[i] - fv[i]);
        }
      } else {
        for (std::size_t i = b; i < e; ++i) out[i] = rate_self * (gv[i] - fv[i]);
      }
    });

    der.dlam[k] = tensor_rate(mix, ctx, k);
  }
  return der;
}

Eigen::MatrixXd tensor_rate(const Mixture& mix, const EvalContext& ctx, int k) {
  const int j = 1 - k;
  const SpeciesParams& sp = mix.species[k];
  const int l = sp.dof_internal;
  if (l == 0) return Eigen::MatrixXd();
  const int d = mix.d;
  const double rate_self = sp.nu_self * ctx.mom[k].n;
  const double rate_cross = sp.nu_cross * ctx.mom[j].n;
  const TensorTemps& tt = ctx.tt[k];
  const Eigen::MatrixXd p_over_n = ctx.mom[k].pressure / ctx.mom[k].n;
  Eigen::MatrixXd dl =
      (rate_self / sp.z_rot) * (static_cast<double>(d + l) / d) * (tt.t_ten - tt.lambda_ten) +
      rate_self * (tt.lambda_es - p_over_n);
  if (rate_cross != 0.0) {
    const double theta_cross = (k == 0) ? ctx.inter.theta12 : ctx.inter.theta21;
    dl += rate_cross * (theta_cross - ctx.mom[k].t_rot) * Eigen::MatrixXd::Identity(d, d);
  }
  return dl;
}

void audit_theta21(const Mixture& mix, const EvalContext& ctx, Theta21Audit& audit) {
  if (mix.species[0].dof_internal != 0 || mix.species[1].dof_internal <= 0) return;
  ++audit.evaluations;
  const double expected = ctx.tt[1].theta;
  const double tol = 1e-12 * std::max(1.0, std::abs(expected));
  if (std::abs(ctx.inter.theta21 - expected) > tol) ++audit.violations;
}

double stable_dt(const Mixture& mix, const EvalContext& ctx, double cfl) {
  if (!(cfl > 0.0)) throw std::invalid_argument("stable_dt: cfl must be positive");
  double rate = 0.0;
  for (int k = 0; k < 2; ++k) {
    const int j = 1 - k;
    const SpeciesParams& sp = mix.species[k];
    const double rs = sp.nu_self * ctx.mom[k].n;
    const double rc = sp.nu_cross * ctx.mom[j].n;
    rate = std::max(rate, rs + rc);
    if (sp.dof_internal > 0) {
      rate = std::max(rate, rs / sp.z_rot *
                                (static_cast<double>(mix.d + sp.dof_internal) / mix.d));
    }
  }
  if (!(rate > 0.0)) throw std::domain_error("stable_dt: no positive relaxation rate");
  return cfl / rate;
}

StepReport step_relax(const Mixture& mix, SystemState& state, double dt,
                      const StepOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_relax: dt must be positive");
  StepReport rep;
  rep.dt = dt;

  const EvalContext c1 = evaluate_state(mix, state, opts.threads);
  if (opts.theta21) audit_theta21(mix, c1, *opts.theta21);
  const Derivative k1 = collision_rhs(mix, state, c1, opts.threads);

  SystemState pred = state;
  for (int k = 0; k < 2; ++k) {
    axpy(pred.species[k].f.values, dt, k1.df[k], opts.threads);
    if (k1.dlam[k].size() > 0) pred.species[k].lambda_ten += dt * k1.dlam[k];
    rep.clipped_density[k] += clip_negative(pred.species[k].f.values,
                                            pred.species[k].f.grid->node_weight(),
                                            &rep.min_value[k]);
  }
  pred.time += dt;

  const EvalContext c2 = evaluate_state(mix, pred, opts.threads);
  if (opts.theta21) audit_theta21(mix, c2, *opts.theta21);
  const Derivative k2 = collision_rhs(mix, pred, c2, opts.threads);

  for (int k = 0; k < 2; ++k) {
    axpy(state.species[k].f.values, 0.5 * dt, k1.df[k], opts.threads);
    axpy(state.species[k].f.values, 0.5 * dt, k2.df[k], opts.threads);
    if (k1.dlam[k].size() > 0) {
      state.species[k].lambda_ten += (0.5 * dt) * (k1.dlam[k] + k2.dlam[k]);
    }
    rep.clipped_density[k] += clip_negative(state.species[k].f.values,
                                            state.species[k].f.grid->node_weight(),
                                            &rep.min_value[k]);
    if (rep.clipped_density[k] > opts.clip_abort_fraction * c1.mom[k].n) {
      std::ostringstream os;
      os << "step_relax: clipped number density " << rep.clipped_density[k] << " of species "
         << k + 1 << " exceeds " << opts.clip_abort_fraction << " of its density " << c1.mom[k].n;
      throw std::runtime_error(os.str());
    }
    if (rep.clipped_density[k] > 0.0) {
      std::ostringstream os;
      os << "step_relax: clipped negative values of species " << k + 1
         << ", number density removed " << rep.clipped_density[k];
      log_debug(os.str());
    }
  }
  state.time += dt;
  return rep;
}

EntropyReport compute_entropy(const Mixture& mix, const SystemState& state,
                              const EvalContext& ctx, int threads) {
  EntropyReport rep;
  for (int k = 0; k < 2; ++k) {
    const DiscreteDistribution& f = state.species[k].f;
    const PhaseGrid& g = *f.grid;
    const double w = g.node_weight();
    const double* fv = f.values.data();
    const double s = parallel_sum(f.values.size(), threads, [&](std::size_t b, std::size_t e) {
      double acc = 0.0;
      for (std::size_t i = b; i < e; ++i) acc += xlogx(fv[i]);
      return acc;
    });
    rep.f_term[k] = w * s;

    const SpeciesParams& sp = mix.species[k];
    const int l = sp.dof_internal;
    if (l > 0) {
      const SeparableProjection sep =
          project_attractor_factors(ctx.attractors.carrier[k], g, threads);
      double sv = 0.0, sv_log = 0.0;
      for (double raw : sep.vel_factor) {
        const double x = sep.scale * raw;
        sv += x;
        sv_log += xlogx(x);
      }
      double se = 0.0, se_log = 0.0;
      for (double x : sep.int_factor) {
        se += x;
        se_log += xlogx(x);
      }
      const double z_k = sp.z_rot * static_cast<double>(mix.d) / (mix.d + l);
      rep.carrier_term[k] = 3.0 * z_k * w * (sv_log * se + sv * se_log);
    }
    rep.total += rep.f_term[k] + rep.carrier_term[k];
  }
  return rep;
}

EntropyProductionReport entropy_production(const Mixture& mix, const SystemState& state,
                                           const EvalContext& ctx, int threads) {
  EntropyProductionReport rep;
  for (int k = 0; k < 2; ++k) {
    const int j = 1 - k;
    const DiscreteDistribution& f = state.species[k].f;
    const PhaseGrid& g = *f.grid;
    const double w = g.node_weight();
    const double* fv = f.values.data();
    const double rate_self = mix.species[k].nu_self * ctx.mom[k].n;
    const double rate_cross = mix.species[k].nu_cross * ctx.mom[j].n;

    const ProjectionResult self_p = project_attractor(ctx.attractors.self[k], f.grid, threads);
    const ProjectionResult cross_p = project_attractor(ctx.attractors.cross[k], f.grid, threads);
    const double* gv = self_p.dist.values.data();
    const double* mv = cross_p.dist.values.data();
    double acc_self = 0.0, acc_cross = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      // ln f floored far below any resolvable tail so clipped nodes stay
      // finite without changing the sign of the attractor-weighted terms.
      const double lf = std::log(std::max(fv[i], 1e-300));
      acc_self += (gv[i] - fv[i]) * lf;
      acc_cross += (mv[i] - fv[i]) * lf;
    }
    rep.self_term[k] = rate_self * w * acc_self;
    rep.cross_term[k] = rate_cross * w * acc_cross;

    // The carrier pair is identical for species without internal structure
    // (both reduce to the Gaussian with covariance P/(n m)), so the term is
    // exactly zero there.
    if (mix.species[k].dof_internal > 0) {
      const SeparableProjection car =
          project_attractor_factors(ctx.attractors.carrier[k], g, threads);
      const SeparableProjection tar =
          project_attractor_factors(ctx.attractors.target[k], g, threads);
      double cv = 0.0, cv_log = 0.0, ce = 0.0, ce_log = 0.0;
      double tv = 0.0, tv_logc = 0.0, te = 0.0, te_logc = 0.0;
      for (std::size_t i = 0; i < car.vel_factor.size(); ++i) {
        const double c = car.scale * car.vel_factor[i];
        const double t = tar.scale * tar.vel_factor[i];
        const double lc = std::log(std::max(c, 1e-300));
        cv += c;
        cv_log += c * lc;
        tv += t;
        tv_logc += t * lc;
      }
      for (std::size_t i = 0; i < car.int_factor.size(); ++i) {
        const double c = car.int_factor[i];
        const double t = tar.int_factor[i];
        const double lc = std::log(std::max(c, 1e-300));
        ce += c;
        ce_log += c * lc;
        te += t;
        te_logc += t * lc;
      }
      const double carrier_sum = w * (cv_log * ce + cv * ce_log);
      const double target_sum = w * (tv_logc * te + tv * te_logc);
      rep.carrier_term[k] = 2.0 * rate_self * (target_sum - carrier_sum);
    }
    rep.total += rep.self_term[k] + rep.carrier_term[k] + rep.cross_term[k];
  }
  return rep;
}

ConservedTotals conserved_totals(const Mixture& mix, const EvalContext& ctx) {
  ConservedTotals tot;
  tot.momentum = Eigen::VectorXd::Zero(mix.d);
  for (int k = 0; k < 2; ++k) {
    const MacroMoments& m = ctx.mom[k];
    const SpeciesParams& sp = mix.species[k];
    tot.mass += sp.mass * m.n;
    tot.momentum += sp.mass * m.n * m.u;
    tot.energy += 0.5 * sp.mass * m.n * m.u.squaredNorm() + 0.5 * mix.d * m.n * m.t_tr +
                  0.5 * sp.dof_internal * m.n * m.t_rot;
  }
  return tot;
}

GlobalEquilibrium global_equilibrium(const Mixture& mix, const EvalContext& ctx) {
  const ConservedTotals tot = conserved_totals(mix, ctx);
  GlobalEquilibrium eq;
  eq.u = tot.momentum / tot.mass;
  const double thermal = tot.energy - 0.5 * tot.mass * eq.u.squaredNorm();
  double dof = 0.0;
  for (int k = 0; k < 2; ++k) {
    dof += ctx.mom[k].n * (mix.d + mix.species[k].dof_internal);
  }
  eq.temperature = 2.0 * thermal / dof;
  if (!(eq.temperature > 0.0)) {
    throw std::domain_error("global_equilibrium: equilibrium temperature not positive");
  }
  return eq;
}

EquilibriumResidual equilibrium_residual(const Mixture& mix, const SystemState& state,
                                         const EvalContext& ctx, int threads) {
  const GlobalEquilibrium eq = global_equilibrium(mix, ctx);
  EquilibriumResidual res;

  auto velocity_term = [&](const Eigen::VectorXd& u, double mass) {
    return (u - eq.u).norm() / std::sqrt(eq.temperature / mass);
  };
  auto temp_term = [&](double t) { return std::abs(t - eq.temperature) / eq.temperature; };

  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = mix.species[k];
    const MacroMoments& m = ctx.mom[k];
    res.velocity_gap = std::max(res.velocity_gap, velocity_term(m.u, sp.mass));
    res.temperature_spread = std::max(res.temperature_spread, temp_term(m.t_tr));
    res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.tt[k].lambda));
    if (sp.dof_internal > 0) {
      res.temperature_spread = std::max(res.temperature_spread, temp_term(m.t_rot));
      res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.tt[k].theta));
    }
    res.anisotropy = std::max(
        res.anisotropy,
        (m.pressure / m.n - m.t_tr * Eigen::MatrixXd::Identity(mix.d, mix.d)).norm() /
            eq.temperature);

    GaussianSpec maxwell;
    maxwell.n = m.n;
    maxwell.mass = sp.mass;
    maxwell.u = eq.u;
    maxwell.cov_v = (eq.temperature / sp.mass) * Eigen::MatrixXd::Identity(mix.d, mix.d);
    maxwell.dof_internal = sp.dof_internal;
    maxwell.theta = eq.temperature;
    const ProjectionResult proj =
        project_attractor(maxwell, state.species[k].f.grid, threads);
    const double* fv = state.species[k].f.values.data();
    const double* mv = proj.dist.values.data();
    const double l1 =
        parallel_sum(state.species[k].f.values.size(), threads,
                     [&](std::size_t b, std::size_t e) {
                       double acc = 0.0;
                       for (std::size_t i = b; i < e; ++i) acc += std::abs(fv[i] - mv[i]);
                       return acc;
                     });
    res.maxwellian_distance = std::max(
        res.maxwellian_distance, state.species[k].f.grid->node_weight() * l1 / m.n);
  }

  res.velocity_gap = std::max(
      res.velocity_gap, velocity_term(ctx.inter.u12, mix.species[0].mass));
  res.velocity_gap = std::max(
      res.velocity_gap, velocity_term(ctx.inter.u21, mix.species[1].mass));
  res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.inter.lambda12));
  res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.inter.lambda21));
  if (mix.species[0].dof_internal > 0) {
    res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.inter.theta12));
  }
  if (mix.species[1].dof_internal > 0) {
    res.temperature_spread = std::max(res.temperature_spread, temp_term(ctx.inter.theta21));
  }

  res.max_residual = std::max({res.velocity_gap, res.temperature_spread, res.anisotropy,
                               res.maxwellian_distance});
  return res;
}

PreconditionReport entropy_preconditions(const Mixture& mix, const EvalContext& ctx) {
  PreconditionReport rep;
  const double r11 = mix.species[0].nu_self * ctx.mom[0].n;
  const double r12 = mix.species[0].nu_cross * ctx.mom[1].n;
  const double r22 = mix.species[1].nu_self * ctx.mom[1].n;
  const double r21 = mix.species[1].nu_cross * ctx.mom[0].n;
  if (r11 < r12) {
    std::ostringstream os;
    os << "self-relaxation rate of species 1 (" << r11 << ") is below its cross rate (" << r12
       << ")";
    rep.violations.push_back(os.str());
  }
  if (r22 < r21) {
    std::ostringstream os;
    os << "self-relaxation rate of species 2 (" << r22 << ") is below its cross rate (" << r21
       << ")";
    rep.violations.push_back(os.str());
  }
  if (std::abs(1.0 - mix.coupling.alpha) < 1e-12) {
    rep.violations.push_back("alpha = 1 decouples the temperature exchange");
  }
  if (std::abs(1.0 - mix.coupling.delta) < 1e-12) {
    rep.violations.push_back("delta = 1 decouples the velocity exchange");
  }
  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace polykin
