#include "polykin/chu.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "polykin/common.hpp"

namespace polykin {

namespace {

// Same clipping semantics as the full stepper: negatives go to zero, the
// removed number density is returned, the worst pre-clip value is recorded.
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

// The attractor as seen by the g equation: same velocity part, no internal
// axes.  Inert for specs that already have none.
GaussianSpec strip_internal(GaussianSpec spec) {
  spec.dof_internal = 0;
  spec.theta = 1.0;
  return spec;
}

double minmod(double a, double b) {
  if (a > 0.0 && b > 0.0) return std::min(a, b);
  if (a < 0.0 && b < 0.0) return std::max(a, b);
  return 0.0;
}

}  // namespace

std::shared_ptr<const PhaseGrid> velocity_grid_of(const std::shared_ptr<const PhaseGrid>& grid) {
  if (!grid) throw std::invalid_argument("velocity_grid_of: null grid");
  if (grid->dim_int() == 0) return grid;
  std::vector<AxisSpec> axes;
  axes.reserve(grid->dim_v());
  for (int a = 0; a < grid->dim_v(); ++a) axes.push_back(grid->vel_axis(a));
  return std::make_shared<PhaseGrid>(std::move(axes), 0, 1.0, 2);
}

ReducedSpecies reduce_species(const SpeciesState& full, int threads) {
  const PhaseGrid& grid = *full.f.grid;
  ReducedSpecies red;
  red.lambda_ten = full.lambda_ten;
  if (grid.dim_int() == 0) {
    red.g = full.f;  // same grid object, values copied bitwise; h stays empty
    return red;
  }
  red.g.grid = velocity_grid_of(full.f.grid);
  red.g.species = full.f.species;
  const std::size_t nv = grid.n_vel();
  const std::size_t ni = grid.n_int();
  red.g.values.resize(nv);
  red.h.resize(nv);
  // Quadrature volume of the internal axes: everything node_weight carries
  // beyond the velocity-only weight.
  const double int_volume = grid.node_weight() / red.g.grid->node_weight();
  const std::vector<double>& sq = grid.int_sq();
  const double* fv = full.f.values.data();
  double* gv = red.g.values.data();
  double* hv = red.h.data();
  parallel_for(nv, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t iv = b; iv < e; ++iv) {
      const double* row = fv + iv * ni;
      double s0 = 0.0, s2 = 0.0;
      for (std::size_t ie = 0; ie < ni; ++ie) {
        s0 += row[ie];
        s2 += sq[ie] * row[ie];
      }
      gv[iv] = s0 * int_volume;
      hv[iv] = s2 * int_volume;
    }
  });
  return red;
}

ReducedState reduce_state(const SystemState& full, int threads) {
  ReducedState red;
  red.time = full.time;
  for (int k = 0; k < 2; ++k) red.species[k] = reduce_species(full.species[k], threads);
  return red;
}

MacroMoments reduced_moments(const ReducedSpecies& rs, double mass, int dof_internal,
                             int threads) {
  MacroMoments mom = compute_moments(rs.g, mass, threads);
  if (dof_internal > 0) {
    if (rs.h.size() != rs.g.values.size()) {
      throw std::invalid_argument("reduced_moments: h does not match the velocity grid");
    }
    const double* hv = rs.h.data();
    const double sum_h = parallel_sum(rs.h.size(), threads, [&](std::size_t b, std::size_t e) {
      double acc = 0.0;
      for (std::size_t i = b; i < e; ++i) acc += hv[i];
      return acc;
    });
    mom.t_rot = mass * rs.g.grid->node_weight() * sum_h / (dof_internal * mom.n);
    if (!(mom.t_rot > 0.0)) {
      throw std::domain_error("reduced_moments: internal temperature is not positive");
    }
  }
  return mom;
}

EvalContext evaluate_reduced(const Mixture& mix, const ReducedState& state, int threads) {
  EvalContext ctx;
  std::array<RelaxedState, 2> rs;
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = mix.species[k];
    ctx.mom[k] = reduced_moments(state.species[k], sp.mass, sp.dof_internal, threads);
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

ReducedDerivative reduced_collision_rhs(const Mixture& mix, const ReducedState& state,
                                        const EvalContext& ctx, int threads) {
  ReducedDerivative der;
  for (int k = 0; k < 2; ++k) {
    const int j = 1 - k;
    const SpeciesParams& sp = mix.species[k];
    const double rate_self = sp.nu_self * ctx.mom[k].n;
    const double rate_cross = sp.nu_cross * ctx.mom[j].n;
    const DiscreteDistribution& g = state.species[k].g;

    ProjectionResult self_p =
        project_attractor(strip_internal(ctx.attractors.self[k]), g.grid, threads);
    ProjectionResult cross_p;
    if (rate_cross != 0.0) {
      cross_p = project_attractor(strip_internal(ctx.attractors.cross[k]), g.grid, threads);
    }

    der.dg[k].resize(g.values.size());
    const double* gv = g.values.data();
    const double* sv = self_p.dist.values.data();
    const double* cv = rate_cross != 0.0 ? cross_p.dist.values.data() : nullptr;
    double* out = der.dg[k].data();
    parallel_for(g.values.size(), threads, [&](std::size_t b, std::size_t e) {
      if (cv) {
        for (std::size_t i = b; i < e; ++i) {
          out[i] = rate_self * (sv[i] - gv[i]) + rate_cross * (cv[i] - gv[i]);
        }
      } else {
        for (std::size_t i = b; i < e; ++i) out[i] = rate_self * (sv[i] - gv[i]);
      }
    });

    const int l = sp.dof_internal;
    if (l > 0) {
      if (state.species[k].h.size() != g.values.size()) {
        throw std::invalid_argument("reduced_collision_rhs: h does not match the velocity grid");
      }
      // Second internal moment carried by each attractor per unit density.
      const double fac_self = l * ctx.tt[k].theta / sp.mass;
      const double theta_cross = (k == 0) ? ctx.inter.theta12 : ctx.inter.theta21;
      const double fac_cross = l * theta_cross / sp.mass;
      der.dh[k].resize(g.values.size());
      const double* hv = state.species[k].h.data();
      double* outh = der.dh[k].data();
      parallel_for(g.values.size(), threads, [&](std::size_t b, std::size_t e) {
        if (cv) {
          for (std::size_t i = b; i < e; ++i) {
            outh[i] = rate_self * (fac_self * sv[i] - hv[i]) +
                      rate_cross * (fac_cross * cv[i] - hv[i]);
          }
        } else {
          for (std::size_t i = b; i < e; ++i) outh[i] = rate_self * (fac_self * sv[i] - hv[i]);
        }
      });
    }
    der.dlam[k] = tensor_rate(mix, ctx, k);
  }
  return der;
}

StepReport step_relax_reduced(const Mixture& mix, ReducedState& state, double dt,
                              const StepOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_relax_reduced: dt must be positive");
  StepReport rep;
  rep.dt = dt;

  const EvalContext c1 = evaluate_reduced(mix, state, opts.threads);
  if (opts.theta21) audit_theta21(mix, c1, *opts.theta21);
  const ReducedDerivative k1 = reduced_collision_rhs(mix, state, c1, opts.threads);

  ReducedState pred = state;
  for (int k = 0; k < 2; ++k) {
    ReducedSpecies& ps = pred.species[k];
    axpy(ps.g.values, dt, k1.dg[k], opts.threads);
    if (!k1.dh[k].empty()) axpy(ps.h, dt, k1.dh[k], opts.threads);
    if (k1.dlam[k].size() > 0) ps.lambda_ten += dt * k1.dlam[k];
    rep.clipped_density[k] +=
        clip_negative(ps.g.values, ps.g.grid->node_weight(), &rep.min_value[k]);
    double hmin = 0.0;
    if (!ps.h.empty()) clip_negative(ps.h, ps.g.grid->node_weight(), &hmin);
  }
  pred.time += dt;

  const EvalContext c2 = evaluate_reduced(mix, pred, opts.threads);
  if (opts.theta21) audit_theta21(mix, c2, *opts.theta21);
  const ReducedDerivative k2 = reduced_collision_rhs(mix, pred, c2, opts.threads);

  for (int k = 0; k < 2; ++k) {
    ReducedSpecies& sk = state.species[k];
    axpy(sk.g.values, 0.5 * dt, k1.dg[k], opts.threads);
    axpy(sk.g.values, 0.5 * dt, k2.dg[k], opts.threads);
    if (!k1.dh[k].empty()) {
      axpy(sk.h, 0.5 * dt, k1.dh[k], opts.threads);
      axpy(sk.h, 0.5 * dt, k2.dh[k], opts.threads);
    }
    if (k1.dlam[k].size() > 0) {
      sk.lambda_ten += (0.5 * dt) * (k1.dlam[k] + k2.dlam[k]);
    }
    rep.clipped_density[k] +=
        clip_negative(sk.g.values, sk.g.grid->node_weight(), &rep.min_value[k]);
    double hmin = 0.0;
    if (!sk.h.empty()) clip_negative(sk.h, sk.g.grid->node_weight(), &hmin);
    if (rep.clipped_density[k] > opts.clip_abort_fraction * c1.mom[k].n) {
      std::ostringstream os;
      os << "step_relax_reduced: clipped number density " << rep.clipped_density[k]
         << " of species " << k + 1 << " exceeds " << opts.clip_abort_fraction
         << " of its density " << c1.mom[k].n;
      throw std::runtime_error(os.str());
    }
    if (rep.clipped_density[k] > 0.0) {
      std::ostringstream os;
      os << "step_relax_reduced: clipped negative values of species " << k + 1
         << ", number density removed " << rep.clipped_density[k];
      log_debug(os.str());
    }
  }
  state.time += dt;
  return rep;
}

// --- one-dimensional space ---------------------------------------------------

Boundary boundary_from_string(const std::string& name) {
  if (name == "periodic") return Boundary::Periodic;
  if (name == "outflow") return Boundary::Outflow;
  throw std::invalid_argument("unknown boundary '" + name + "' (expected periodic or outflow)");
}

std::string to_string(Boundary b) {
  return b == Boundary::Periodic ? "periodic" : "outflow";
}

ReducedState SpatialField1D::cell_state(int ix) const {
  if (ix < 0 || ix >= n_cells) throw std::out_of_range("cell_state: cell index out of range");
  ReducedState cell;
  cell.time = time;
  for (int k = 0; k < 2; ++k) {
    const int nv = n_vel(k);
    ReducedSpecies& rs = cell.species[k];
    rs.g.grid = grid[k];
    rs.g.species = k;
    rs.g.values.assign(g[k].begin() + static_cast<std::ptrdiff_t>(ix) * nv,
                       g[k].begin() + static_cast<std::ptrdiff_t>(ix + 1) * nv);
    if (!h[k].empty()) {
      rs.h.assign(h[k].begin() + static_cast<std::ptrdiff_t>(ix) * nv,
                  h[k].begin() + static_cast<std::ptrdiff_t>(ix + 1) * nv);
    }
    if (!lambda_ten[k].empty()) rs.lambda_ten = lambda_ten[k][ix];
  }
  return cell;
}

void SpatialField1D::store_cell(int ix, const ReducedState& cell) {
  if (ix < 0 || ix >= n_cells) throw std::out_of_range("store_cell: cell index out of range");
  for (int k = 0; k < 2; ++k) {
    const int nv = n_vel(k);
    const ReducedSpecies& rs = cell.species[k];
    if (static_cast<int>(rs.g.values.size()) != nv) {
      throw std::invalid_argument("store_cell: cell values do not match the velocity grid");
    }
    std::copy(rs.g.values.begin(), rs.g.values.end(),
              g[k].begin() + static_cast<std::ptrdiff_t>(ix) * nv);
    if (!rs.h.empty()) {
      if (static_cast<int>(rs.h.size()) != nv) {
        throw std::invalid_argument("store_cell: cell h does not match the velocity grid");
      }
      if (h[k].empty()) h[k].assign(static_cast<std::size_t>(n_cells) * nv, 0.0);
      std::copy(rs.h.begin(), rs.h.end(), h[k].begin() + static_cast<std::ptrdiff_t>(ix) * nv);
    } else if (!h[k].empty()) {
      throw std::invalid_argument("store_cell: cell lacks internal data the field carries");
    }
    if (rs.lambda_ten.size() > 0) {
      if (lambda_ten[k].empty()) lambda_ten[k].assign(n_cells, Eigen::MatrixXd());
      lambda_ten[k][ix] = rs.lambda_ten;
    } else if (!lambda_ten[k].empty()) {
      throw std::invalid_argument("store_cell: cell lacks the tensor state the field carries");
    }
  }
}

SpatialField1D allocate_field(std::array<std::shared_ptr<const PhaseGrid>, 2> grids, int n_cells,
                              double x_lo, double x_hi, Boundary boundary) {
  if (n_cells < 1) throw std::invalid_argument("allocate_field: need at least one cell");
  if (!(x_hi > x_lo)) throw std::invalid_argument("allocate_field: x_hi must exceed x_lo");
  SpatialField1D field;
  field.n_cells = n_cells;
  field.x_lo = x_lo;
  field.x_hi = x_hi;
  field.boundary = boundary;
  for (int k = 0; k < 2; ++k) {
    if (!grids[k]) throw std::invalid_argument("allocate_field: null grid");
    if (grids[k]->dim_int() != 0) {
      throw std::invalid_argument("allocate_field: grids must be velocity-only");
    }
    field.grid[k] = grids[k];
    field.g[k].assign(static_cast<std::size_t>(n_cells) * grids[k]->n_vel(), 0.0);
  }
  return field;
}

namespace {

// Largest |v_x| over both species' velocity grids.
double max_transport_speed(const SpatialField1D& field) {
  double cmax = 0.0;
  for (int k = 0; k < 2; ++k) {
    const PhaseGrid& gr = *field.grid[k];
    for (int idx = 0; idx < gr.vel_axis(0).n; ++idx) {
      cmax = std::max(cmax, std::abs(gr.vel_coord(0, idx)));
    }
  }
  return cmax;
}

// Conservative update of one line: q_i -= lam * (F_{i+1/2} - F_{i-1/2}) with
// upwind fluxes at speed c, optionally minmod-limited.  faces must have
// n_cells + 1 entries of scratch.
void euler_advect_line(std::vector<double>& q, double c, double lam, Boundary bc,
                       bool second_order, std::vector<double>& faces) {
  const int n = static_cast<int>(q.size());
  // Outflow uses vacuum ghosts: characteristics entering the domain carry
  // nothing, leaving ones are upwinded from the interior, so mass can only
  // decrease.  (Copying the edge value instead would freeze the inflow-side
  // cell and feed mass back in.)
  auto val = [&](int i) -> double {
    if (bc == Boundary::Periodic) {
      i %= n;
      if (i < 0) i += n;
      return q[i];
    }
    return (i < 0 || i >= n) ? 0.0 : q[i];
  };
  for (int i = 0; i <= n; ++i) {
    double qf;
    if (c > 0.0) {
      qf = val(i - 1);
      if (second_order) qf += 0.5 * minmod(val(i - 1) - val(i - 2), val(i) - val(i - 1));
    } else {
      qf = val(i);
      if (second_order) qf -= 0.5 * minmod(val(i) - val(i - 1), val(i + 1) - val(i));
    }
    faces[i] = c * qf;
  }
  if (bc == Boundary::Periodic) faces[n] = faces[0];  // exact flux telescoping
  for (int i = 0; i < n; ++i) q[i] -= lam * (faces[i + 1] - faces[i]);
}

void advect_line(std::vector<double>& q, double c, double lam, Boundary bc, bool second_order,
                 std::vector<double>& faces, std::vector<double>& stage) {
  if (!second_order) {
    euler_advect_line(q, c, lam, bc, false, faces);
    return;
  }
  // Two-stage strong-stability-preserving step: average of the state and a
  // doubly Euler-advanced state.
  stage = q;
  euler_advect_line(stage, c, lam, bc, true, faces);
  euler_advect_line(stage, c, lam, bc, true, faces);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = 0.5 * (q[i] + stage[i]);
}

// Gather/scatter one velocity node's spatial line (cell-major storage).
void gather_line(const std::vector<double>& data, int nv, int iv, std::vector<double>& line) {
  const int n = static_cast<int>(line.size());
  for (int ix = 0; ix < n; ++ix) line[ix] = data[static_cast<std::size_t>(ix) * nv + iv];
}

void scatter_line(std::vector<double>& data, int nv, int iv, const std::vector<double>& line) {
  const int n = static_cast<int>(line.size());
  for (int ix = 0; ix < n; ++ix) data[static_cast<std::size_t>(ix) * nv + iv] = line[ix];
}

}  // namespace

void advect_field(SpatialField1D& field, double dt, const TransportOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("advect_field: dt must be positive");
  const double dx = field.dx();
  const double cmax = max_transport_speed(field);
  const double bound = opts.cfl_advection * dx / cmax;
  if (dt > bound * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "advect_field: dt " << dt << " exceeds the advection bound " << bound << " (cfl "
       << opts.cfl_advection << ", dx " << dx << ", max speed " << cmax << ")";
    throw std::invalid_argument(os.str());
  }
  const double lam = dt / dx;
  const int nx = field.n_cells;

  for (int k = 0; k < 2; ++k) {
    const PhaseGrid& gr = *field.grid[k];
    const int nv = static_cast<int>(gr.n_vel());

    // Tensor advection needs the pre-advection density and mean velocity.
    std::vector<Eigen::MatrixXd> q_ten;
    const bool has_tensor = !field.lambda_ten[k].empty();
    if (has_tensor) {
      std::vector<double> nsum(nx, 0.0), usum(nx, 0.0);
      for (int ix = 0; ix < nx; ++ix) {
        const double* cell = field.g[k].data() + static_cast<std::size_t>(ix) * nv;
        double s = 0.0, su = 0.0;
        for (int iv = 0; iv < nv; ++iv) {
          s += cell[iv];
          su += gr.vel_coord(0, gr.vel_index(iv, 0)) * cell[iv];
        }
        nsum[ix] = s;
        usum[ix] = su;
      }
      std::vector<double> ux(nx, 0.0);
      for (int ix = 0; ix < nx; ++ix) ux[ix] = nsum[ix] > 0.0 ? usum[ix] / nsum[ix] : 0.0;

      q_ten.resize(nx);
      for (int ix = 0; ix < nx; ++ix) q_ten[ix] = nsum[ix] * field.lambda_ten[k][ix];

      const int d = static_cast<int>(q_ten[0].rows());
      const Eigen::MatrixXd q_zero = Eigen::MatrixXd::Zero(d, d);
      auto uval = [&](int i) -> double {
        if (field.boundary == Boundary::Periodic) {
          i %= nx;
          if (i < 0) i += nx;
          return ux[i];
        }
        return ux[std::clamp(i, 0, nx - 1)];
      };
      // Vacuum ghosts for the tensor density as well (see euler_advect_line).
      auto qval = [&](int i) -> const Eigen::MatrixXd& {
        if (field.boundary == Boundary::Periodic) {
          i %= nx;
          if (i < 0) i += nx;
          return q_ten[i];
        }
        return (i < 0 || i >= nx) ? q_zero : q_ten[i];
      };
      std::vector<Eigen::MatrixXd> faces(nx + 1);
      for (int i = 0; i <= nx; ++i) {
        const double uf = 0.5 * (uval(i - 1) + uval(i));
        if (uf > 0.0) {
          faces[i] = uf * qval(i - 1);
        } else if (uf < 0.0) {
          faces[i] = uf * qval(i);
        } else {
          faces[i] = Eigen::MatrixXd::Zero(d, d);
        }
      }
      if (field.boundary == Boundary::Periodic) faces[nx] = faces[0];
      std::vector<Eigen::MatrixXd> q_new(nx);
      for (int i = 0; i < nx; ++i) q_new[i] = q_ten[i] - lam * (faces[i + 1] - faces[i]);
      q_ten.swap(q_new);
    }

    // Kinetic advection of g (and h when present), one spatial line per
    // velocity node; lines are independent.
    auto sweep = [&](std::vector<double>& data) {
      parallel_for(static_cast<std::size_t>(nv), opts.threads,
                   [&](std::size_t b, std::size_t e) {
                     std::vector<double> line(nx), faces(nx + 1), stage;
                     for (std::size_t iv = b; iv < e; ++iv) {
                       const double c = gr.vel_coord(0, gr.vel_index(iv, 0));
                       if (c == 0.0) continue;
                       gather_line(data, nv, static_cast<int>(iv), line);
                       advect_line(line, c, lam, field.boundary, opts.second_order, faces, stage);
                       scatter_line(data, nv, static_cast<int>(iv), line);
                     }
                   });
    };
    sweep(field.g[k]);
    if (!field.h[k].empty()) sweep(field.h[k]);

    if (has_tensor) {
      for (int ix = 0; ix < nx; ++ix) {
        const double* cell = field.g[k].data() + static_cast<std::size_t>(ix) * nv;
        double s = 0.0;
        for (int iv = 0; iv < nv; ++iv) s += cell[iv];
        if (s > 0.0) {
          field.lambda_ten[k][ix] = q_ten[ix] / s;
        } else {
          std::ostringstream os;
          os << "advect_field: species " << k + 1 << " lost all density in cell " << ix
             << "; keeping its previous tensor state";
          log_warn(os.str());
        }
      }
    }
  }
}

namespace {

// Fastest per-cell relaxation rate over the whole field, the transport
// analogue of the rate inside stable_dt.
double max_relaxation_rate(const Mixture& mix, const SpatialField1D& field) {
  const int nx = field.n_cells;
  std::array<std::vector<double>, 2> dens;
  for (int k = 0; k < 2; ++k) {
    const int nv = field.n_vel(k);
    const double w = field.grid[k]->node_weight();
    dens[k].resize(nx);
    for (int ix = 0; ix < nx; ++ix) {
      const double* cell = field.g[k].data() + static_cast<std::size_t>(ix) * nv;
      double s = 0.0;
      for (int iv = 0; iv < nv; ++iv) s += cell[iv];
      dens[k][ix] = w * s;
    }
  }
  double rate = 0.0;
  for (int ix = 0; ix < nx; ++ix) {
    for (int k = 0; k < 2; ++k) {
      const int j = 1 - k;
      const SpeciesParams& sp = mix.species[k];
      const double rs = sp.nu_self * dens[k][ix];
      const double rc = sp.nu_cross * dens[j][ix];
      rate = std::max(rate, rs + rc);
      if (sp.dof_internal > 0) {
        rate = std::max(rate, rs / sp.z_rot *
                                  (static_cast<double>(mix.d + sp.dof_internal) / mix.d));
      }
    }
  }
  return rate;
}

}  // namespace

double transport_stable_dt(const Mixture& mix, const SpatialField1D& field,
                           const TransportOptions& opts) {
  if (!(opts.cfl_advection > 0.0) || !(opts.cfl_relaxation > 0.0)) {
    throw std::invalid_argument("transport_stable_dt: CFL numbers must be positive");
  }
  const double cmax = max_transport_speed(field);
  double dt = opts.cfl_advection * field.dx() / cmax;
  const double rate = max_relaxation_rate(mix, field);
  if (rate > 0.0) dt = std::min(dt, opts.cfl_relaxation / rate);
  return dt;
}

TransportStepReport step_transport(const Mixture& mix, SpatialField1D& field, double dt,
                                   const TransportOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_transport: dt must be positive");
  const double rate = max_relaxation_rate(mix, field);
  if (rate > 0.0 && dt > opts.cfl_relaxation / rate * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "step_transport: dt " << dt << " exceeds the relaxation bound "
       << opts.cfl_relaxation / rate << " (cfl " << opts.cfl_relaxation << ", fastest rate "
       << rate << ")";
    throw std::invalid_argument(os.str());
  }

  // Operator splitting: transport first (validates the advection bound), then
  // pointwise relaxation of every cell.
  advect_field(field, dt, opts);

  TransportStepReport rep;
  rep.dt = dt;
  const int nx = field.n_cells;
  const double dx = field.dx();
  std::vector<Theta21Audit> audits(nx);
  std::vector<std::array<double, 2>> clips(nx, {0.0, 0.0});
  std::vector<std::string> errors(nx);
  parallel_for(static_cast<std::size_t>(nx), opts.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t ix = b; ix < e; ++ix) {
      try {
        ReducedState cell = field.cell_state(static_cast<int>(ix));
        StepOptions cell_opts;
        cell_opts.threads = 1;
        cell_opts.clip_abort_fraction = opts.clip_abort_fraction;
        cell_opts.theta21 = &audits[ix];
        const StepReport r = step_relax_reduced(mix, cell, dt, cell_opts);
        field.store_cell(static_cast<int>(ix), cell);
        clips[ix] = r.clipped_density;
      } catch (const std::exception& ex) {
        errors[ix] = ex.what();
      }
    }
  });
  for (int ix = 0; ix < nx; ++ix) {
    if (!errors[ix].empty()) {
      std::ostringstream os;
      os << "step_transport: cell " << ix << ": " << errors[ix];
      throw std::runtime_error(os.str());
    }
    rep.clipped_density[0] += dx * clips[ix][0];
    rep.clipped_density[1] += dx * clips[ix][1];
    rep.theta21.evaluations += audits[ix].evaluations;
    rep.theta21.violations += audits[ix].violations;
  }
  field.time += dt;
  return rep;
}

std::array<MacroMoments, 2> cell_moments(const Mixture& mix, const SpatialField1D& field, int ix,
                                         int threads) {
  const ReducedState cell = field.cell_state(ix);
  std::array<MacroMoments, 2> mom;
  for (int k = 0; k < 2; ++k) {
    mom[k] = reduced_moments(cell.species[k], mix.species[k].mass,
                             mix.species[k].dof_internal, threads);
  }
  return mom;
}

std::array<double, 2> field_density_totals(const SpatialField1D& field) {
  std::array<double, 2> totals{0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    double s = 0.0;
    for (double v : field.g[k]) s += v;
    totals[k] = field.dx() * field.grid[k]->node_weight() * s;
  }
  return totals;
}

EquivalenceReport full_vs_reduced_check(const Mixture& mix, SystemState full,
                                        ReducedState reduced, double t_end, double cfl,
                                        int threads) {
  EquivalenceReport rep;
  auto record = [&](const EvalContext& cf, const EvalContext& cr) {
    for (int k = 0; k < 2; ++k) {
      auto gap = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
      rep.max_density_gap = std::max(rep.max_density_gap, gap(cf.mom[k].n, cr.mom[k].n));
      for (int a = 0; a < mix.d; ++a) {
        rep.max_velocity_gap =
            std::max(rep.max_velocity_gap, gap(cf.mom[k].u[a], cr.mom[k].u[a]));
      }
      rep.max_translational_gap =
          std::max(rep.max_translational_gap, gap(cf.mom[k].t_tr, cr.mom[k].t_tr));
      if (mix.species[k].dof_internal > 0) {
        rep.max_rotational_gap =
            std::max(rep.max_rotational_gap, gap(cf.mom[k].t_rot, cr.mom[k].t_rot));
      }
    }
    rep.max_gap = std::max({rep.max_density_gap, rep.max_velocity_gap,
                            rep.max_translational_gap, rep.max_rotational_gap});
  };

  StepOptions opts;
  opts.threads = threads;
  EvalContext cf = evaluate_state(mix, full, threads);
  EvalContext cr = evaluate_reduced(mix, reduced, threads);
  record(cf, cr);
  double t = 0.0;
  while (t < t_end) {
    const double dt = std::min(stable_dt(mix, cf, cfl), t_end - t);
    if (!(dt > 0.0)) break;
    step_relax(mix, full, dt, opts);
    step_relax_reduced(mix, reduced, dt, opts);
    t += dt;
    cf = evaluate_state(mix, full, threads);
    cr = evaluate_reduced(mix, reduced, threads);
    record(cf, cr);
    ++rep.steps;
  }
  return rep;
}

}  // namespace polykin
