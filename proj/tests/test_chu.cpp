#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "polykin/chu.hpp"
#include "polykin/common.hpp"
#include "polykin/dynamics.hpp"

using namespace polykin;
using polykin::test::box_grid;

namespace {

GaussianSpec iso_gaussian(double n, double mass, const Eigen::VectorXd& u, double temp, int l,
                          double theta) {
  GaussianSpec s;
  s.n = n;
  s.mass = mass;
  s.u = u;
  s.cov_v = (temp / mass) * Eigen::MatrixXd::Identity(u.size(), u.size());
  s.dof_internal = l;
  s.theta = theta;
  return s;
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

constexpr double kPi = 3.14159265358979323846;

// Mono + diatomic mixture in d = 1; same shape the relaxation tests use.
struct MonoDiatomic {
  Mixture mix;
  SystemState state;
};

MonoDiatomic make_mono_diatomic() {
  MonoDiatomic md;
  md.mix.d = 1;
  md.mix.species[0] = {1.0, 0, 1.2, 0.4, 0.3, 1.0};
  md.mix.species[1] = {1.5, 2, 1.0, 0.4, -0.5, 2.0};
  md.mix.coupling = {1.0, 0.35, 0.3, 0.18};
  REQUIRE(validate(md.mix).empty());

  auto g1 = box_grid(1, -12, 12, 48);
  // 32 internal points keep the eta-quadrature aliasing error near 1e-14.
  auto g2 = box_grid(1, -12, 12, 48, 2, 9.0, 32);

  md.state.species[0].f = project_attractor(iso_gaussian(1.0, 1.0, vec1(0.5), 1.2, 0, 0.0), g1).dist;
  md.state.species[0].f.species = 0;
  md.state.species[1].f =
      project_attractor(iso_gaussian(1.2, 1.5, vec1(-0.4), 0.8, 2, 1.3), g2).dist;
  md.state.species[1].f.species = 1;
  md.state.species[1].lambda_ten = 0.9 * Eigen::MatrixXd::Identity(1, 1);
  return md;
}

// Reduce a nodal derivative the same way reduce_species reduces a state.
void reduce_values(const PhaseGrid& grid, const std::vector<double>& full, double red_weight,
                   std::vector<double>& g_out, std::vector<double>& h_out) {
  const std::size_t nv = grid.n_vel();
  const std::size_t ni = grid.n_int();
  const double int_volume = grid.node_weight() / red_weight;
  g_out.assign(nv, 0.0);
  h_out.assign(nv, 0.0);
  for (std::size_t iv = 0; iv < nv; ++iv) {
    double s0 = 0.0, s2 = 0.0;
    for (std::size_t ie = 0; ie < ni; ++ie) {
      s0 += full[iv * ni + ie];
      s2 += grid.int_sq()[ie] * full[iv * ni + ie];
    }
    g_out[iv] = s0 * int_volume;
    h_out[iv] = s2 * int_volume;
  }
}

double weighted_l1_diff(const std::vector<double>& a, const std::vector<double>& b, double w) {
  REQUIRE(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return w * acc;
}

// Reduced cell initialized directly in product form: a projected velocity
// Gaussian with h = (l * theta / m) * g, the exact reduction of the matching
// full product Gaussian.
ReducedSpecies product_cell(const GaussianSpec& vspec, std::shared_ptr<const PhaseGrid> vgrid,
                            int l, double theta, const Eigen::MatrixXd& lambda_ten) {
  ReducedSpecies rs;
  GaussianSpec vel_only = vspec;
  vel_only.dof_internal = 0;
  rs.g = project_attractor(vel_only, vgrid).dist;
  if (l > 0) {
    rs.h.resize(rs.g.values.size());
    const double fac = l * theta / vspec.mass;
    for (std::size_t i = 0; i < rs.h.size(); ++i) rs.h[i] = fac * rs.g.values[i];
    rs.lambda_ten = lambda_ten;
  }
  return rs;
}

// Conserved totals of a 1-D field from raw nodal sums: number, momentum and
// energy (translational around zero plus internal), all integrated over x.
struct FieldTotals {
  std::array<double, 2> number{};
  double momentum = 0.0;
  double energy = 0.0;
};

FieldTotals field_totals(const Mixture& mix, const SpatialField1D& field) {
  FieldTotals tot;
  for (int k = 0; k < 2; ++k) {
    const PhaseGrid& gr = *field.grid[k];
    const int nv = static_cast<int>(gr.n_vel());
    const double w = gr.node_weight() * field.dx();
    const double m = mix.species[k].mass;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, sh = 0.0;
    for (int ix = 0; ix < field.n_cells; ++ix) {
      for (int iv = 0; iv < nv; ++iv) {
        const double c = gr.vel_coord(0, gr.vel_index(iv, 0));
        const double val = field.g[k][static_cast<std::size_t>(ix) * nv + iv];
        s0 += val;
        s1 += c * val;
        s2 += c * c * val;
      }
    }
    for (double v : field.h[k]) sh += v;
    tot.number[k] = w * s0;
    tot.momentum += m * w * s1;
    tot.energy += 0.5 * m * w * s2 + 0.5 * m * w * sh;
  }
  return tot;
}

}  // namespace

TEST_CASE("reducing a product Gaussian keeps moments and internal energy") {
  const double mass = 1.5, temp = 1.1, theta = 0.9, n = 1.3;
  const int l = 2;
  const double eta_span = 8.0 * std::sqrt(theta / mass);
  auto grid = box_grid(1, -10, 10, 40, l, eta_span, 24);
  SpeciesState full;
  full.f = project_attractor(iso_gaussian(n, mass, vec1(0.4), temp, l, theta), grid).dist;
  full.lambda_ten = 0.95 * Eigen::MatrixXd::Identity(1, 1);

  const ReducedSpecies red = reduce_species(full);
  CHECK(red.g.grid->dim_int() == 0);
  CHECK(red.g.grid->n_vel() == grid->n_vel());
  CHECK(red.h.size() == red.g.values.size());
  CHECK((red.lambda_ten - full.lambda_ten).cwiseAbs().maxCoeff() == 0.0);

  const MacroMoments mf = compute_moments(full.f, mass);
  const MacroMoments mr = reduced_moments(red, mass, l);
  CHECK(mr.n == doctest::Approx(mf.n).epsilon(1e-13));
  CHECK(mr.u[0] == doctest::Approx(mf.u[0]).epsilon(1e-13));
  CHECK(mr.t_tr == doctest::Approx(mf.t_tr).epsilon(1e-13));
  CHECK(mr.t_rot == doctest::Approx(mf.t_rot).epsilon(1e-12));
  CHECK(mr.t_rot == doctest::Approx(theta).epsilon(1e-9));

  // For a product Gaussian the ratio h/g is the same constant l*theta/m at
  // every velocity node, including deep tails.
  const double fac = l * theta / mass;
  for (std::size_t iv = 0; iv < red.g.values.size(); ++iv) {
    CHECK(red.h[iv] == doctest::Approx(fac * red.g.values[iv]).epsilon(1e-9));
  }
}

TEST_CASE("reduction of a monatomic species is the identity") {
  auto grid = box_grid(1, -8, 8, 32);
  SpeciesState full;
  full.f = project_attractor(iso_gaussian(0.8, 1.0, vec1(0.3), 1.0, 0, 0.0), grid).dist;
  // Break symmetry so value equality is a real statement.
  Lcg64 rng(2024);
  for (double& v : full.f.values) v *= 1.0 + 0.2 * rng.next_unit();

  const ReducedSpecies red = reduce_species(full);
  CHECK(red.g.grid.get() == grid.get());
  CHECK(red.g.values == full.f.values);
  CHECK(red.h.empty());

  CHECK(velocity_grid_of(grid).get() == grid.get());
  auto poly = box_grid(1, -8, 8, 32, 2, 6.0, 16);
  auto stripped = velocity_grid_of(poly);
  CHECK(stripped->dim_int() == 0);
  CHECK(stripped->n_vel() == poly->n_vel());
  CHECK(stripped->node_weight() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("two monatomic species: the reduced path is the full path bitwise") {
  Mixture mix;
  mix.d = 1;
  mix.species[0] = {1.0, 0, 1.2, 0.4, 0.3, 1.0};
  mix.species[1] = {1.5, 0, 1.0, 0.4, -0.5, 1.0};
  mix.coupling = {1.0, 0.35, 0.3, 0.18};
  REQUIRE(validate(mix).empty());

  SystemState full;
  full.species[0].f =
      project_attractor(iso_gaussian(1.0, 1.0, vec1(0.5), 1.2, 0, 0.0), box_grid(1, -12, 12, 48))
          .dist;
  full.species[1].f =
      project_attractor(iso_gaussian(1.2, 1.5, vec1(-0.4), 0.8, 0, 0.0), box_grid(1, -12, 12, 48))
          .dist;
  full.species[1].f.species = 1;

  ReducedState red = reduce_state(full);
  const EvalContext cf = evaluate_state(mix, full);
  const EvalContext cr = evaluate_reduced(mix, red);
  const Derivative df = collision_rhs(mix, full, cf);
  const ReducedDerivative dr = reduced_collision_rhs(mix, red, cr);
  CHECK(dr.dg[0] == df.df[0]);
  CHECK(dr.dg[1] == df.df[1]);
  CHECK(dr.dh[0].empty());
  CHECK(dr.dh[1].empty());

  const double dt = stable_dt(mix, cf, 0.5);
  SystemState full_stepped = full;
  step_relax(mix, full_stepped, dt);
  step_relax_reduced(mix, red, dt);
  CHECK(red.species[0].g.values == full_stepped.species[0].f.values);
  CHECK(red.species[1].g.values == full_stepped.species[1].f.values);
}

TEST_CASE("reduced relaxation matches the reduction of the full right-hand side") {
  MonoDiatomic md = make_mono_diatomic();
  const ReducedState red = reduce_state(md.state);
  const EvalContext cf = evaluate_state(md.mix, md.state);
  const EvalContext cr = evaluate_reduced(md.mix, red);
  const Derivative df = collision_rhs(md.mix, md.state, cf);
  const ReducedDerivative dr = reduced_collision_rhs(md.mix, red, cr);

  // Monatomic species: only the regrouped species-2 moment sums separate the
  // two closure evaluations.
  const double w1 = red.species[0].g.grid->node_weight();
  CHECK(weighted_l1_diff(dr.dg[0], df.df[0], w1) <= 1e-12);

  // Diatomic species: the reduced rhs must equal the reduction of the full
  // rhs up to the eta-quadrature of the projected attractors.
  std::vector<double> dg_expected, dh_expected;
  const double w2 = red.species[1].g.grid->node_weight();
  reduce_values(*md.state.species[1].f.grid, df.df[1], w2, dg_expected, dh_expected);
  CHECK(weighted_l1_diff(dr.dg[1], dg_expected, w2) <= 1e-11);
  CHECK(weighted_l1_diff(dr.dh[1], dh_expected, w2) <= 1e-11);

  REQUIRE(dr.dlam[1].size() > 0);
  CHECK((dr.dlam[1] - df.dlam[1]).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(dr.dlam[0].size() == 0);
}

TEST_CASE("reduced internal-energy attractors scale with their temperature target") {
  // Species 2 sees only its cross attractor (nu_self = 0 isolates the term);
  // with m2 = 1, l2 = 2 and Theta_21 = 2 the h attractor is 4 times the g one.
  Mixture mix;
  mix.d = 1;
  mix.species[0] = {1.0, 0, 0.0, 0.0, 0.0, 1.0};
  mix.species[1] = {1.0, 2, 0.0, 0.5, 0.0, 1.0};
  mix.coupling = {1.0, 0.35, 0.3, 0.0};

  auto vgrid = box_grid(1, -10, 10, 40);
  ReducedState state;
  state.species[0] = product_cell(iso_gaussian(0.8, 1.0, vec1(0.2), 1.0, 0, 0.0), vgrid, 0, 0.0,
                                  Eigen::MatrixXd());
  state.species[1] = product_cell(iso_gaussian(1.0, 1.0, vec1(0.0), 1.0, 2, 2.0), vgrid, 2, 2.0,
                                  Eigen::MatrixXd());
  state.species[1].g.species = 1;
  // Tensor state equal to the discrete P/n makes Lambda_2 = T_2^t exactly, so
  // Theta_2 equals the discrete T_2^rot and Theta_21 = Theta_2 (l1 = 0).
  // The product construction h = 4 g makes that discrete T_2^rot equal 2 up
  // to rounding, since the projected g integrates to n exactly.
  const MacroMoments m2 = reduced_moments(state.species[1], 1.0, 2);
  state.species[1].lambda_ten = m2.pressure / m2.n;

  const EvalContext ctx = evaluate_reduced(mix, state);
  CHECK(ctx.inter.theta21 == ctx.tt[1].theta);
  const double fac = 2.0 * ctx.inter.theta21 / 1.0;
  CHECK(fac == doctest::Approx(4.0).epsilon(1e-12));

  const ReducedDerivative der = reduced_collision_rhs(mix, state, ctx);
  GaussianSpec cross_v = ctx.attractors.cross[1];
  cross_v.dof_internal = 0;
  const ProjectionResult mv = project_attractor(cross_v, vgrid);
  const double rc = 0.5 * ctx.mom[0].n;
  for (std::size_t i = 0; i < der.dh[1].size(); ++i) {
    CHECK(der.dh[1][i] ==
          doctest::Approx(rc * (fac * mv.dist.values[i] - state.species[1].h[i])).epsilon(1e-13));
    CHECK(der.dg[1][i] ==
          doctest::Approx(rc * (mv.dist.values[i] - state.species[1].g.values[i])).epsilon(1e-13));
  }
}

TEST_CASE("evolving then reducing equals reducing then evolving") {
  MonoDiatomic md = make_mono_diatomic();
  const EvalContext c0 = evaluate_state(md.mix, md.state);
  const double dt = stable_dt(md.mix, c0, 0.5);

  SystemState full_stepped = md.state;
  step_relax(md.mix, full_stepped, dt);
  const ReducedState evolve_then_reduce = reduce_state(full_stepped);

  ReducedState reduce_then_evolve = reduce_state(md.state);
  step_relax_reduced(md.mix, reduce_then_evolve, dt);

  for (int k = 0; k < 2; ++k) {
    const double w = evolve_then_reduce.species[k].g.grid->node_weight();
    CHECK(weighted_l1_diff(evolve_then_reduce.species[k].g.values,
                           reduce_then_evolve.species[k].g.values, w) <= 1e-10);
    if (!evolve_then_reduce.species[k].h.empty()) {
      CHECK(weighted_l1_diff(evolve_then_reduce.species[k].h, reduce_then_evolve.species[k].h,
                             w) <= 1e-10);
      CHECK((evolve_then_reduce.species[k].lambda_ten -
             reduce_then_evolve.species[k].lambda_ten)
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("full and reduced runs stay macroscopically identical") {
  MonoDiatomic md = make_mono_diatomic();
  const EquivalenceReport rep =
      full_vs_reduced_check(md.mix, md.state, reduce_state(md.state), 2.0, 0.5);
  CHECK(rep.steps >= 5);
  CHECK(rep.max_gap <= 1e-8);

  // At global equilibrium the two models agree to rounding.
  MonoDiatomic eq = make_mono_diatomic();
  const double t_eq = 1.1, u_eq = 0.2;
  eq.state.species[0].f = project_attractor(iso_gaussian(1.0, 1.0, vec1(u_eq), t_eq, 0, 0.0),
                                            md.state.species[0].f.grid)
                              .dist;
  eq.state.species[1].f = project_attractor(iso_gaussian(1.2, 1.5, vec1(u_eq), t_eq, 2, t_eq),
                                            md.state.species[1].f.grid)
                              .dist;
  eq.state.species[1].f.species = 1;
  eq.state.species[1].lambda_ten = t_eq * Eigen::MatrixXd::Identity(1, 1);
  const EquivalenceReport rep_eq =
      full_vs_reduced_check(eq.mix, eq.state, reduce_state(eq.state), 1.0, 0.5);
  CHECK(rep_eq.max_gap <= 1e-12);
}

TEST_CASE("uniform fields are fixed points of transport") {
  MonoDiatomic md = make_mono_diatomic();
  const ReducedState cell = reduce_state(md.state);
  std::array<std::shared_ptr<const PhaseGrid>, 2> grids = {cell.species[0].g.grid,
                                                           cell.species[1].g.grid};
  SpatialField1D field = allocate_field(grids, 6, 0.0, 1.0, Boundary::Periodic);
  for (int ix = 0; ix < field.n_cells; ++ix) field.store_cell(ix, cell);

  TransportOptions opts;
  opts.threads = 3;
  const double dt = 0.9 * transport_stable_dt(md.mix, field, opts);

  SpatialField1D advected = field;
  advect_field(advected, dt, opts);
  CHECK(advected.g[0] == field.g[0]);
  CHECK(advected.g[1] == field.g[1]);
  CHECK(advected.h[1] == field.h[1]);
  // The tensor round-trips through n * Lambda / n, so equality is to rounding.
  for (int ix = 0; ix < field.n_cells; ++ix) {
    CHECK((advected.lambda_ten[1][ix] - field.lambda_ten[1][ix]).cwiseAbs().maxCoeff() <= 1e-15);
  }

  // A full split step keeps the field uniform: every cell computes the same
  // relaxation, so all cells stay bitwise equal to cell 0.
  const TransportStepReport rep = step_transport(md.mix, field, dt, opts);
  CHECK(rep.clipped_density[0] == 0.0);
  CHECK(rep.clipped_density[1] == 0.0);
  CHECK(rep.theta21.evaluations == 2 * field.n_cells);
  CHECK(rep.theta21.violations == 0);
  for (int k = 0; k < 2; ++k) {
    const int nv = field.n_vel(k);
    for (int ix = 1; ix < field.n_cells; ++ix) {
      for (int iv = 0; iv < nv; ++iv) {
        CHECK(field.g[k][static_cast<std::size_t>(ix) * nv + iv] ==
              field.g[k][static_cast<std::size_t>(iv)]);
      }
    }
  }

  // And the per-cell relaxation is the homogeneous reduced step (the tensor
  // round-trip perturbs the last bits, nothing more).
  ReducedState direct = cell;
  step_relax_reduced(md.mix, direct, dt);
  const ReducedState from_field = field.cell_state(0);
  for (int k = 0; k < 2; ++k) {
    const double w = direct.species[k].g.grid->node_weight();
    CHECK(weighted_l1_diff(direct.species[k].g.values, from_field.species[k].g.values, w) <=
          1e-13);
  }
}

TEST_CASE("free streaming returns the initial profile at the advertised orders") {
  // Velocity nodes at -1 and +1 complete one lap of the periodic unit domain
  // at t = 1, so the exact solution returns to the initial data and the whole
  // discrepancy is scheme dissipation.
  auto run = [&](int nx, bool second_order) {
    auto vgrid = box_grid(1, -2, 2, 2);
    SpatialField1D field =
        allocate_field({vgrid, vgrid}, nx, 0.0, 1.0, Boundary::Periodic);
    const int nv = 2;
    for (int k = 0; k < 2; ++k) {
      for (int ix = 0; ix < nx; ++ix) {
        const double q = 1.0 + 0.5 * std::sin(2.0 * kPi * field.x_center(ix));
        for (int iv = 0; iv < nv; ++iv) field.g[k][static_cast<std::size_t>(ix) * nv + iv] = q;
      }
    }
    const std::array<std::vector<double>, 2> initial = field.g;
    const std::array<double, 2> mass0 = field_density_totals(field);

    TransportOptions opts;
    opts.threads = 2;
    opts.second_order = second_order;
    const double bound = opts.cfl_advection * field.dx() / 1.0;
    const int n_steps = static_cast<int>(std::ceil(1.0 / bound));
    const double dt = 1.0 / n_steps;
    for (int s = 0; s < n_steps; ++s) advect_field(field, dt, opts);

    const std::array<double, 2> mass1 = field_density_totals(field);
    CHECK(std::abs(mass1[0] - mass0[0]) <= 1e-12 * mass0[0]);
    CHECK(std::abs(mass1[1] - mass0[1]) <= 1e-12 * mass0[1]);

    double err = 0.0;
    for (std::size_t i = 0; i < field.g[0].size(); ++i) {
      err += std::abs(field.g[0][i] - initial[0][i]);
    }
    return err * field.dx() / nv;
  };

  const double e1_coarse = run(64, false);
  const double e1_fine = run(128, false);
  const double ratio1 = e1_coarse / e1_fine;
  CHECK(ratio1 >= 1.6);
  CHECK(ratio1 <= 2.6);

  const double e2_coarse = run(64, true);
  const double e2_fine = run(128, true);
  const double ratio2 = e2_coarse / e2_fine;
  CHECK(ratio2 >= 2.6);
  CHECK(ratio2 <= 5.0);
  CHECK(e2_fine < e1_fine);
}

TEST_CASE("transport guards its stability bounds and boundary names") {
  CHECK(boundary_from_string("periodic") == Boundary::Periodic);
  CHECK(boundary_from_string("outflow") == Boundary::Outflow);
  CHECK(to_string(Boundary::Outflow) == "outflow");
  CHECK_THROWS_AS(boundary_from_string("reflecting"), std::invalid_argument);

  MonoDiatomic md = make_mono_diatomic();
  const ReducedState cell = reduce_state(md.state);
  SpatialField1D field = allocate_field({cell.species[0].g.grid, cell.species[1].g.grid}, 8, 0.0,
                                        1.0, Boundary::Periodic);
  for (int ix = 0; ix < field.n_cells; ++ix) field.store_cell(ix, cell);

  TransportOptions opts;
  const double dt_adv = opts.cfl_advection * field.dx() / 12.0;  // max node speed is 11.875
  CHECK_THROWS_AS(advect_field(field, 10.0 * dt_adv, opts), std::invalid_argument);
  CHECK_THROWS_AS(step_transport(md.mix, field, 10.0 * dt_adv, opts), std::invalid_argument);
  TransportOptions tight = opts;
  tight.cfl_relaxation = 1e-7;
  CHECK_THROWS_AS(step_transport(md.mix, field, 0.9 * dt_adv, tight), std::invalid_argument);
  CHECK_THROWS_AS(field.cell_state(99), std::out_of_range);

  // Outflow lets mass leave but never creates it.
  auto vgrid = box_grid(1, -2, 2, 4);
  SpatialField1D out = allocate_field({vgrid, vgrid}, 32, 0.0, 1.0, Boundary::Outflow);
  for (int k = 0; k < 2; ++k) {
    for (int ix = 0; ix < 32; ++ix) {
      const double x = out.x_center(ix);
      const double q = std::exp(-80.0 * (x - 0.8) * (x - 0.8));
      for (int iv = 0; iv < 4; ++iv) out.g[k][static_cast<std::size_t>(ix) * 4 + iv] = q;
    }
  }
  const double before = field_density_totals(out)[0];
  const double dt = opts.cfl_advection * out.dx() / 1.5;
  // Long enough for even the slowest node (|v| = 0.5) to carry the bump out.
  for (int s = 0; s < 250; ++s) advect_field(out, dt, opts);
  const double after = field_density_totals(out)[0];
  CHECK(after <= before * (1.0 + 1e-12));
  CHECK(after < 0.01 * before);
}

TEST_CASE("two-state transport conserves mass, momentum and energy") {
  MonoDiatomic md = make_mono_diatomic();
  auto vgrid = box_grid(1, -12, 12, 48);
  SpatialField1D field = allocate_field({vgrid, vgrid}, 24, 0.0, 2.0, Boundary::Periodic);

  ReducedState left, right;
  left.species[0] = product_cell(iso_gaussian(1.0, 1.0, vec1(0.0), 1.2, 0, 0.0), vgrid, 0, 0.0,
                                 Eigen::MatrixXd());
  left.species[1] = product_cell(iso_gaussian(1.2, 1.5, vec1(0.0), 1.0, 2, 1.3), vgrid, 2, 1.3,
                                 0.9 * Eigen::MatrixXd::Identity(1, 1));
  right.species[0] = product_cell(iso_gaussian(0.5, 1.0, vec1(0.0), 0.9, 0, 0.0), vgrid, 0, 0.0,
                                  Eigen::MatrixXd());
  right.species[1] = product_cell(iso_gaussian(0.6, 1.5, vec1(0.0), 0.8, 2, 1.0), vgrid, 2, 1.0,
                                  0.85 * Eigen::MatrixXd::Identity(1, 1));
  for (int ix = 0; ix < field.n_cells; ++ix) {
    field.store_cell(ix, ix < field.n_cells / 2 ? left : right);
  }

  const FieldTotals before = field_totals(md.mix, field);
  TransportOptions opts;
  opts.threads = 2;
  opts.second_order = true;
  Theta21Audit audit;
  double clipped = 0.0;
  for (int s = 0; s < 30; ++s) {
    const double dt = transport_stable_dt(md.mix, field, opts);
    const TransportStepReport rep = step_transport(md.mix, field, dt, opts);
    audit.evaluations += rep.theta21.evaluations;
    audit.violations += rep.theta21.violations;
    clipped += rep.clipped_density[0] + rep.clipped_density[1];
  }
  const FieldTotals after = field_totals(md.mix, field);

  CHECK(std::abs(after.number[0] - before.number[0]) <= 1e-12 * before.number[0]);
  CHECK(std::abs(after.number[1] - before.number[1]) <= 1e-12 * before.number[1]);
  CHECK(std::abs(after.momentum - before.momentum) <= 1e-10);
  CHECK(std::abs(after.energy - before.energy) <= 1e-9 * before.energy);
  CHECK(clipped == 0.0);

  CHECK(audit.evaluations == 2LL * field.n_cells * 30);
  CHECK(audit.violations == 0);

  double h_min = 0.0;
  for (double v : field.h[1]) h_min = std::min(h_min, v);
  CHECK(h_min >= 0.0);

  const auto mom = cell_moments(md.mix, field, 0);
  CHECK(mom[0].n > 0.0);
  CHECK(mom[1].t_rot > 0.0);
}

TEST_CASE("the tensor state rides along with the flow") {
  auto vgrid = box_grid(1, -7, 7, 8);
  SpatialField1D field = allocate_field({vgrid, vgrid}, 8, 0.0, 1.0, Boundary::Periodic);
  const int nv = 8;

  // Uniform drifting gas for both species; species 2 carries a sinusoidal
  // tensor profile that should be upwinded at the discrete mean velocity.
  const DiscreteDistribution drift =
      project_attractor(iso_gaussian(1.0, 1.0, vec1(0.5), 1.0, 0, 0.0), vgrid).dist;
  std::vector<Eigen::MatrixXd> lam0(field.n_cells);
  for (int ix = 0; ix < field.n_cells; ++ix) {
    ReducedState cell;
    cell.species[0].g = drift;
    cell.species[1].g = drift;
    cell.species[1].g.species = 1;
    cell.species[1].h.assign(nv, 0.4);
    lam0[ix] = (1.0 + 0.25 * std::sin(2.0 * kPi * field.x_center(ix))) *
               Eigen::MatrixXd::Identity(1, 1);
    cell.species[1].lambda_ten = lam0[ix];
    field.store_cell(ix, cell);
  }

  double nsum = 0.0, usum = 0.0;
  for (int iv = 0; iv < nv; ++iv) {
    nsum += drift.values[iv];
    usum += vgrid->vel_coord(0, iv) * drift.values[iv];
  }
  const double u_disc = usum / nsum;
  REQUIRE(u_disc > 0.0);

  TransportOptions opts;
  const double dt = 0.8 * opts.cfl_advection * field.dx() / 7.0;
  advect_field(field, dt, opts);

  const double lam = dt / field.dx();
  for (int ix = 0; ix < field.n_cells; ++ix) {
    const int prev = (ix + field.n_cells - 1) % field.n_cells;
    const double expected =
        (nsum * lam0[ix](0, 0) -
         lam * (u_disc * (nsum * lam0[ix](0, 0)) - u_disc * (nsum * lam0[prev](0, 0)))) /
        nsum;
    CHECK(field.lambda_ten[1][ix](0, 0) == doctest::Approx(expected).epsilon(1e-13));
  }
  // The uniform g itself is untouched, so the density the tensor was divided
  // by is the original one.
  for (int ix = 0; ix < field.n_cells; ++ix) {
    for (int iv = 0; iv < nv; ++iv) {
      CHECK(field.g[1][static_cast<std::size_t>(ix) * nv + iv] == drift.values[iv]);
    }
  }
}
