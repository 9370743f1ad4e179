#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "polykin/attractors.hpp"
#include "polykin/grid.hpp"

using namespace polykin;
using polykin::test::box_grid;
using polykin::test::simpson;

namespace {

GaussianSpec iso_spec(int d, double n, double mass, double u0, double temp, int l = 0,
                      double theta = 1.0) {
  GaussianSpec s;
  s.n = n;
  s.mass = mass;
  s.u = Eigen::VectorXd::Constant(d, u0);
  s.cov_v = (temp / mass) * Eigen::MatrixXd::Identity(d, d);
  s.dof_internal = l;
  s.theta = theta;
  return s;
}

}  // namespace

TEST_CASE("grid construction sanity and argument errors") {
  auto g = box_grid(2, -4.0, 4.0, 16, 2, 5.0, 12);
  CHECK(g->dim_v() == 2);
  CHECK(g->dim_int() == 2);
  CHECK(g->n_vel() == 256);
  CHECK(g->n_int() == 144);
  CHECK(g->node_weight() ==
        doctest::Approx(0.5 * 0.5 * (10.0 / 12) * (10.0 / 12)).epsilon(1e-14));

  // Internal coordinates mirror exactly, including squared values.
  for (int i = 0; i < 12; ++i) {
    CHECK(g->int_coord(0, 11 - i) == -g->int_coord(0, i));
  }
  for (std::size_t ie = 0; ie < g->n_int(); ++ie) {
    CHECK(g->int_sq()[g->int_mirror(ie)] == g->int_sq()[ie]);
  }

  CHECK_THROWS_AS(box_grid(0, -1, 1, 8), std::invalid_argument);
  CHECK_THROWS_AS(box_grid(4, -1, 1, 8), std::invalid_argument);
  CHECK_THROWS_AS(box_grid(1, 1, -1, 8), std::invalid_argument);
  CHECK_THROWS_AS(box_grid(1, -1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(box_grid(1, -1, 1, 8, 1, -2.0, 8), std::invalid_argument);
}

TEST_CASE("moments of a projected Maxwellian: density exact, u and T at quadrature level") {
  const double mass = 1.3, temp = 0.9, u0 = 0.4, n0 = 0.7, theta0 = 1.1;
  const double sd = std::sqrt(temp / mass);
  auto g = box_grid(1, u0 - 8 * sd, u0 + 8 * sd, 48, 2, 8.0 * std::sqrt(theta0 / mass), 24);
  auto proj = project_attractor(iso_spec(1, n0, mass, u0, temp, 2, theta0), g);
  CHECK(std::abs(proj.scale - 1.0) <= 1e-8);

  MacroMoments mom = compute_moments(proj.dist, mass);
  CHECK(std::abs(mom.n - n0) <= 1e-13 * n0);
  CHECK(std::abs(mom.u[0] - u0) <= 1e-8);
  CHECK(std::abs(mom.t_tr - temp) <= 1e-8 * temp);
  CHECK(std::abs(mom.t_rot - theta0) <= 1e-8 * theta0);

  // eta-mean of even data is exactly zero by mirror pairing.
  CHECK(mom.eta_mean[0] == 0.0);
  CHECK(mom.eta_mean[1] == 0.0);

  // trace(P) = d * n * T_tr is an identity of the same sums.
  CHECK(std::abs(mom.pressure.trace() - 1 * mom.n * mom.t_tr) <= 1e-12 * mom.pressure.trace());
}

TEST_CASE("moments: shifted anisotropic Gaussian in d = 2") {
  const double mass = 2.0;
  GaussianSpec s;
  s.n = 1.4;
  s.mass = mass;
  s.u = Eigen::Vector2d(0.3, -0.2);
  Eigen::Matrix2d temp;
  temp << 1.2, 0.3, 0.3, 0.8;  // temperature tensor; covariance is temp/mass
  s.cov_v = temp / mass;
  s.dof_internal = 0;
  const double sdmax = std::sqrt(1.2 / mass);
  auto g = box_grid(2, -0.3 - 8 * sdmax, 0.3 + 8 * sdmax, 64);
  auto proj = project_attractor(s, g);
  MacroMoments mom = compute_moments(proj.dist, mass);
  CHECK(std::abs(mom.n - 1.4) <= 1e-13 * 1.4);
  CHECK((mom.u - s.u).norm() <= 1e-9);
  CHECK((mom.pressure / mom.n - temp).norm() <= 1e-8);
  CHECK(std::abs(mom.t_tr - 1.0) <= 1e-8);  // trace(temp)/d = (1.2+0.8)/2
}

TEST_CASE("eta-even data keeps eta-mean bitwise zero, any values") {
  auto g = box_grid(1, -3, 3, 12, 2, 4.0, 10);
  DiscreteDistribution f;
  f.grid = g;
  f.values.resize(g->size());
  // arbitrary v-dependence times an even eta profile
  for (std::size_t iv = 0; iv < g->n_vel(); ++iv) {
    for (std::size_t ie = 0; ie < g->n_int(); ++ie) {
      f.values[iv * g->n_int() + ie] =
          (0.2 + 0.13 * iv) * std::exp(-0.37 * g->int_sq()[ie]);
    }
  }
  MacroMoments mom = compute_moments(f, 1.0);
  CHECK(mom.eta_mean[0] == 0.0);
  CHECK(mom.eta_mean[1] == 0.0);
}

TEST_CASE("moments against a same-box Simpson oracle converge at 2nd order") {
  // Quadrature error of the midpoint sums relative to the exact integral on
  // the same box; the comparison target removes the fixed tail-truncation
  // offset so the pure Delta-v^2 behavior is visible.
  const double mass = 1.0, temp = 1.0, u0 = 0.3, n0 = 1.0;
  const double lo = u0 - 4.0, hi = u0 + 4.3;  // deliberately off-center box
  auto density = [&](double v) {
    return n0 * std::sqrt(mass / (2 * M_PI * temp)) * std::exp(-mass * (v - u0) * (v - u0) / (2 * temp));
  };
  const double i0 = simpson(density, lo, hi, 20000);
  const double i1 = simpson([&](double v) { return v * density(v); }, lo, hi, 20000);
  const double u_box = i1 / i0;
  const double i2 = simpson([&](double v) { return (v - u_box) * (v - u_box) * density(v); },
                            lo, hi, 20000);
  const double t_box = mass * i2 / i0;

  double err[3];
  int idx = 0;
  for (int nv : {16, 32, 64}) {
    auto g = box_grid(1, lo, hi, nv);
    auto proj = project_attractor(iso_spec(1, n0, mass, u0, temp), g);
    MacroMoments mom = compute_moments(proj.dist, mass);
    err[idx++] = std::abs(mom.t_tr - t_box);
  }
  const double r1 = err[0] / err[1];
  const double r2 = err[1] / err[2];
  CHECK(r1 >= 3.4);
  CHECK(r1 <= 4.8);
  CHECK(r2 >= 3.4);
  CHECK(r2 <= 4.8);
}

TEST_CASE("projection: renormalization and coverage guards") {
  auto g = box_grid(1, -6, 6, 32);
  auto proj = project_attractor(iso_spec(1, 2.5, 1.0, 0.0, 1.0), g);
  MacroMoments mom = compute_moments(proj.dist, 1.0);
  CHECK(std::abs(mom.n - 2.5) <= 1e-13 * 2.5);
  CHECK(proj.raw_density > 0.0);

  // Attractor far outside the grid: zero projected density.
  CHECK_THROWS_AS(project_attractor(iso_spec(1, 1.0, 1.0, 500.0, 0.01), g),
                  std::runtime_error);

  // Mismatched internal DOF is an argument error.
  auto g2 = box_grid(1, -6, 6, 32, 2, 4.0, 8);
  CHECK_THROWS_AS(project_attractor(iso_spec(1, 1.0, 1.0, 0.0, 1.0), g2),
                  std::invalid_argument);
}

TEST_CASE("lambda/theta maps") {
  CHECK(lambda_from_theta(1.0, 2.0, 1.0, 3, 2) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(lambda_from_theta(0.7, 123.0, 456.0, 3, 0) == 0.7);
  CHECK_THROWS_AS(lambda_from_theta(1.0, 1.0, 10.0, 3, 2), std::domain_error);

  const double lam = lambda_from_theta(1.0, 2.0, 1.3, 2, 2);
  CHECK(theta_from_lambda(1.0, 2.0, lam, 2, 2) == doctest::Approx(1.3).epsilon(1e-14));
  CHECK_THROWS_AS(theta_from_lambda(1.0, 0.1, 5.0, 2, 2), std::domain_error);
  CHECK_THROWS_AS(theta_from_lambda(1.0, 1.0, 1.0, 3, 0), std::invalid_argument);
}

TEST_CASE("moments: degenerate distribution rejected") {
  auto g = box_grid(1, -1, 1, 8);
  DiscreteDistribution f;
  f.grid = g;
  f.values.assign(g->size(), 0.0);
  CHECK_THROWS_AS(compute_moments(f, 1.0), std::domain_error);
}

TEST_CASE("threaded moment reduction matches serial to tight tolerance") {
  auto g = box_grid(2, -5, 5, 24, 2, 5.0, 10);
  auto proj = project_attractor(iso_spec(2, 1.1, 1.0, 0.1, 0.8, 2, 0.9), g);
  MacroMoments a = compute_moments(proj.dist, 1.0, 1);
  MacroMoments b = compute_moments(proj.dist, 1.0, 4);
  CHECK(std::abs(a.n - b.n) <= 1e-14 * a.n);
  CHECK((a.u - b.u).norm() <= 1e-14);
  CHECK(std::abs(a.t_tr - b.t_tr) <= 1e-14);
  CHECK(std::abs(a.t_rot - b.t_rot) <= 1e-14);
}
