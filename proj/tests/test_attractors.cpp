#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "polykin/attractors.hpp"
#include "polykin/common.hpp"

using namespace polykin;
using polykin::test::box_grid;

namespace {

Eigen::MatrixXd random_spd(Lcg64& rng, int d, double trace_target) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd m = a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(d, d);
  return m * (trace_target / m.trace());
}

}  // namespace

TEST_CASE("eval_gaussian: closed-form values") {
  GaussianSpec s;
  s.n = 1.0;
  s.mass = 1.0;
  s.u = Eigen::VectorXd::Zero(1);
  s.cov_v = Eigen::MatrixXd::Identity(1, 1);
  s.dof_internal = 0;
  Eigen::VectorXd v(1), eta(0);
  v[0] = 1.0;
  CHECK(eval_gaussian(s, v, eta) == doctest::Approx(0.24197072451914337).epsilon(1e-14));
  v[0] = 0.0;
  CHECK(eval_gaussian(s, v, eta) == doctest::Approx(0.3989422804014327).epsilon(1e-14));

  // d = 3 isotropic with internal block: value at the center equals the
  // closed-form normalization n (m/(2 pi T))^{3/2} (m/(2 pi theta))^{l/2}.
  GaussianSpec s3;
  s3.n = 0.7;
  s3.mass = 1.5;
  s3.u = Eigen::VectorXd::Zero(3);
  s3.cov_v = (2.0 / 1.5) * Eigen::MatrixXd::Identity(3, 3);
  s3.dof_internal = 2;
  s3.theta = 0.8;
  Eigen::VectorXd v3 = Eigen::VectorXd::Zero(3), eta2 = Eigen::VectorXd::Zero(2);
  const double expect = 0.7 * std::pow(1.5 / (2 * M_PI * 2.0), 1.5) *
                        std::pow(1.5 / (2 * M_PI * 0.8), 1.0);
  CHECK(eval_gaussian(s3, v3, eta2) == doctest::Approx(expect).epsilon(1e-13));

  // Gaussian moments recovered by quadrature: covariance integrates to cov_v,
  // internal second moment to l*theta/m per particle.
  auto g = box_grid(3, -9, 9, 28, 2, 8.0 * std::sqrt(0.8 / 1.5), 20);
  auto proj = project_attractor(s3, g);
  MacroMoments mom = compute_moments(proj.dist, 1.5);
  CHECK(std::abs(mom.n - 0.7) <= 1e-13);
  CHECK((mom.pressure / mom.n / 1.5 - s3.cov_v).norm() <= 1e-7);
  CHECK(std::abs(mom.t_rot - 0.8) <= 1e-7);
}

TEST_CASE("gaussian evaluator guards") {
  GaussianSpec s;
  s.n = 1.0;
  s.mass = 1.0;
  s.u = Eigen::VectorXd::Zero(2);
  s.cov_v = Eigen::MatrixXd::Identity(2, 2);
  s.cov_v(0, 1) = 0.3;  // asymmetric
  CHECK_THROWS_AS(GaussianEvaluator{s}, std::invalid_argument);

  s.cov_v << 1.0, 2.0, 2.0, 1.0;  // symmetric but indefinite
  CHECK_THROWS_AS(GaussianEvaluator{s}, std::runtime_error);

  s.cov_v << 1.0, 0.0, 0.0, 1e-16;  // pivot below 1e-13 * trace
  CHECK_THROWS_AS(GaussianEvaluator{s}, std::runtime_error);
}

TEST_CASE("spd_check") {
  Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  SpdReport r = spd_check(id);
  CHECK(r.spd);
  CHECK(r.min_eigenvalue == doctest::Approx(1.0).epsilon(1e-14));

  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  r = spd_check(bad);
  CHECK(!r.spd);
  CHECK(r.min_eigenvalue == doctest::Approx(-1.0).epsilon(1e-12));

  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(spd_check(asym), std::invalid_argument);
}

TEST_CASE("lambda_es: limits, hand value, eigenvalue law, guards") {
  Eigen::Matrix3d lam_ten = Eigen::Vector3d(3, 2, 1).asDiagonal();
  const double lam = 2.0;

  CHECK((lambda_es(lam, lam_ten, 0.0) - lam * Eigen::Matrix3d::Identity()).norm() <= 1e-14);
  CHECK((lambda_es(lam, lam_ten, 1.0) - lam_ten).norm() <= 1e-14);

  Eigen::MatrixXd es = lambda_es(lam, lam_ten, 0.5);
  CHECK(es(0, 0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(es(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(es(2, 2) == doctest::Approx(1.5).epsilon(1e-14));

  CHECK_THROWS_AS(lambda_es(lam, lam_ten, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(lambda_es(lam, lam_ten, -0.75), std::invalid_argument);  // < -1/(d-1)
  CHECK_THROWS_AS(lambda_es(1.0, lam_ten, 0.5), std::invalid_argument);    // trace mismatch
  Eigen::Matrix3d indef = Eigen::Vector3d(4, 3, -1).asDiagonal();
  CHECK_THROWS_AS(lambda_es(2.0, indef, 0.5), std::domain_error);

  // Eigenvalues follow tau_i = (1-mu)*Lambda + mu*lambda_i and stay positive
  // across the admissible mu range.
  Lcg64 rng(555ULL);
  for (int i = 0; i < 2000; ++i) {
    const int d = 2 + static_cast<int>(rng.next_below(2));
    const double lam_s = rng.uniform(0.5, 2.0);
    Eigen::MatrixXd lt = random_spd(rng, d, d * lam_s);
    const double mu = rng.uniform(-1.0 / (d - 1), 1.0);
    Eigen::MatrixXd e = lambda_es(lam_s, lt, mu);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s_lt(lt), s_e(e);
    Eigen::VectorXd expect = ((1.0 - mu) * lam_s) * Eigen::VectorXd::Ones(d) +
                             mu * s_lt.eigenvalues();
    std::sort(expect.data(), expect.data() + d);
    CHECK((s_e.eigenvalues() - expect).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(s_e.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("t_tensor: hand value and positivity") {
  Eigen::Matrix3d p_over_n = Eigen::Matrix3d::Identity();
  p_over_n(0, 1) = p_over_n(1, 0) = 0.5;
  Eigen::MatrixXd t = t_tensor(1.0, p_over_n, 3, 2);
  CHECK(t(0, 1) == doctest::Approx(0.3).epsilon(1e-14));
  // isotropic pressure diagonal equal to T_rot: diagonal is T_equ = 1
  CHECK(t(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t.trace() == doctest::Approx(3.0).epsilon(1e-14));

  // anisotropic diagonal: convex combination of (P/n)_ii and T_rot
  Eigen::Matrix3d aniso = Eigen::Vector3d(1.6, 1.0, 0.4).asDiagonal();
  Eigen::MatrixXd ta = t_tensor(2.0, aniso, 3, 2);
  CHECK(ta(0, 0) == doctest::Approx(0.6 * 1.6 + 0.4 * 2.0).epsilon(1e-14));
  CHECK(ta(2, 2) == doctest::Approx(0.6 * 0.4 + 0.4 * 2.0).epsilon(1e-14));

  // l = 0: pressure tensor passes through unchanged.
  Eigen::MatrixXd t0 = t_tensor(1.0, p_over_n, 3, 0);
  CHECK(t0(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK((t0 - p_over_n).norm() <= 1e-15);

  // SPD across random admissible states.
  Lcg64 rng(777ULL);
  for (int i = 0; i < 1000; ++i) {
    const int d = 2 + static_cast<int>(rng.next_below(2));
    const int l = static_cast<int>(rng.next_below(3));
    const double t_tr = rng.uniform(0.4, 2.0);
    const double t_rot = rng.uniform(0.4, 2.0);
    Eigen::MatrixXd pn = random_spd(rng, d, d * t_tr);
    CHECK(spd_check(t_tensor(t_rot, pn, d, l)).spd);
  }
}

TEST_CASE("build_tensor_temps: identities") {
  Lcg64 rng(888ULL);
  for (int i = 0; i < 500; ++i) {
    const int d = 2 + static_cast<int>(rng.next_below(2));
    SpeciesParams sp;
    sp.mass = rng.uniform(0.5, 2.0);
    sp.dof_internal = 2;
    sp.es_parameter = rng.uniform(-0.9 / (d - 1), 0.9);

    MacroMoments mom;
    mom.n = rng.uniform(0.5, 2.0);
    mom.u = Eigen::VectorXd::Zero(d);
    mom.t_rot = rng.uniform(0.5, 2.0);
    Eigen::MatrixXd pn = random_spd(rng, d, d * rng.uniform(0.5, 2.0));
    mom.pressure = mom.n * pn;
    mom.t_tr = pn.trace() / d;

    // Tensor state with trace within 30% of the moment temperature and a
    // compatible internal temperature.
    const double lam = rng.uniform(0.8, 1.2) * mom.t_tr;
    if (mom.t_rot - (static_cast<double>(d) / 2) * (lam - mom.t_tr) <= 0.0) continue;
    Eigen::MatrixXd lt = random_spd(rng, d, d * lam);

    TensorTemps tt = build_tensor_temps(mom, lt, sp, d);
    CHECK(tt.lambda == doctest::Approx(lt.trace() / d).epsilon(1e-14));
    CHECK(tt.theta ==
          doctest::Approx(theta_from_lambda(mom.t_tr, mom.t_rot, tt.lambda, d, 2)).epsilon(1e-13));
    // (d*Lambda + l*Theta)/(d+l) == (d*T_tr + l*T_rot)/(d+l)
    CHECK(tt.t_equ ==
          doctest::Approx((d * mom.t_tr + 2 * mom.t_rot) / (d + 2)).epsilon(1e-12));
    CHECK(spd_check(tt.lambda_es).spd);
  }

  // l = 0: the tensor state is ignored and P/n is used directly.
  SpeciesParams mono;
  mono.mass = 1.0;
  mono.dof_internal = 0;
  mono.es_parameter = 0.4;
  MacroMoments mom;
  mom.n = 2.0;
  mom.u = Eigen::VectorXd::Zero(2);
  Eigen::Matrix2d pn;
  pn << 1.2, 0.3, 0.3, 0.8;
  mom.pressure = mom.n * pn;
  mom.t_tr = 1.0;
  TensorTemps tt = build_tensor_temps(mom, Eigen::MatrixXd(), mono, 2);
  CHECK((tt.lambda_ten - pn).norm() <= 1e-14);
  CHECK(tt.lambda == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tt.t_equ == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("attractor set: local equilibrium collapses all eight specs") {
  Mixture mix;
  mix.d = 2;
  mix.species[0] = {1.0, 2, 1.0, 0.5, 0.3, 2.0};
  mix.species[1] = {1.5, 2, 1.0, 0.5, -0.2, 3.0};
  mix.coupling = {1.0, 0.4, 0.6, 0.0};

  const double temp = 1.3;
  Eigen::VectorXd u_eq = Eigen::Vector2d(0.2, -0.1);
  std::array<MacroMoments, 2> mom;
  std::array<TensorTemps, 2> tt;
  std::array<RelaxedState, 2> rs;
  for (int k = 0; k < 2; ++k) {
    mom[k].n = 0.8 + 0.4 * k;
    mom[k].u = u_eq;
    mom[k].t_tr = temp;
    mom[k].t_rot = temp;
    mom[k].pressure = mom[k].n * temp * Eigen::Matrix2d::Identity();
    tt[k] = build_tensor_temps(mom[k], temp * Eigen::Matrix2d::Identity(), mix.species[k], 2);
    rs[k] = {mom[k].n, u_eq, tt[k].lambda, tt[k].theta};
  }
  InterspeciesState inter = build_interspecies(mix, rs[0], rs[1]);
  AttractorSet set = build_attractor_set(mix, mom, tt, inter);

  for (int k = 0; k < 2; ++k) {
    const double cov = temp / mix.species[k].mass;
    for (const GaussianSpec* s :
         {&set.self[k], &set.cross[k], &set.carrier[k], &set.target[k]}) {
      CHECK(s->n == doctest::Approx(mom[k].n).epsilon(1e-14));
      CHECK((s->u - u_eq).norm() <= 1e-14);
      CHECK((s->cov_v - cov * Eigen::Matrix2d::Identity()).norm() <= 1e-13);
      CHECK(s->theta == doctest::Approx(temp).epsilon(1e-13));
    }
  }
}

TEST_CASE("attractor set: mu = 0 with isotropic pressure collapses self onto cross shape") {
  Mixture mix;
  mix.d = 2;
  mix.species[0] = {1.0, 2, 1.0, 0.0, 0.0, 1.0};
  mix.species[1] = {1.0, 2, 1.0, 0.0, 0.0, 1.0};
  mix.coupling = {1.0, 0.5, 0.5, 0.0};
  std::array<MacroMoments, 2> mom;
  std::array<TensorTemps, 2> tt;
  std::array<RelaxedState, 2> rs;
  for (int k = 0; k < 2; ++k) {
    mom[k].n = 1.0;
    mom[k].u = Eigen::Vector2d(0.1 * k, 0.0);
    mom[k].t_tr = 1.0 + 0.2 * k;
    mom[k].t_rot = 0.9;
    mom[k].pressure = mom[k].n * mom[k].t_tr * Eigen::Matrix2d::Identity();
    tt[k] = build_tensor_temps(mom[k], mom[k].t_tr * Eigen::Matrix2d::Identity(),
                               mix.species[k], 2);
  }
  // self attractor covariance is the isotropic Lambda/m for mu = 0
  rs[0] = {1.0, mom[0].u, tt[0].lambda, tt[0].theta};
  rs[1] = {1.0, mom[1].u, tt[1].lambda, tt[1].theta};
  AttractorSet set = build_attractor_set(mix, mom, tt, build_interspecies(mix, rs[0], rs[1]));
  CHECK((set.self[0].cov_v - tt[0].lambda * Eigen::Matrix2d::Identity()).norm() <= 1e-14);
}

TEST_CASE("entropy-bound inequalities for constructed tensors") {
  Lcg64 rng(1234ULL);
  for (int i = 0; i < 2000; ++i) {
    const int d = 2 + static_cast<int>(rng.next_below(2));
    const int l = 1 + static_cast<int>(rng.next_below(2));
    const double t_tr = rng.uniform(0.4, 2.0);
    const double t_rot = rng.uniform(0.4, 2.0);
    Eigen::MatrixXd pn = random_spd(rng, d, d * t_tr);
    const double t_equ = (d * t_tr + l * t_rot) / (d + l);
    Eigen::MatrixXd tten = t_tensor(t_rot, pn, d, l);

    // ln det(T_ten) + l ln(T_equ) >= ln det(P/n) + l ln(T_rot)
    const double lhs = std::log(tten.determinant()) + l * std::log(t_equ);
    const double rhs = std::log(pn.determinant()) + l * std::log(t_rot);
    CHECK(lhs >= rhs - 1e-10);

    // Lambda^d >= det(Lambda_es); arithmetic-geometric mean for SPD tensors.
    const double lam = rng.uniform(0.5, 2.0);
    Eigen::MatrixXd lt = random_spd(rng, d, d * lam);
    const double mu = rng.uniform(-1.0 / (d - 1), 1.0);
    Eigen::MatrixXd es = lambda_es(lam, lt, mu);
    CHECK(std::pow(lam, d) >= es.determinant() - 1e-12);
    CHECK(std::pow(lt.trace() / d, d) >= lt.determinant() - 1e-12);
    CHECK(std::pow(tten.trace() / d, d) >= tten.determinant() - 1e-12);
  }
}

TEST_CASE("entropy ordering by quadrature: target <= moment-Gaussian <= data") {
  // Synthetic positive data: mixture of two Gaussians with common mass.
  const double mass = 1.0;
  const int d = 1, l = 2;
  auto g = box_grid(d, -10, 10, 64, l, 8.0, 20);
  GaussianSpec a = [&] {
    GaussianSpec s;
    s.n = 0.6;
    s.mass = mass;
    s.u = Eigen::VectorXd::Constant(1, -0.8);
    s.cov_v = 0.7 * Eigen::MatrixXd::Identity(1, 1);
    s.dof_internal = l;
    s.theta = 0.5;
    return s;
  }();
  GaussianSpec b = a;
  b.n = 0.4;
  b.u[0] = 1.1;
  b.cov_v(0, 0) = 1.4;
  b.theta = 1.2;

  DiscreteDistribution f = project_attractor(a, g).dist;
  {
    auto pb = project_attractor(b, g);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] += pb.dist.values[i];
  }
  MacroMoments mom = compute_moments(f, mass);
  TensorTemps tt;
  SpeciesParams sp;
  sp.mass = mass;
  sp.dof_internal = l;
  sp.es_parameter = 0.0;
  // moment-Gaussian: full pressure anisotropy and T_rot
  GaussianSpec gbar;
  gbar.n = mom.n;
  gbar.mass = mass;
  gbar.u = mom.u;
  gbar.cov_v = mom.pressure / (mom.n * mass);
  gbar.dof_internal = l;
  gbar.theta = mom.t_rot;
  // equilibrium-diagonal target
  const double t_equ = (d * mom.t_tr + l * mom.t_rot) / (d + l);
  GaussianSpec gtil;
  gtil.n = mom.n;
  gtil.mass = mass;
  gtil.u = mom.u;
  gtil.cov_v = t_tensor(mom.t_rot, mom.pressure / mom.n, d, l) / mass;
  gtil.dof_internal = l;
  gtil.theta = t_equ;

  auto entropy_of = [&](const DiscreteDistribution& dist) {
    double s = 0.0;
    for (double v : dist.values) s += xlogx(v);
    return g->node_weight() * s;
  };
  const double h_f = entropy_of(f);
  const double h_bar = entropy_of(project_attractor(gbar, g).dist);
  const double h_til = entropy_of(project_attractor(gtil, g).dist);
  CHECK(h_til <= h_bar + 1e-6 * std::abs(h_bar));
  CHECK(h_bar <= h_f + 1e-6 * std::abs(h_f));
}
