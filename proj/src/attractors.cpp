#include "polykin/attractors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace polykin {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix not square");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale + 1e-300) {
    std::ostringstream os;
    os << what << ": matrix not symmetric (max asymmetry " << asym << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

GaussianEvaluator::GaussianEvaluator(const GaussianSpec& spec) : spec_(spec) {
  const int d = static_cast<int>(spec.cov_v.rows());
  if (spec.u.size() != d || spec.cov_v.cols() != d) {
    throw std::invalid_argument("GaussianEvaluator: inconsistent dimensions");
  }
  if (!(spec.n > 0.0)) throw std::invalid_argument("GaussianEvaluator: density must be positive");
  if (!(spec.mass > 0.0)) throw std::invalid_argument("GaussianEvaluator: mass must be positive");
  if (spec.dof_internal < 0) {
    throw std::invalid_argument("GaussianEvaluator: internal DOF must be >= 0");
  }
  if (spec.dof_internal > 0 && !(spec.theta > 0.0)) {
    throw std::invalid_argument("GaussianEvaluator: internal temperature must be positive");
  }
  require_symmetric(spec.cov_v, "GaussianEvaluator");

  Eigen::LLT<Eigen::MatrixXd> llt(spec.cov_v);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("GaussianEvaluator: covariance factorization failed (not SPD)");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  const double trace = spec.cov_v.trace();
  double det_l = 1.0;
  for (int i = 0; i < d; ++i) {
    const double pivot = L(i, i) * L(i, i);
    if (pivot < 1e-13 * trace) {
      std::ostringstream os;
      os << "GaussianEvaluator: factorization pivot " << pivot
         << " below 1e-13 * trace = " << 1e-13 * trace;
      throw std::runtime_error(os.str());
    }
    det_l *= L(i, i);
  }
  inv_chol_ = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));

  prefactor_ = spec.n * std::pow(kTwoPi, -0.5 * d) / det_l;
  if (spec.dof_internal > 0) {
    prefactor_ *= std::pow(kTwoPi * spec.theta / spec.mass, -0.5 * spec.dof_internal);
    int_rate_ = spec.mass / (2.0 * spec.theta);
  }
}

double GaussianEvaluator::vel_factor(const Eigen::VectorXd& v) const {
  const int d = static_cast<int>(spec_.cov_v.rows());
  double q = 0.0;
  double y[3];
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j <= i; ++j) s += inv_chol_(i, j) * (v[j] - spec_.u[j]);
    y[i] = s;
    q += y[i] * y[i];
  }
  return prefactor_ * std::exp(-0.5 * q);
}

double GaussianEvaluator::int_factor(double eta_sq) const {
  if (spec_.dof_internal == 0) return 1.0;
  return std::exp(-int_rate_ * eta_sq);
}

double eval_gaussian(const GaussianSpec& spec, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& eta) {
  if (eta.size() != spec.dof_internal) {
    throw std::invalid_argument("eval_gaussian: internal coordinate dimension mismatch");
  }
  const GaussianEvaluator ev(spec);
  return ev(v, eta.squaredNorm());
}

SpdReport spd_check(const Eigen::MatrixXd& m) {
  require_symmetric(m, "spd_check");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  SpdReport r;
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.spd = r.min_eigenvalue > 0.0;
  return r;
}

Eigen::MatrixXd lambda_es(double lambda_scalar, const Eigen::MatrixXd& lambda_ten, double mu) {
  const int d = static_cast<int>(lambda_ten.rows());
  if (d < 1 || d > 3) throw std::invalid_argument("lambda_es: dimension must be 1, 2, or 3");
  const double mu_lo = (d > 1) ? -1.0 / (d - 1) : -1.0;
  if (mu < mu_lo - 1e-15 || mu > 1.0 + 1e-15) {
    std::ostringstream os;
    os << "lambda_es: shape parameter " << mu << " outside [" << mu_lo << ", 1]";
    throw std::invalid_argument(os.str());
  }
  const SpdReport rep = spd_check(lambda_ten);
  if (!rep.spd) {
    std::ostringstream os;
    os << "lambda_es: relaxation tensor not SPD (min eigenvalue " << rep.min_eigenvalue << ")";
    throw std::domain_error(os.str());
  }
  const double tr = lambda_ten.trace();
  if (std::abs(tr - d * lambda_scalar) > 1e-10 * std::max(std::abs(tr), d * lambda_scalar)) {
    std::ostringstream os;
    os << "lambda_es: trace " << tr << " does not equal d * Lambda = " << d * lambda_scalar;
    throw std::invalid_argument(os.str());
  }
  return (1.0 - mu) * lambda_scalar * Eigen::MatrixXd::Identity(d, d) + mu * lambda_ten;
}

Eigen::MatrixXd t_tensor(double t_rot, const Eigen::MatrixXd& p_over_n, int d, int l) {
  if (p_over_n.rows() != d || p_over_n.cols() != d) {
    throw std::invalid_argument("t_tensor: pressure tensor dimension mismatch");
  }
  if (l < 0) throw std::invalid_argument("t_tensor: l must be >= 0");
  if (l == 0) return p_over_n;
  if (!(t_rot > 0.0)) throw std::invalid_argument("t_tensor: internal temperature not positive");
  const double wv = static_cast<double>(d) / (d + l);
  return wv * p_over_n +
         ((1.0 - wv) * t_rot) * Eigen::MatrixXd::Identity(d, d);
}

TensorTemps build_tensor_temps(const MacroMoments& mom, const Eigen::MatrixXd& lambda_ten_state,
                               const SpeciesParams& sp, int d) {
  if (!(mom.n > 0.0)) throw std::invalid_argument("build_tensor_temps: density must be positive");
  const int l = sp.dof_internal;
  TensorTemps tt;
  const Eigen::MatrixXd p_over_n = mom.pressure / mom.n;
  if (l > 0) {
    if (lambda_ten_state.rows() != d || lambda_ten_state.cols() != d) {
      throw std::invalid_argument("build_tensor_temps: tensor state dimension mismatch");
    }
    tt.lambda_ten = lambda_ten_state;
  } else {
    tt.lambda_ten = p_over_n;
  }
  tt.lambda = tt.lambda_ten.trace() / d;
  if (!(tt.lambda > 0.0)) {
    std::ostringstream os;
    os << "translational relaxation temperature not positive: Lambda = " << tt.lambda;
    throw std::domain_error(os.str());
  }
  tt.theta = (l > 0) ? theta_from_lambda(mom.t_tr, mom.t_rot, tt.lambda, d, l) : 0.0;
  tt.lambda_es = lambda_es(tt.lambda, tt.lambda_ten, sp.es_parameter);
  tt.t_equ = (d * tt.lambda + l * tt.theta) / (d + l);
  tt.t_ten = t_tensor(mom.t_rot, p_over_n, d, l);
  return tt;
}

AttractorSet build_attractor_set(const Mixture& mix, const std::array<MacroMoments, 2>& mom,
                                 const std::array<TensorTemps, 2>& tt,
                                 const InterspeciesState& inter) {
  const int d = mix.d;
  AttractorSet set;
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = mix.species[k];
    const int l = sp.dof_internal;

    GaussianSpec& self = set.self[k];
    self.n = mom[k].n;
    self.mass = sp.mass;
    self.u = mom[k].u;
    self.cov_v = tt[k].lambda_es / sp.mass;
    self.dof_internal = l;
    self.theta = tt[k].theta;

    GaussianSpec& carrier = set.carrier[k];
    carrier.n = mom[k].n;
    carrier.mass = sp.mass;
    carrier.u = mom[k].u;
    carrier.cov_v = tt[k].lambda_ten / sp.mass;
    carrier.dof_internal = l;
    // The internal temperature must be the relaxed Theta_k, not the
    // distribution's T_rot: the dissipation chain needs
    // <Gcarrier ln Gcarrier> >= <G ln G>, whose internal parts only cancel
    // when both Gaussians share Theta_k (states with Theta_k < T_rot are
    // closed-form counterexamples otherwise).
    carrier.theta = tt[k].theta;

    GaussianSpec& target = set.target[k];
    target.n = mom[k].n;
    target.mass = sp.mass;
    target.u = mom[k].u;
    target.cov_v = tt[k].t_ten / sp.mass;
    target.dof_internal = l;
    target.theta = tt[k].t_equ;

    GaussianSpec& cross = set.cross[k];
    cross.mass = sp.mass;
    cross.dof_internal = l;
    if (k == 0) {
      cross.n = inter.n12;
      cross.u = inter.u12;
      cross.cov_v = (inter.lambda12 / sp.mass) * Eigen::MatrixXd::Identity(d, d);
      cross.theta = inter.has_theta ? inter.theta12 : 0.0;
    } else {
      cross.n = inter.n21;
      cross.u = inter.u21;
      cross.cov_v = (inter.lambda21 / sp.mass) * Eigen::MatrixXd::Identity(d, d);
      cross.theta = inter.has_theta ? inter.theta21 : 0.0;
    }
  }
  return set;
}

}  // namespace polykin
