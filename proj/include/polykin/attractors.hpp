#ifndef POLYKIN_ATTRACTORS_HPP
#define POLYKIN_ATTRACTORS_HPP

#include <Eigen/Dense>
#include <array>

#include "polykin/closure.hpp"
#include "polykin/grid.hpp"

namespace polykin {

// Anisotropic Gaussian in velocity, isotropic Gaussian in internal energy:
//   f(v, eta) = n / sqrt(det(2 pi cov_v)) * (2 pi theta / m)^(-l/2)
//             * exp(-1/2 (v-u)^T cov_v^{-1} (v-u) - m |eta|^2 / (2 theta)).
// cov_v is the velocity covariance, i.e. (temperature tensor) / mass.
struct GaussianSpec {
  double n = 1.0;
  double mass = 1.0;
  Eigen::VectorXd u;
  Eigen::MatrixXd cov_v;
  int dof_internal = 0;
  double theta = 1.0;  // internal temperature; inert when dof_internal = 0
};

// Cached Cholesky factorization of cov_v for repeated evaluation.  The
// constructor throws std::runtime_error when the factorization fails or any
// pivot drops below 1e-13 * trace(cov_v), and std::invalid_argument for
// asymmetric input.
class GaussianEvaluator {
 public:
  explicit GaussianEvaluator(const GaussianSpec& spec);

  // Full phase-space value at (v, |eta|^2).
  double operator()(const Eigen::VectorXd& v, double eta_sq) const {
    return vel_factor(v) * int_factor(eta_sq);
  }

  // Velocity part including density and both normalization constants.
  double vel_factor(const Eigen::VectorXd& v) const;
  // exp(-m |eta|^2 / (2 theta)); equals 1 when l = 0.
  double int_factor(double eta_sq) const;

 private:
  GaussianSpec spec_;
  Eigen::MatrixXd inv_chol_;  // L^{-1} with cov_v = L L^T
  double prefactor_ = 1.0;    // n * (2pi)^{-d/2}/det(L) * (2pi theta/m)^{-l/2}
  double int_rate_ = 0.0;     // m / (2 theta)
};

double eval_gaussian(const GaussianSpec& spec, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& eta);

struct SpdReport {
  bool spd = false;
  double min_eigenvalue = 0.0;
};

// Symmetry check (relative tolerance 1e-12, throws std::invalid_argument when
// violated) followed by an eigenvalue-based positivity report.
SpdReport spd_check(const Eigen::MatrixXd& m);

// Elliptic relaxation tensor: (1-mu) * Lambda * I + mu * Lambda_ten.
// Requires Lambda_ten SPD with trace d * Lambda (relative tolerance 1e-10)
// and mu in [-1/(d-1), 1] (any mu <= 1 when d = 1).
Eigen::MatrixXd lambda_es(double lambda_scalar, const Eigen::MatrixXd& lambda_ten, double mu);

// Per-particle equilibrium-directed temperature tensor: the convex
// combination (d * (P/n) + l * T_rot * I) / (d + l).  Manifestly SPD for SPD
// P/n; trace is d * T_equ; the diagonal equals T_equ exactly when the
// pressure diagonal is isotropic.  Reduces to P/n for l = 0.
Eigen::MatrixXd t_tensor(double t_rot, const Eigen::MatrixXd& p_over_n, int d, int l);

// Everything derived from one species' moments plus its tensor state.
struct TensorTemps {
  Eigen::MatrixXd lambda_ten;  // per-particle relaxation tensor, trace = d*Lambda
  double lambda = 0.0;         // trace(lambda_ten)/d
  double theta = 0.0;          // internal relaxation temperature (l > 0 only)
  Eigen::MatrixXd lambda_es;   // (1-mu)*Lambda*I + mu*lambda_ten
  double t_equ = 0.0;          // (d*Lambda + l*Theta)/(d+l) = (d*T_tr + l*T_rot)/(d+l)
  Eigen::MatrixXd t_ten;       // equilibrium-diagonal temperature tensor
};

// Builds TensorTemps from moments.  For l > 0, lambda_ten is the evolved
// tensor state; for l = 0 it is defined as P/n and theta is inert.
// Throws std::domain_error when the derived Theta is not positive.
TensorTemps build_tensor_temps(const MacroMoments& mom, const Eigen::MatrixXd& lambda_ten_state,
                               const SpeciesParams& sp, int d);

// The four kinds of Gaussian attractors used by the relaxation dynamics,
// per species (index 0 <-> species 1).
struct AttractorSet {
  std::array<GaussianSpec, 2> self;     // cov lambda_es/m, internal Theta_k
  std::array<GaussianSpec, 2> cross;    // [0] = 12-attractor, [1] = 21-attractor
  std::array<GaussianSpec, 2> carrier;  // cov lambda_ten/m, internal Theta_k
  std::array<GaussianSpec, 2> target;   // cov t_ten/m, internal T_equ
};

AttractorSet build_attractor_set(const Mixture& mix,
                                 const std::array<MacroMoments, 2>& mom,
                                 const std::array<TensorTemps, 2>& tt,
                                 const InterspeciesState& inter);

}  // namespace polykin

#endif  // POLYKIN_ATTRACTORS_HPP
