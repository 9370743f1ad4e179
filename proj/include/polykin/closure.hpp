#ifndef POLYKIN_CLOSURE_HPP
#define POLYKIN_CLOSURE_HPP

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "polykin/common.hpp"

namespace polykin {

// Two-species conventions: species index 0 and 1 are called "1" and "2" in
// the classic mixture notation; cross quantities keep the 12 / 21 suffixes
// (12 = attractor seen by species 1 due to collisions with species 2).
//
// Temperatures are in energy units (k_B T), so velocity variances are T/m.

struct SpeciesParams {
  double mass = 1.0;         // m_k > 0
  int dof_internal = 0;      // l_k >= 0 internal (rotational/vibrational) DOF
  double nu_self = 1.0;      // self-collision frequency coefficient nu_kk
  double nu_cross = 0.0;     // cross-collision frequency coefficient nu_kj
  double es_parameter = 0.0; // ellipsoidal shape parameter mu_k
  double z_rot = 1.0;        // internal relaxation collision number Z_r^k > 0
};

struct MixtureCoupling {
  double epsilon = 1.0; // frequency ratio: nu_12 = epsilon * nu_21
  double delta = 0.5;   // mixture-velocity weight
  double alpha = 0.5;   // mixture-temperature weight, in [0, 1]
  double gamma = 0.0;   // coefficient of |u1 - u2|^2 in Lambda_12, in [0, gamma_bound]
};

struct Mixture {
  int d = 3; // translational velocity dimension, shared by both species
  std::array<SpeciesParams, 2> species{};
  MixtureCoupling coupling{};
};

// Returns every violated admissibility constraint (empty means admissible).
// Checked: positivity of masses/frequencies/Z_r, mu range, epsilon range,
// nu_12 = epsilon * nu_21 consistency, alpha in [0,1], delta inside its
// admissible interval, gamma in [0, gamma_bound], and the convexity
// requirement epsilon * (1 - alpha) <= 1.
std::vector<std::string> validate(const Mixture& mix);

// Per-species macroscopic inputs to the interspecies closure.
struct RelaxedState {
  double n = 1.0;              // number density
  Eigen::VectorXd u;           // mean velocity, size d
  double lambda = 1.0;         // translational relaxation temperature Lambda_k
  double theta = 1.0;          // internal relaxation temperature Theta_k (inert when l_k = 0)
};

// Result of the cross-temperature algebra.  theta() is only defined when at
// least one species carries internal DOF.
struct CrossTemps {
  double lambda = 0.0;
  bool has_theta = false;
  double theta_value = 0.0;
  double theta() const;
};

struct InterspeciesState {
  double n12 = 0.0, n21 = 0.0;
  Eigen::VectorXd u12, u21;
  double lambda12 = 0.0, lambda21 = 0.0;
  bool has_theta = false;          // false only when l1 = l2 = 0
  double theta12 = 0.0, theta21 = 0.0;
};

// u12 = delta*u1 + (1-delta)*u2.
Eigen::VectorXd mixture_velocity_12(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                    double delta);

// u21 = u2 - (m1/m2)*epsilon*(1-delta)*(u2-u1).
Eigen::VectorXd mixture_velocity_21(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                    double delta, double epsilon, double m1, double m2);

// Lambda12 = alpha*Lambda1 + (1-alpha)*Lambda2 + gamma*|u1-u2|^2,
// Theta12  = (l1*Theta1 + l2*Theta2)/(l1+l2).
// Throws std::domain_error if a resulting temperature is not positive.
CrossTemps mixture_temperatures_12(const Mixture& mix, double lambda1, double lambda2,
                                   double theta1, double theta2, double du_sq);

// Lambda21 and Theta21, constructed so that total interspecies energy
// exchange balances exactly:
//   Lambda21 = eps*(1-alpha)*Lambda1 + (1-eps*(1-alpha))*Lambda2
//            + eps*(gamma_bound - gamma)*|u1-u2|^2,
//   Theta21  = (1 - eps*l1/(l1+l2))*Theta2 + eps*l1/(l1+l2)*Theta1.
// Throws std::domain_error if a resulting temperature is not positive.
CrossTemps mixture_temperatures_21(const Mixture& mix, double lambda1, double lambda2,
                                   double theta1, double theta2, double du_sq);

struct GammaBound {
  double value = 0.0;      // (m1/d)*(1-delta)*((1+(m1/m2)*eps)*delta + 1 - (m1/m2)*eps)
  bool delta_admissible = false;
};

// Largest admissible gamma for the given delta; negative (with the flag
// cleared) when delta lies outside its admissible interval.
GammaBound gamma_bound(double m1, double m2, double epsilon, double delta, int d);

// Open-below interval (lo, 1] of delta values for which gamma_bound >= 0:
// lo = ((m1/m2)*eps - 1)/(1 + (m1/m2)*eps).
struct DeltaInterval {
  double lo = -1.0;
  double hi = 1.0;
};
DeltaInterval delta_admissible_interval(double m1, double m2, double epsilon);

// Builds all cross-attractor parameters from the two species states.
InterspeciesState build_interspecies(const Mixture& mix, const RelaxedState& s1,
                                     const RelaxedState& s2);

// Absolute residual of the energy-balance identity that pins (Lambda21,
// Theta21) given (Lambda12, Theta12); zero up to rounding whenever the state
// came from build_interspecies.
double energy_constraint_residual(const Mixture& mix, const RelaxedState& s1,
                                  const RelaxedState& s2, const InterspeciesState& inter);

struct ExchangeFluxes {
  double energy_12 = 0.0;       // energy gained by species 1 from collisions with 2
  double energy_21 = 0.0;       // energy gained by species 2 from collisions with 1
  Eigen::VectorXd momentum_12;  // momentum gained by species 1
  Eigen::VectorXd momentum_21;  // momentum gained by species 2
};

// Interspecies momentum and energy exchange rates.  Their pairwise sums
// vanish identically under the closure (momentum_12 + momentum_21 = 0 and
// energy_12 + energy_21 = 0, up to rounding).
ExchangeFluxes exchange_fluxes(const Mixture& mix, const RelaxedState& s1,
                               const RelaxedState& s2);

// Random admissible mixture + state pair for property sweeps and the
// validate-closure command.  d, l1, l2 are fixed by the caller; everything
// else is drawn inside the admissible region using the seeded generator.
struct ClosureSample {
  Mixture mix;
  RelaxedState s1, s2;
};
ClosureSample sample_admissible(Lcg64& rng, int d, int l1, int l2);

}  // namespace polykin

#endif  // POLYKIN_CLOSURE_HPP
