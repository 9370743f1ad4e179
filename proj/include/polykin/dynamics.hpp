#ifndef POLYKIN_DYNAMICS_HPP
#define POLYKIN_DYNAMICS_HPP

#include <array>
#include <string>
#include <vector>

#include "polykin/attractors.hpp"
#include "polykin/closure.hpp"
#include "polykin/grid.hpp"

namespace polykin {

// Full kinetic state of one species: nodal distribution plus, for species
// with internal degrees of freedom, the evolving relaxation tensor (d x d
// symmetric, per particle).  Species without internal structure carry no
// tensor state; their relaxation tensor is the instantaneous P/n.
struct SpeciesState {
  DiscreteDistribution f;
  Eigen::MatrixXd lambda_ten;  // 0x0 when dof_internal == 0
};

struct SystemState {
  std::array<SpeciesState, 2> species;
  double time = 0.0;
};

// Everything derived from one state at one instant.
struct EvalContext {
  std::array<MacroMoments, 2> mom;
  std::array<TensorTemps, 2> tt;
  InterspeciesState inter;
  AttractorSet attractors;
};

EvalContext evaluate_state(const Mixture& mix, const SystemState& state, int threads = 1);

struct Derivative {
  std::array<std::vector<double>, 2> df;
  std::array<Eigen::MatrixXd, 2> dlam;  // 0x0 when dof_internal == 0
};

// Space-homogeneous relaxation right-hand side.  Per species k (j the other):
//   df_k   = nu_kk n_k (G_k - f_k) + nu_kj n_j (M_kj - f_k)
// with both attractors projected (density-renormalized) onto species k's
// grid, and for l_k > 0 the tensor rate
//   dLam_k = (nu_kk n_k / Z_r^k) ((d+l_k)/d) (T_k^ten - Lam_k^ten)
//          + nu_kk n_k (Lam_k^ES - P_k/n_k)
//          + nu_kj n_j (Theta_kj - T_k^rot) I.
Derivative collision_rhs(const Mixture& mix, const SystemState& state, const EvalContext& ctx,
                         int threads = 1);

// The tensor part of the relaxation right-hand side for species k alone, the
// exact expression collision_rhs uses.  Shared with the reduced model, whose
// tensor state obeys the same law.  Empty matrix when dof_internal == 0.
Eigen::MatrixXd tensor_rate(const Mixture& mix, const EvalContext& ctx, int k);

// Running tally of the specialization Theta_21 == Theta_2, which must hold
// identically whenever species 1 carries no internal degrees of freedom.
// audit_theta21 is a no-op for any other mixture shape.
struct Theta21Audit {
  long long evaluations = 0;
  long long violations = 0;
};

void audit_theta21(const Mixture& mix, const EvalContext& ctx, Theta21Audit& audit);

// Largest stable step: cfl divided by the fastest relaxation rate,
//   max_k max(nu_kk n_k + nu_kj n_j, (nu_kk n_k / Z_r^k) (d+l_k)/d).
double stable_dt(const Mixture& mix, const EvalContext& ctx, double cfl);

struct StepOptions {
  int threads = 1;
  double clip_abort_fraction = 1e-6;
  Theta21Audit* theta21 = nullptr;  // when set, audited at every state evaluation
};

struct StepReport {
  double dt = 0.0;
  std::array<double, 2> clipped_density{};  // number density removed by clipping
  std::array<double, 2> min_value{};        // most negative nodal value seen pre-clip
};

// One Heun (explicit trapezoidal) step of the relaxation system, in place.
// Negative nodal values are clipped to zero after each stage; the removed
// number density is accumulated and the step throws std::runtime_error when
// it exceeds clip_abort_fraction of the species density.
StepReport step_relax(const Mixture& mix, SystemState& state, double dt,
                      const StepOptions& opts = {});

struct EntropyReport {
  double total = 0.0;
  std::array<double, 2> f_term{};
  std::array<double, 2> carrier_term{};  // includes the 3 z_k weight; 0 when l_k = 0
};

// Discrete entropy  sum_k [ <f_k ln f_k> + 3 z_k <G_k^carrier ln G_k^carrier> ]
// with z_k = Z_r^k d/(d+l_k).  The carrier term exists only for species with
// internal degrees of freedom and is evaluated through the separable
// factorization, so its cost is O(N_v + N_eta).
EntropyReport compute_entropy(const Mixture& mix, const SystemState& state,
                              const EvalContext& ctx, int threads = 1);

struct EntropyProductionReport {
  double total = 0.0;
  std::array<double, 2> self_term{};     // nu_kk n_k <(G_k - f_k) ln f_k>
  std::array<double, 2> carrier_term{};  // 2 nu_kk n_k <(Gtarget_k - Gcarrier_k) ln Gcarrier_k>
  std::array<double, 2> cross_term{};    // nu_kj n_j <(M_kj - f_k) ln f_k>
};

// Collision-term entropy production of the semi-discrete system,
//   S = sum_k [ nu_kk n_k <(G_k - f_k) ln f_k>
//             + 2 nu_kk n_k <(Gtarget_k - Gcarrier_k) ln Gcarrier_k>
//             + nu_kj n_j <(M_kj - f_k) ln f_k> ],
// evaluated with the same density-renormalized attractor projections the
// relaxation right-hand side uses.  Under the conditions reported by
// entropy_preconditions this quantity is non-positive up to quadrature error,
// vanishing exactly at local equilibrium.  This is the sharp dissipation
// statement for the model; the H functional of compute_entropy additionally
// carries a carrier-relaxation remainder that those preconditions do not
// control, so H itself may rise transiently (see entropy_preconditions).
EntropyProductionReport entropy_production(const Mixture& mix, const SystemState& state,
                                           const EvalContext& ctx, int threads = 1);

struct ConservedTotals {
  double mass = 0.0;
  Eigen::VectorXd momentum;
  double energy = 0.0;  // drift + translational + internal
};

ConservedTotals conserved_totals(const Mixture& mix, const EvalContext& ctx);

// Velocity and temperature of the global equilibrium implied by the
// conserved totals.
struct GlobalEquilibrium {
  Eigen::VectorXd u;
  double temperature = 0.0;
};

GlobalEquilibrium global_equilibrium(const Mixture& mix, const EvalContext& ctx);

// Scale-free distance from global equilibrium.
struct EquilibriumResidual {
  double velocity_gap = 0.0;         // max over u_1, u_2, u_12, u_21 of |u - u_eq|/v_th
  double temperature_spread = 0.0;   // max over all temperatures of |T - T_eq|/T_eq
  double anisotropy = 0.0;           // max_k |P_k/n_k - T_k^t I|_F / T_eq
  double maxwellian_distance = 0.0;  // max_k L1(f_k - M_eq,k)/n_k
  double max_residual = 0.0;         // largest of the four
};

EquilibriumResidual equilibrium_residual(const Mixture& mix, const SystemState& state,
                                         const EvalContext& ctx, int threads = 1);

// Sufficient conditions for non-positive collision-term entropy production
// (see entropy_production): nu_11 n_1 >= nu_12 n_2, nu_22 n_2 >= nu_21 n_1,
// alpha != 1 and delta != 1.  Strictly they guarantee the sign of the
// production functional only; the time derivative of the H report also
// carries a carrier-relaxation remainder that the conditions do not bound,
// so per-step decrease of H is reported and checked rather than assumed.
// In practice H has decreased monotonically on every preconditioned
// trajectory exercised by the test suite.
struct PreconditionReport {
  bool ok = true;
  std::vector<std::string> violations;
};

PreconditionReport entropy_preconditions(const Mixture& mix, const EvalContext& ctx);

}  // namespace polykin

#endif  // POLYKIN_DYNAMICS_HPP
