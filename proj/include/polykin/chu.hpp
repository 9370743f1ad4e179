#ifndef POLYKIN_CHU_HPP
#define POLYKIN_CHU_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "polykin/dynamics.hpp"

namespace polykin {

// Velocity-space reduction of one species.  The pair (g, h) carries the same
// macroscopic information as the full distribution:
//   g(v) = integral of f over the internal axes,
//   h(v) = integral of |eta|^2 f over the internal axes,
// so the translational moments come from g and the internal energy from h.
// A species without internal degrees of freedom has g == f (same grid object,
// values copied bitwise) and an empty h.
struct ReducedSpecies {
  DiscreteDistribution g;      // lives on a velocity-only grid
  std::vector<double> h;       // same node order as g.values; empty when l == 0
  Eigen::MatrixXd lambda_ten;  // relaxation tensor state, 0x0 when l == 0
};

struct ReducedState {
  std::array<ReducedSpecies, 2> species;
  double time = 0.0;
};

// The velocity-only grid sharing all velocity axes with `grid`.  Grids that
// already have no internal axes are returned unchanged (same object), which
// keeps the reduced path of a monatomic species bitwise identical to the
// full one.
std::shared_ptr<const PhaseGrid> velocity_grid_of(const std::shared_ptr<const PhaseGrid>& grid);

// Project out the internal axes of one species (its tensor state is copied
// through) or of a whole two-species state.
ReducedSpecies reduce_species(const SpeciesState& full, int threads = 1);
ReducedState reduce_state(const SystemState& full, int threads = 1);

// Translational moments from g plus, for l > 0, the internal temperature
//   T_rot = m * <h> / (l * n)   with <h> the discrete velocity integral.
MacroMoments reduced_moments(const ReducedSpecies& rs, double mass, int dof_internal,
                             int threads = 1);

// Closure evaluation of a reduced state; same algebra as evaluate_state, with
// the moments taken from (g, h) instead of the full distribution.
EvalContext evaluate_reduced(const Mixture& mix, const ReducedState& state, int threads = 1);

struct ReducedDerivative {
  std::array<std::vector<double>, 2> dg;
  std::array<std::vector<double>, 2> dh;    // empty when l == 0
  std::array<Eigen::MatrixXd, 2> dlam;      // 0x0 when l == 0
};

// Reduced relaxation right-hand side.  The g equation sees the velocity parts
// of the full attractors (density-renormalized on the velocity grid); each
// h attractor is l * Theta_target / m times the matching g attractor, because
// that is the second internal moment the full Gaussian carries per unit
// density.  The tensor law is shared with the full system via tensor_rate.
ReducedDerivative reduced_collision_rhs(const Mixture& mix, const ReducedState& state,
                                        const EvalContext& ctx, int threads = 1);

// One Heun step of the reduced relaxation system, mirroring step_relax stage
// by stage: negative g values are clipped with the same density accounting
// and abort threshold; negative h values are clipped to keep h >= 0.
StepReport step_relax_reduced(const Mixture& mix, ReducedState& state, double dt,
                              const StepOptions& opts = {});

// --- one-dimensional space: finite-volume transport -------------------------

// Outflow drains through vacuum ghost cells: entering characteristics carry
// nothing, leaving ones are upwinded from the interior, so mass can only
// decrease.  Periodic wraps both data and fluxes.
enum class Boundary { Periodic, Outflow };

Boundary boundary_from_string(const std::string& name);  // "periodic" | "outflow"
std::string to_string(Boundary b);

// Uniform 1-D cell arrangement of reduced states.  Nodal storage is
// cell-major: the value of species k in cell ix at velocity node iv sits at
// index ix * n_vel(k) + iv.  Every cell of a species shares one velocity
// grid; transport acts along velocity axis 0.
struct SpatialField1D {
  int n_cells = 0;
  double x_lo = 0.0;
  double x_hi = 1.0;
  Boundary boundary = Boundary::Periodic;
  std::array<std::shared_ptr<const PhaseGrid>, 2> grid;  // velocity-only grids
  std::array<std::vector<double>, 2> g;
  std::array<std::vector<double>, 2> h;                   // empty when l == 0
  std::array<std::vector<Eigen::MatrixXd>, 2> lambda_ten; // one per cell; empty when l == 0
  double time = 0.0;

  double dx() const { return (x_hi - x_lo) / n_cells; }
  double x_center(int ix) const { return x_lo + (ix + 0.5) * dx(); }
  int n_vel(int k) const { return static_cast<int>(grid[k]->n_vel()); }

  ReducedState cell_state(int ix) const;               // copy one cell out
  void store_cell(int ix, const ReducedState& cell);   // write one cell back
};

// Zero-filled field over [x_lo, x_hi] with n_cells cells.  The grids must be
// velocity-only (no internal axes); fill cells with store_cell afterwards.
SpatialField1D allocate_field(std::array<std::shared_ptr<const PhaseGrid>, 2> grids, int n_cells,
                              double x_lo, double x_hi, Boundary boundary);

struct TransportOptions {
  int threads = 1;
  bool second_order = false;     // minmod-limited reconstruction + two-stage time step
  double cfl_advection = 0.45;   // dt must satisfy dt <= cfl_advection * dx / max |v_x|
  double cfl_relaxation = 0.5;   // and dt <= cfl_relaxation / max cell relaxation rate
  double clip_abort_fraction = 1e-6;
};

// Advect g, h and the tensor state by dt with no relaxation: first-order
// upwind fluxes per velocity node (minmod-limited with a two-stage time step
// when second_order is set).  The tensor state is advected conservatively as
// n * Lambda_ten with the species mean velocity, first order.  Periodic
// fluxes telescope, so the discrete mass of every species is conserved
// exactly.  Throws std::invalid_argument when dt violates the advection CFL
// bound.  Does not advance field.time (step_transport owns bookkeeping).
void advect_field(SpatialField1D& field, double dt, const TransportOptions& opts = {});

struct TransportStepReport {
  double dt = 0.0;
  std::array<double, 2> clipped_density{};  // summed over cells, weighted by dx
  Theta21Audit theta21;                     // aggregated over all cell evaluations
};

// Largest dt that step_transport accepts for the current field contents:
// min of the advection bound and the relaxation bound over all cells.
double transport_stable_dt(const Mixture& mix, const SpatialField1D& field,
                           const TransportOptions& opts = {});

// One operator-split step: advect everything over dt, then relax every cell
// over dt (cells are independent and run in parallel).  Throws
// std::invalid_argument when dt violates either stability bound.
TransportStepReport step_transport(const Mixture& mix, SpatialField1D& field, double dt,
                                   const TransportOptions& opts = {});

// Moments of one cell (translational from g, internal from h).
std::array<MacroMoments, 2> cell_moments(const Mixture& mix, const SpatialField1D& field, int ix,
                                         int threads = 1);

// Per-species integral of the number density over the domain, sum_ix dx * n_k.
std::array<double, 2> field_density_totals(const SpatialField1D& field);

// --- full model vs reduced model --------------------------------------------

// Largest macroscopic discrepancy between the full relaxation dynamics and
// the reduced one, tracked over a shared-time-step run.  Gaps are absolute
// differences divided by max(1, |full value|).
struct EquivalenceReport {
  double max_density_gap = 0.0;
  double max_velocity_gap = 0.0;
  double max_translational_gap = 0.0;
  double max_rotational_gap = 0.0;
  double max_gap = 0.0;
  int steps = 0;
};

EquivalenceReport full_vs_reduced_check(const Mixture& mix, SystemState full,
                                        ReducedState reduced, double t_end, double cfl,
                                        int threads = 1);

}  // namespace polykin

#endif  // POLYKIN_CHU_HPP
