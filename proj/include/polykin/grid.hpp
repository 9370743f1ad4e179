#ifndef POLYKIN_GRID_HPP
#define POLYKIN_GRID_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace polykin {

struct GaussianSpec;  // defined in attractors.hpp

// One uniform midpoint-rule axis: nodes at lo + (i+1/2)*dx.
struct AxisSpec {
  double lo = -1.0;
  double hi = 1.0;
  int n = 8;
};

// Tensor-product midpoint grid over velocity space (d axes, arbitrary bounds)
// and internal-energy space (l identical axes, symmetric about 0).  Internal
// coordinates are built by explicit mirroring, so coord[n-1-i] == -coord[i]
// bitwise; odd-order internal moments of even data then cancel exactly.
class PhaseGrid {
 public:
  PhaseGrid(std::vector<AxisSpec> vel_axes, int dof_internal, double eta_hi, int n_eta);

  int dim_v() const { return static_cast<int>(vel_.size()); }
  int dim_int() const { return l_; }
  std::size_t n_vel() const { return n_vel_; }
  std::size_t n_int() const { return n_int_; }
  std::size_t size() const { return n_vel_ * n_int_; }

  // Quadrature weight of a single node (uniform midpoint rule).
  double node_weight() const { return weight_; }

  const AxisSpec& vel_axis(int a) const { return vel_[a]; }
  double vel_dx(int a) const { return vel_dx_[a]; }
  double vel_coord(int a, int idx) const { return vel_coords_[a][idx]; }
  int vel_index(std::size_t iv, int a) const {
    return static_cast<int>((iv / vel_stride_[a]) % vel_[a].n);
  }

  double eta_hi() const { return eta_hi_; }
  int n_eta_axis() const { return n_eta_; }
  double int_dx() const { return int_dx_; }
  double int_coord(int a, int idx) const {
    (void)a;
    return int_coords_[idx];
  }
  int int_index(std::size_t ie, int a) const {
    return static_cast<int>((ie / int_stride_[a]) % n_eta_);
  }
  // |eta|^2 at internal flat index; table sized n_int().
  const std::vector<double>& int_sq() const { return int_sq_; }
  // Flat index of the fully mirrored internal node (all axes negated).
  std::size_t int_mirror(std::size_t ie) const { return mirror_[ie]; }

 private:
  std::vector<AxisSpec> vel_;
  std::vector<double> vel_dx_;
  std::vector<std::vector<double>> vel_coords_;
  std::vector<std::size_t> vel_stride_;
  int l_ = 0;
  double eta_hi_ = 0.0;
  int n_eta_ = 1;
  double int_dx_ = 1.0;
  std::vector<double> int_coords_;
  std::vector<std::size_t> int_stride_;
  std::vector<double> int_sq_;
  std::vector<std::size_t> mirror_;
  std::size_t n_vel_ = 1;
  std::size_t n_int_ = 1;
  double weight_ = 1.0;
};

// Nodal values on a PhaseGrid, flattened as iv * n_int() + ie.
struct DiscreteDistribution {
  std::shared_ptr<const PhaseGrid> grid;
  int species = 0;
  std::vector<double> values;
};

struct MacroMoments {
  double n = 0.0;            // number density
  Eigen::VectorXd u;         // mean velocity, size d
  double t_tr = 0.0;         // translational temperature, trace(P)/(d n)
  double t_rot = 0.0;        // internal temperature (0 when l = 0)
  Eigen::MatrixXd pressure;  // d x d pressure tensor m * <(v-u)(v-u)>, extensive
  Eigen::VectorXd eta_mean;  // size l; identically 0 for eta-even data
};

// Midpoint-rule moments.  t_tr is defined as trace(pressure)/(d*n) from the
// same sums, so that identity holds exactly.  Throws std::domain_error when
// the discrete density is not positive.
MacroMoments compute_moments(const DiscreteDistribution& f, double mass, int threads = 1);

struct ProjectionResult {
  DiscreteDistribution dist;
  double raw_density = 0.0;  // discrete density before renormalization
  double scale = 1.0;        // n / raw_density, applied to every node
};

// Separable factorization of a projected Gaussian: the value at node
// (iv, ie) is scale * vel_factor[iv] * int_factor[ie].  Lets consumers that
// only need factor sums (entropy, reduced models) work in O(N_v + N_eta).
struct SeparableProjection {
  std::vector<double> vel_factor;  // one entry per velocity node
  std::vector<double> int_factor;  // one entry per internal node
  double raw_density = 0.0;
  double scale = 1.0;  // n / raw_density
};

SeparableProjection project_attractor_factors(const GaussianSpec& spec, const PhaseGrid& grid,
                                              int threads = 1);

// Evaluates the Gaussian at every node and rescales by a single factor so the
// discrete density equals spec.n exactly.  Only density is renormalized;
// velocity/temperature defects stay at quadrature level and are monitored,
// not enforced.  Throws when the raw discrete density vanishes (grid misses
// the Gaussian); logs a warning when the grid covers less than 6 standard
// deviations around the mean on any axis.
ProjectionResult project_attractor(const GaussianSpec& spec,
                                   std::shared_ptr<const PhaseGrid> grid, int threads = 1);

// Translational relaxation temperature from the internal one:
//   Lambda = T_tr + (l/d) * (T_rot - Theta);   l = 0 gives Lambda = T_tr.
// Throws std::domain_error when the result is not positive.
double lambda_from_theta(double t_tr, double t_rot, double theta, int d, int l);

// Inverse map: Theta = T_rot - (d/l) * (Lambda - T_tr) for l > 0.
// Throws std::domain_error when the result is not positive.
double theta_from_lambda(double t_tr, double t_rot, double lambda, int d, int l);

}  // namespace polykin

#endif  // POLYKIN_GRID_HPP
