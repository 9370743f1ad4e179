#ifndef POLYKIN_CONFIG_HPP
#define POLYKIN_CONFIG_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "polykin/chu.hpp"
#include "polykin/closure.hpp"
#include "polykin/dynamics.hpp"

namespace polykin {

// Run configurations live in a flat INI-like text format:
//   - `[section]` headers, `key = value` lines, `#` starts a comment,
//   - scalars are decimal literals, vectors are whitespace-separated numbers,
//   - a handful of word tokens: gamma accepts "max", boundary accepts
//     "periodic" / "outflow".
//
// Sections and keys (* = required):
//   [run]       scenario*, t_end*, cfl_relax, cfl_adv, output_stride, seed
//   [species1]  mass*, dof_internal*, nu_self*, nu_cross*, es_parameter, z_rot
//   [species2]  same keys
//   [coupling]  epsilon*, delta*, alpha*, gamma*   (gamma = max resolves to
//               the largest admissible value for the given delta)
//   [grid]      d*, n_v*, n_eta (required when any dof_internal > 0),
//               span_sigma_v, span_sigma_eta, n_x, x_lo, x_hi, boundary
//   [initial1]  n*, u* (d numbers), t_tr*, t_rot (required when
//   [initial2]  dof_internal > 0), theta0 (default t_rot), p_over_n
//               (optional upper triangle, row-major, d*(d+1)/2 numbers;
//               default t_tr * identity)
//   [initial1_right], [initial2_right]  optional pair with the same keys;
//               when present, a 1-D run starts from a two-state initial
//               condition (left blocks on the left half of the domain).

struct InitialBlock {
  double n = 1.0;
  Eigen::VectorXd u;           // size d
  double t_tr = 1.0;
  double t_rot = 1.0;          // inert when dof_internal == 0
  double theta0 = 1.0;         // internal relaxation temperature at t = 0
  Eigen::MatrixXd p_over_n;    // d x d symmetric, trace = d * t_tr
};

struct GridConfig {
  int n_v = 32;                // nodes per velocity axis
  int n_eta = 2;               // nodes per internal axis (species with l > 0)
  double span_sigma_v = 8.0;   // velocity bounds: hull of initial u +- span * sigma
  double span_sigma_eta = 8.0; // internal bound: span * sigma of the widest theta
  int n_x = 1;                 // spatial cells (1-D transport runs)
  double x_lo = 0.0;
  double x_hi = 1.0;
  Boundary boundary = Boundary::Periodic;
};

struct TimeConfig {
  double t_end = 1.0;
  double cfl_relax = 0.5;
  double cfl_adv = 0.45;
  int output_stride = 1;       // CSV row every this many steps
};

struct RunConfig {
  std::string scenario;        // free-form label recorded in the artifacts
  Mixture mix;                 // includes d (from [grid]) and [coupling]
  GridConfig grid;
  TimeConfig time;
  std::uint64_t seed = 1;      // drives the validate-closure property sweep
  std::array<InitialBlock, 2> initial{};
  bool has_right = false;
  std::array<InitialBlock, 2> initial_right{};
  bool gamma_is_max = false;   // gamma was given as the token "max"
};

// Outcome of parsing + validating a config text.  `errors` collects every
// violation found (syntax, unknown or missing keys, range and admissibility
// failures), not just the first; `config` is only meaningful when ok.
struct ParseResult {
  bool ok = false;
  RunConfig config;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;  // e.g. alpha = 1 disables exchange
};

ParseResult parse_config(const std::string& text);

// Reads the file and parses it; a missing/unreadable file is reported as a
// parse error.
ParseResult load_config_file(const std::string& path);

// Canonical text form: every key printed (defaults materialized), doubles at
// full precision, gamma printed back as "max" when it was given that way.
// parse_config(print_config(c)) reproduces c exactly.
std::string print_config(const RunConfig& config);

// --- state construction ------------------------------------------------------

// Phase grid of each species under the bounds policy: every velocity axis
// spans the hull of all initial mean velocities (both species, both blocks)
// widened by span_sigma_v thermal widths of the hottest block; the internal
// bound is span_sigma_eta widths of the largest internal temperature.
std::array<std::shared_ptr<const PhaseGrid>, 2> build_grids(const RunConfig& config);

// Initial phase-space Gaussian of species k for one block: velocity
// covariance p_over_n / m, internal temperature t_rot.
GaussianSpec initial_gaussian(const RunConfig& config, int k, const InitialBlock& blk);

// Initial relaxation tensor: p_over_n scaled to trace d * Lambda(0), with
// Lambda(0) = t_tr + (l/d) * (t_rot - theta0).  Empty matrix when l == 0.
Eigen::MatrixXd initial_lambda_ten(const RunConfig& config, int k, const InitialBlock& blk);

// Space-homogeneous initial state on full phase grids (left blocks).
SystemState build_full_state(const RunConfig& config,
                             const std::array<std::shared_ptr<const PhaseGrid>, 2>& grids,
                             int threads = 1);

// Reduced initial state on velocity-only grids for one pair of blocks:
// g is the projected velocity Gaussian and h = (l * t_rot / m) * g.
ReducedState build_reduced_cell(const RunConfig& config,
                                const std::array<std::shared_ptr<const PhaseGrid>, 2>& vel_grids,
                                const std::array<InitialBlock, 2>& blocks, int threads = 1);

// 1-D field over [x_lo, x_hi]: left blocks fill cells with center < midpoint,
// right blocks (when present) the rest.
SpatialField1D build_field(const RunConfig& config,
                           const std::array<std::shared_ptr<const PhaseGrid>, 2>& vel_grids,
                           int threads = 1);

}  // namespace polykin

#endif  // POLYKIN_CONFIG_HPP
