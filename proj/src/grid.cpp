#include "polykin/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "polykin/attractors.hpp"
#include "polykin/common.hpp"

namespace polykin {

namespace {

std::vector<double> midpoint_coords(const AxisSpec& ax) {
  const double dx = (ax.hi - ax.lo) / ax.n;
  std::vector<double> c(ax.n);
  for (int i = 0; i < ax.n; ++i) c[i] = ax.lo + (i + 0.5) * dx;
  return c;
}

// Symmetric midpoint coordinates with exact mirroring: c[n-1-i] == -c[i].
std::vector<double> symmetric_coords(double hi, int n) {
  const double dx = 2.0 * hi / n;
  std::vector<double> c(n);
  for (int i = 0; i < n / 2; ++i) {
    c[i] = -hi + (i + 0.5) * dx;
    c[n - 1 - i] = -c[i];
  }
  if (n % 2 == 1) c[n / 2] = 0.0;
  return c;
}

}  // namespace

PhaseGrid::PhaseGrid(std::vector<AxisSpec> vel_axes, int dof_internal, double eta_hi, int n_eta)
    : vel_(std::move(vel_axes)), l_(dof_internal) {
  if (vel_.empty() || vel_.size() > 3) {
    throw std::invalid_argument("PhaseGrid: velocity dimension must be 1, 2, or 3");
  }
  if (l_ < 0) throw std::invalid_argument("PhaseGrid: internal DOF must be >= 0");
  weight_ = 1.0;
  n_vel_ = 1;
  for (const AxisSpec& ax : vel_) {
    if (ax.n < 2) throw std::invalid_argument("PhaseGrid: velocity axis needs >= 2 points");
    if (!(ax.hi > ax.lo)) throw std::invalid_argument("PhaseGrid: velocity axis bounds inverted");
    if (ax.n < 8) log_warn("PhaseGrid: velocity axis has fewer than 8 points");
    vel_dx_.push_back((ax.hi - ax.lo) / ax.n);
    vel_coords_.push_back(midpoint_coords(ax));
    weight_ *= vel_dx_.back();
    n_vel_ *= static_cast<std::size_t>(ax.n);
  }
  vel_stride_.assign(vel_.size(), 1);
  for (int a = static_cast<int>(vel_.size()) - 2; a >= 0; --a) {
    vel_stride_[a] = vel_stride_[a + 1] * static_cast<std::size_t>(vel_[a + 1].n);
  }

  if (l_ > 0) {
    if (n_eta < 2) throw std::invalid_argument("PhaseGrid: internal axis needs >= 2 points");
    if (!(eta_hi > 0.0)) throw std::invalid_argument("PhaseGrid: internal bound must be positive");
    if (n_eta < 8) log_warn("PhaseGrid: internal axis has fewer than 8 points");
    eta_hi_ = eta_hi;
    n_eta_ = n_eta;
    int_dx_ = 2.0 * eta_hi / n_eta;
    int_coords_ = symmetric_coords(eta_hi, n_eta);
    n_int_ = 1;
    for (int a = 0; a < l_; ++a) {
      n_int_ *= static_cast<std::size_t>(n_eta);
      weight_ *= int_dx_;
    }
    int_stride_.assign(l_, 1);
    for (int a = l_ - 2; a >= 0; --a) {
      int_stride_[a] = int_stride_[a + 1] * static_cast<std::size_t>(n_eta);
    }
    int_sq_.resize(n_int_);
    mirror_.resize(n_int_);
    for (std::size_t ie = 0; ie < n_int_; ++ie) {
      double sq = 0.0;
      std::size_t im = 0;
      for (int a = 0; a < l_; ++a) {
        const int idx = int_index(ie, a);
        const double c = int_coords_[idx];
        sq += c * c;
        im += static_cast<std::size_t>(n_eta_ - 1 - idx) * int_stride_[a];
      }
      int_sq_[ie] = sq;
      mirror_[ie] = im;
    }
  } else {
    n_int_ = 1;
    int_sq_.assign(1, 0.0);
    mirror_.assign(1, 0);
  }
}

MacroMoments compute_moments(const DiscreteDistribution& f, double mass, int threads) {
  if (!f.grid) throw std::invalid_argument("compute_moments: distribution has no grid");
  const PhaseGrid& g = *f.grid;
  if (f.values.size() != g.size()) {
    throw std::invalid_argument("compute_moments: value count does not match grid");
  }
  if (!(mass > 0.0)) throw std::invalid_argument("compute_moments: mass must be positive");
  const int d = g.dim_v();
  const int l = g.dim_int();
  const std::size_t nv = g.n_vel();
  const std::size_t ni = g.n_int();
  const double w = g.node_weight();

  // Pass over all nodes: per-velocity-node row sums, internal-energy-weighted
  // sums, and per-internal-node column sums (for the odd-moment pairing).
  std::vector<double> rowsum(nv, 0.0);
  std::vector<double> colsum(ni, 0.0);
  double eta_sq_sum = 0.0;
  {
    const int nchunk = (threads <= 1) ? 1 : threads;
    std::vector<std::vector<double>> col_part(nchunk, std::vector<double>(ni, 0.0));
    std::vector<double> es_part(nchunk, 0.0);
    const std::size_t chunk = (nv + nchunk - 1) / nchunk;
    parallel_for(nv, threads, [&](std::size_t b, std::size_t e) {
      const std::size_t me = b / chunk;
      std::vector<double>& cp = col_part[me];
      double es = 0.0;
      const double* sq = g.int_sq().data();
      for (std::size_t iv = b; iv < e; ++iv) {
        const double* row = f.values.data() + iv * ni;
        double rs = 0.0;
        for (std::size_t ie = 0; ie < ni; ++ie) {
          const double v = row[ie];
          rs += v;
          es += v * sq[ie];
          cp[ie] += v;
        }
        rowsum[iv] = rs;
      }
      es_part[me] = es;
    });
    for (int c = 0; c < nchunk; ++c) {
      eta_sq_sum += es_part[c];
      for (std::size_t ie = 0; ie < ni; ++ie) colsum[ie] += col_part[c][ie];
    }
  }

  double s0 = 0.0;
  for (std::size_t iv = 0; iv < nv; ++iv) s0 += rowsum[iv];
  const double n = w * s0;
  if (!(n > 0.0)) {
    throw std::domain_error("compute_moments: discrete density is not positive");
  }

  MacroMoments mom;
  mom.n = n;
  mom.u = Eigen::VectorXd::Zero(d);
  for (int a = 0; a < d; ++a) {
    double s1 = 0.0;
    for (std::size_t iv = 0; iv < nv; ++iv) s1 += rowsum[iv] * g.vel_coord(a, g.vel_index(iv, a));
    mom.u[a] = s1 / s0;
  }

  mom.pressure = Eigen::MatrixXd::Zero(d, d);
  {
    double acc[3][3] = {};
    double c[3];
    for (std::size_t iv = 0; iv < nv; ++iv) {
      for (int a = 0; a < d; ++a) c[a] = g.vel_coord(a, g.vel_index(iv, a)) - mom.u[a];
      const double rs = rowsum[iv];
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) acc[a][b] += rs * c[a] * c[b];
    }
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        mom.pressure(a, b) = mass * w * acc[a][b];
        mom.pressure(b, a) = mom.pressure(a, b);
      }
  }
  mom.t_tr = mom.pressure.trace() / (d * n);

  mom.eta_mean = Eigen::VectorXd::Zero(l);
  if (l > 0) {
    mom.t_rot = mass * w * eta_sq_sum / (l * n);
    // Mirror-paired summation: for eta-even data each pair cancels exactly.
    for (int a = 0; a < l; ++a) {
      double s = 0.0;
      for (std::size_t ie = 0; ie < ni; ++ie) {
        const std::size_t im = g.int_mirror(ie);
        if (im < ie) continue;
        if (im == ie) continue;  // center node has coordinate exactly 0
        s += colsum[ie] * g.int_coord(a, g.int_index(ie, a)) +
             colsum[im] * g.int_coord(a, g.int_index(im, a));
      }
      mom.eta_mean[a] = w * s / n;
    }
  }
  return mom;
}

SeparableProjection project_attractor_factors(const GaussianSpec& spec, const PhaseGrid& g,
                                              int threads) {
  const int d = g.dim_v();
  if (spec.u.size() != d || spec.cov_v.rows() != d || spec.cov_v.cols() != d) {
    throw std::invalid_argument("project_attractor: spec dimensions do not match grid");
  }
  if (spec.dof_internal != g.dim_int()) {
    throw std::invalid_argument("project_attractor: internal DOF mismatch with grid");
  }
  const GaussianEvaluator ev(spec);

  // Coverage diagnostics: want >= 6 standard deviations around the mean.
  for (int a = 0; a < d; ++a) {
    const double sd = std::sqrt(spec.cov_v(a, a));
    if (spec.u[a] - 6.0 * sd < g.vel_axis(a).lo || spec.u[a] + 6.0 * sd > g.vel_axis(a).hi) {
      std::ostringstream os;
      os << "project_attractor: velocity axis " << a << " covers less than 6 standard deviations";
      log_warn(os.str());
    }
  }
  if (g.dim_int() > 0) {
    const double sd = std::sqrt(spec.theta / spec.mass);
    if (6.0 * sd > g.eta_hi()) {
      log_warn("project_attractor: internal axis covers less than 6 standard deviations");
    }
  }

  SeparableProjection out;
  out.vel_factor.resize(g.n_vel());
  out.int_factor.resize(g.n_int());
  parallel_for(g.n_vel(), threads, [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd v(d);
    for (std::size_t iv = b; iv < e; ++iv) {
      for (int a = 0; a < d; ++a) v[a] = g.vel_coord(a, g.vel_index(iv, a));
      out.vel_factor[iv] = ev.vel_factor(v);
    }
  });
  double se = 0.0;
  for (std::size_t ie = 0; ie < g.n_int(); ++ie) {
    out.int_factor[ie] = ev.int_factor(g.int_sq()[ie]);
    se += out.int_factor[ie];
  }
  const double sv = parallel_sum(g.n_vel(), threads, [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t iv = b; iv < e; ++iv) s += out.vel_factor[iv];
    return s;
  });
  out.raw_density = g.node_weight() * sv * se;
  if (!(out.raw_density > 0.0)) {
    throw std::runtime_error(
        "project_attractor: projected density is zero; grid does not cover the attractor");
  }
  out.scale = spec.n / out.raw_density;
  return out;
}

ProjectionResult project_attractor(const GaussianSpec& spec,
                                   std::shared_ptr<const PhaseGrid> grid, int threads) {
  if (!grid) throw std::invalid_argument("project_attractor: null grid");
  const PhaseGrid& g = *grid;
  SeparableProjection sep = project_attractor_factors(spec, g, threads);

  const std::size_t nv = g.n_vel();
  const std::size_t ni = g.n_int();
  ProjectionResult out;
  out.raw_density = sep.raw_density;
  out.scale = sep.scale;
  out.dist.grid = grid;
  out.dist.values.resize(nv * ni);
  const double s = sep.scale;
  parallel_for(nv, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t iv = b; iv < e; ++iv) {
      double* row = out.dist.values.data() + iv * ni;
      const double vf = s * sep.vel_factor[iv];
      for (std::size_t ie = 0; ie < ni; ++ie) row[ie] = vf * sep.int_factor[ie];
    }
  });
  return out;
}

double lambda_from_theta(double t_tr, double t_rot, double theta, int d, int l) {
  if (d < 1) throw std::invalid_argument("lambda_from_theta: d must be >= 1");
  if (l < 0) throw std::invalid_argument("lambda_from_theta: l must be >= 0");
  const double lambda =
      (l == 0) ? t_tr : t_tr + (static_cast<double>(l) / d) * (t_rot - theta);
  if (!(lambda > 0.0)) {
    std::ostringstream os;
    os << "translational relaxation temperature not positive: Lambda = " << lambda
       << " (T_tr = " << t_tr << ", T_rot = " << t_rot << ", Theta = " << theta << ")";
    throw std::domain_error(os.str());
  }
  return lambda;
}

double theta_from_lambda(double t_tr, double t_rot, double lambda, int d, int l) {
  if (d < 1) throw std::invalid_argument("theta_from_lambda: d must be >= 1");
  if (l <= 0) throw std::invalid_argument("theta_from_lambda: l must be > 0");
  const double theta = t_rot - (static_cast<double>(d) / l) * (lambda - t_tr);
  if (!(theta > 0.0)) {
    std::ostringstream os;
    os << "internal relaxation temperature not positive: Theta = " << theta
       << " (T_tr = " << t_tr << ", T_rot = " << t_rot << ", Lambda = " << lambda << ")";
    throw std::domain_error(os.str());
  }
  return theta;
}

}  // namespace polykin
