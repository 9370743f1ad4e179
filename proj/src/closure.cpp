#include "polykin/closure.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace polykin {

namespace {

void require_same_dim(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << what << ": velocity dimension mismatch (" << a.size() << " vs " << b.size() << ")";
    throw std::invalid_argument(os.str());
  }
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0)) {
    std::ostringstream os;
    os << what << " must be positive, got " << x;
    throw std::invalid_argument(os.str());
  }
}

// Shared weight eps*l1/(l1+l2) of Theta_1 inside Theta_21.
double theta21_weight(const Mixture& mix) {
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  if (l1 + l2 == 0) return 0.0;
  return mix.coupling.epsilon * static_cast<double>(l1) / static_cast<double>(l1 + l2);
}

}  // namespace

double CrossTemps::theta() const {
  if (!has_theta) {
    throw std::domain_error(
        "internal mixture temperature undefined: both species carry zero internal DOF");
  }
  return theta_value;
}

Eigen::VectorXd mixture_velocity_12(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                    double delta) {
  require_same_dim(u1, u2, "mixture_velocity_12");
  return delta * u1 + (1.0 - delta) * u2;
}

Eigen::VectorXd mixture_velocity_21(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                    double delta, double epsilon, double m1, double m2) {
  require_same_dim(u1, u2, "mixture_velocity_21");
  require_positive(m1, "mixture_velocity_21: m1");
  require_positive(m2, "mixture_velocity_21: m2");
  return u2 - (m1 / m2) * epsilon * (1.0 - delta) * (u2 - u1);
}

CrossTemps mixture_temperatures_12(const Mixture& mix, double lambda1, double lambda2,
                                   double theta1, double theta2, double du_sq) {
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  require_positive(lambda1, "mixture_temperatures_12: Lambda1");
  require_positive(lambda2, "mixture_temperatures_12: Lambda2");
  if (l1 > 0) require_positive(theta1, "mixture_temperatures_12: Theta1");
  if (l2 > 0) require_positive(theta2, "mixture_temperatures_12: Theta2");
  if (du_sq < 0.0) throw std::invalid_argument("mixture_temperatures_12: |u1-u2|^2 negative");

  const double alpha = mix.coupling.alpha;
  const double gamma = mix.coupling.gamma;
  CrossTemps out;
  out.lambda = alpha * lambda1 + (1.0 - alpha) * lambda2 + gamma * du_sq;
  if (!(out.lambda > 0.0)) {
    std::ostringstream os;
    os << "mixture temperature positivity violated: Lambda12 = " << out.lambda
       << " (alpha = " << alpha << ", gamma = " << gamma << ", |u1-u2|^2 = " << du_sq << ")";
    throw std::domain_error(os.str());
  }
  if (l1 + l2 > 0) {
    out.has_theta = true;
    out.theta_value = (l1 * theta1 + l2 * theta2) / static_cast<double>(l1 + l2);
    if (!(out.theta_value > 0.0)) {
      std::ostringstream os;
      os << "mixture temperature positivity violated: Theta12 = " << out.theta_value;
      throw std::domain_error(os.str());
    }
  }
  return out;
}

CrossTemps mixture_temperatures_21(const Mixture& mix, double lambda1, double lambda2,
                                   double theta1, double theta2, double du_sq) {
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  require_positive(lambda1, "mixture_temperatures_21: Lambda1");
  require_positive(lambda2, "mixture_temperatures_21: Lambda2");
  if (l1 > 0) require_positive(theta1, "mixture_temperatures_21: Theta1");
  if (l2 > 0) require_positive(theta2, "mixture_temperatures_21: Theta2");
  if (du_sq < 0.0) throw std::invalid_argument("mixture_temperatures_21: |u1-u2|^2 negative");

  const double eps = mix.coupling.epsilon;
  const double alpha = mix.coupling.alpha;
  const double gamma = mix.coupling.gamma;
  const double m1 = mix.species[0].mass;
  const double m2 = mix.species[1].mass;
  const GammaBound gb = gamma_bound(m1, m2, eps, mix.coupling.delta, mix.d);

  CrossTemps out;
  const double w = eps * (1.0 - alpha);
  out.lambda = w * lambda1 + (1.0 - w) * lambda2 + eps * (gb.value - gamma) * du_sq;
  if (!(out.lambda > 0.0)) {
    std::ostringstream os;
    os << "mixture temperature positivity violated: Lambda21 = " << out.lambda
       << " (gamma = " << gamma << " vs bound " << gb.value << ", eps*(1-alpha) = " << w
       << ", |u1-u2|^2 = " << du_sq << ")";
    throw std::domain_error(os.str());
  }
  if (l1 + l2 > 0) {
    const double w1 = theta21_weight(mix);
    out.has_theta = true;
    out.theta_value = (1.0 - w1) * theta2 + w1 * theta1;
    if (!(out.theta_value > 0.0)) {
      std::ostringstream os;
      os << "mixture temperature positivity violated: Theta21 = " << out.theta_value;
      throw std::domain_error(os.str());
    }
  }
  return out;
}

GammaBound gamma_bound(double m1, double m2, double epsilon, double delta, int d) {
  require_positive(m1, "gamma_bound: m1");
  require_positive(m2, "gamma_bound: m2");
  require_positive(static_cast<double>(d), "gamma_bound: d");
  const double r = (m1 / m2) * epsilon;
  GammaBound out;
  out.value = (m1 / d) * (1.0 - delta) * ((1.0 + r) * delta + 1.0 - r);
  const DeltaInterval iv = delta_admissible_interval(m1, m2, epsilon);
  out.delta_admissible = (delta >= iv.lo && delta <= iv.hi);
  return out;
}

DeltaInterval delta_admissible_interval(double m1, double m2, double epsilon) {
  require_positive(m1, "delta_admissible_interval: m1");
  require_positive(m2, "delta_admissible_interval: m2");
  const double r = (m1 / m2) * epsilon;
  DeltaInterval iv;
  iv.lo = (r - 1.0) / (1.0 + r);
  iv.hi = 1.0;
  return iv;
}

InterspeciesState build_interspecies(const Mixture& mix, const RelaxedState& s1,
                                     const RelaxedState& s2) {
  require_positive(s1.n, "build_interspecies: n1");
  require_positive(s2.n, "build_interspecies: n2");
  require_same_dim(s1.u, s2.u, "build_interspecies");
  if (s1.u.size() != mix.d) {
    std::ostringstream os;
    os << "build_interspecies: velocity size " << s1.u.size() << " does not match d = " << mix.d;
    throw std::invalid_argument(os.str());
  }

  const double du_sq = (s1.u - s2.u).squaredNorm();
  InterspeciesState out;
  out.n12 = s1.n;
  out.n21 = s2.n;
  out.u12 = mixture_velocity_12(s1.u, s2.u, mix.coupling.delta);
  out.u21 = mixture_velocity_21(s1.u, s2.u, mix.coupling.delta, mix.coupling.epsilon,
                                mix.species[0].mass, mix.species[1].mass);
  const CrossTemps t12 =
      mixture_temperatures_12(mix, s1.lambda, s2.lambda, s1.theta, s2.theta, du_sq);
  const CrossTemps t21 =
      mixture_temperatures_21(mix, s1.lambda, s2.lambda, s1.theta, s2.theta, du_sq);
  out.lambda12 = t12.lambda;
  out.lambda21 = t21.lambda;
  out.has_theta = t12.has_theta;
  if (out.has_theta) {
    out.theta12 = t12.theta_value;
    out.theta21 = t21.theta_value;
  }
  return out;
}

double energy_constraint_residual(const Mixture& mix, const RelaxedState& s1,
                                  const RelaxedState& s2, const InterspeciesState& inter) {
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  const int d = mix.d;
  const double eps = mix.coupling.epsilon;
  const double alpha = mix.coupling.alpha;
  const double gamma = mix.coupling.gamma;
  const double m1 = mix.species[0].mass;
  const double m2 = mix.species[1].mass;
  const double du_sq = (s1.u - s2.u).squaredNorm();

  const double lhs = inter.lambda21 + (l2 > 0 ? (static_cast<double>(l2) / d) * inter.theta21 : 0.0);

  const double r = (m1 / m2) * eps;
  const double kcoef =
      (eps * m1 / d) * (1.0 - mix.coupling.delta) * (r * (mix.coupling.delta - 1.0) + mix.coupling.delta + 1.0);
  const double ll = (l1 + l2 > 0)
                        ? static_cast<double>(l1) * static_cast<double>(l2) / (l1 + l2)
                        : 0.0;
  const double rhs = (kcoef - eps * gamma) * du_sq + eps * (1.0 - alpha) * s1.lambda +
                     (1.0 - eps * (1.0 - alpha)) * s2.lambda + (eps / d) * ll * s1.theta +
                     (1.0 / d) * (static_cast<double>(l2) - eps * ll) * s2.theta;
  return std::abs(lhs - rhs);
}

ExchangeFluxes exchange_fluxes(const Mixture& mix, const RelaxedState& s1,
                               const RelaxedState& s2) {
  const InterspeciesState inter = build_interspecies(mix, s1, s2);
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  const int d = mix.d;
  const double m1 = mix.species[0].mass;
  const double m2 = mix.species[1].mass;
  const double nu12 = mix.species[0].nu_cross;
  const double nu21 = mix.species[1].nu_cross;
  const double nn = s1.n * s2.n;

  ExchangeFluxes out;
  out.momentum_12 = m1 * nu12 * nn * (inter.u12 - s1.u);
  out.momentum_21 = m2 * nu21 * nn * (inter.u21 - s2.u);

  double e12 = 0.5 * m1 * (inter.u12.squaredNorm() - s1.u.squaredNorm()) +
               0.5 * d * (inter.lambda12 - s1.lambda);
  if (l1 > 0) e12 += 0.5 * l1 * (inter.theta12 - s1.theta);
  out.energy_12 = nu12 * nn * e12;

  double e21 = 0.5 * m2 * (inter.u21.squaredNorm() - s2.u.squaredNorm()) +
               0.5 * d * (inter.lambda21 - s2.lambda);
  if (l2 > 0) e21 += 0.5 * l2 * (inter.theta21 - s2.theta);
  out.energy_21 = nu21 * nn * e21;
  return out;
}

std::vector<std::string> validate(const Mixture& mix) {
  std::vector<std::string> bad;
  auto fail = [&bad](const std::string& msg) { bad.push_back(msg); };
  std::ostringstream os;
  auto flush = [&os, &fail] {
    fail(os.str());
    os.str("");
  };

  if (mix.d < 1 || mix.d > 3) {
    os << "translational dimension d must be 1, 2, or 3, got " << mix.d;
    flush();
  }
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = mix.species[k];
    const std::string tag = "species" + std::to_string(k + 1);
    if (!(sp.mass > 0.0)) {
      os << tag << ".mass must be positive, got " << sp.mass;
      flush();
    }
    if (sp.dof_internal < 0) {
      os << tag << ".dof_internal must be >= 0, got " << sp.dof_internal;
      flush();
    }
    if (sp.nu_self < 0.0) {
      os << tag << ".nu_self must be >= 0, got " << sp.nu_self;
      flush();
    }
    if (sp.nu_cross < 0.0) {
      os << tag << ".nu_cross must be >= 0, got " << sp.nu_cross;
      flush();
    }
    if (!(sp.z_rot > 0.0)) {
      os << tag << ".z_rot must be positive, got " << sp.z_rot;
      flush();
    }
    if (mix.d > 1) {
      const double lo = -1.0 / (mix.d - 1);
      if (sp.es_parameter < lo || sp.es_parameter > 1.0) {
        os << tag << ".es_parameter must lie in [" << lo << ", 1] for d = " << mix.d << ", got "
           << sp.es_parameter;
        flush();
      }
    } else if (sp.es_parameter > 1.0) {
      os << tag << ".es_parameter must be <= 1, got " << sp.es_parameter;
      flush();
    }
  }
  const MixtureCoupling& c = mix.coupling;
  const int l1 = mix.species[0].dof_internal;
  const int l2 = mix.species[1].dof_internal;
  if (!(c.epsilon > 0.0)) {
    os << "coupling.epsilon must be positive, got " << c.epsilon;
    flush();
    return bad;
  }
  if (l1 > 0) {
    const double frac = c.epsilon * static_cast<double>(l1) / (l1 + l2);
    if (frac > 1.0 + 1e-12) {
      os << "frequency-ratio bound violated: epsilon*l1/(l1+l2) = " << frac << " must be <= 1";
      flush();
    }
  }
  {
    const double expected = c.epsilon * mix.species[1].nu_cross;
    const double got = mix.species[0].nu_cross;
    const double scale = std::max({std::abs(expected), std::abs(got), 1e-300});
    if (std::abs(expected - got) > 1e-12 * scale && (expected != 0.0 || got != 0.0)) {
      os << "cross-frequency consistency violated: nu_12 = " << got
         << " but epsilon*nu_21 = " << expected;
      flush();
    }
  }
  if (c.alpha < 0.0 || c.alpha > 1.0) {
    os << "coupling.alpha must lie in [0, 1], got " << c.alpha;
    flush();
  }
  if (c.epsilon * (1.0 - c.alpha) > 1.0 + 1e-12) {
    os << "convexity bound violated: epsilon*(1-alpha) = " << c.epsilon * (1.0 - c.alpha)
       << " must be <= 1 to keep Lambda21 a convex mixture";
    flush();
  }
  // Remaining checks need positive masses to evaluate the bounds.
  if (mix.species[0].mass <= 0.0 || mix.species[1].mass <= 0.0) return bad;
  const DeltaInterval iv =
      delta_admissible_interval(mix.species[0].mass, mix.species[1].mass, c.epsilon);
  if (c.delta < iv.lo - 1e-12 || c.delta > iv.hi + 1e-12) {
    os << "coupling.delta = " << c.delta << " outside the admissible interval (" << iv.lo << ", "
       << iv.hi << "] where the gamma positivity bound is non-negative";
    flush();
  } else {
    const GammaBound gb =
        gamma_bound(mix.species[0].mass, mix.species[1].mass, c.epsilon, c.delta, mix.d);
    if (c.gamma < 0.0) {
      os << "coupling.gamma must be >= 0, got " << c.gamma;
      flush();
    } else if (c.gamma > gb.value * (1.0 + 1e-12) + 1e-300) {
      os << "coupling.gamma = " << c.gamma << " exceeds the positivity bound gamma_max = "
         << gb.value << " for delta = " << c.delta;
      flush();
    }
  }
  return bad;
}

ClosureSample sample_admissible(Lcg64& rng, int d, int l1, int l2) {
  ClosureSample s;
  s.mix.d = d;
  s.mix.species[0].dof_internal = l1;
  s.mix.species[1].dof_internal = l2;
  s.mix.species[0].mass = rng.uniform(0.5, 3.0);
  s.mix.species[1].mass = rng.uniform(0.5, 3.0);
  s.mix.species[0].z_rot = rng.uniform(1.0, 5.0);
  s.mix.species[1].z_rot = rng.uniform(1.0, 5.0);

  const double eps_max = (l1 > 0) ? std::min(3.0, static_cast<double>(l1 + l2) / l1) : 3.0;
  const double eps = rng.uniform(0.05, eps_max);
  s.mix.coupling.epsilon = eps;

  // alpha: stay inside [max(0, 1-1/eps), 1) so that eps*(1-alpha) <= 1.
  const double alpha_lo = std::max(0.0, 1.0 - 1.0 / eps);
  s.mix.coupling.alpha = rng.uniform(alpha_lo + 0.02 * (1.0 - alpha_lo), 1.0 - 0.02);

  const DeltaInterval iv =
      delta_admissible_interval(s.mix.species[0].mass, s.mix.species[1].mass, eps);
  const double width = iv.hi - iv.lo;
  s.mix.coupling.delta = rng.uniform(iv.lo + 0.05 * width, iv.hi - 0.05 * width);

  const GammaBound gb = gamma_bound(s.mix.species[0].mass, s.mix.species[1].mass, eps,
                                    s.mix.coupling.delta, d);
  s.mix.coupling.gamma = rng.uniform(0.0, std::max(0.0, gb.value));

  const double nu21 = rng.uniform(0.5, 2.0);
  s.mix.species[1].nu_cross = nu21;
  s.mix.species[0].nu_cross = eps * nu21;

  s.s1.n = rng.uniform(0.2, 2.0);
  s.s2.n = rng.uniform(0.2, 2.0);
  // self frequencies large enough that nu_kk*n_k >= nu_kj*n_j holds.
  s.mix.species[0].nu_self =
      s.mix.species[0].nu_cross * s.s2.n / s.s1.n * rng.uniform(1.0, 2.0);
  s.mix.species[1].nu_self =
      s.mix.species[1].nu_cross * s.s1.n / s.s2.n * rng.uniform(1.0, 2.0);

  for (int k = 0; k < 2; ++k) {
    double lo = (d > 1) ? -1.0 / (d - 1) : -1.0;
    s.mix.species[k].es_parameter = rng.uniform(0.95 * lo, 0.95);
  }

  s.s1.u = Eigen::VectorXd(d);
  s.s2.u = Eigen::VectorXd(d);
  for (int a = 0; a < d; ++a) {
    s.s1.u[a] = rng.uniform(-1.0, 1.0);
    s.s2.u[a] = rng.uniform(-1.0, 1.0);
  }
  s.s1.lambda = rng.uniform(0.3, 3.0);
  s.s2.lambda = rng.uniform(0.3, 3.0);
  s.s1.theta = rng.uniform(0.3, 3.0);
  s.s2.theta = rng.uniform(0.3, 3.0);
  return s;
}

}  // namespace polykin
