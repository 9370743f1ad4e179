#include "polykin/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "polykin/attractors.hpp"

namespace polykin {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double_token(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  if (!std::isfinite(v)) return false;
  out = v;
  return true;
}

bool parse_int_token(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

bool parse_u64_token(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

bool parse_vector_token(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    double v = 0.0;
    if (!parse_double_token(tok, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

struct Section {
  std::map<std::string, std::string> kv;
  std::map<std::string, int> line_of;
  std::set<std::string> taken;
};

// Typed key access over one section, accumulating errors in the shared list.
class SectionReader {
 public:
  SectionReader(std::map<std::string, Section>& sections, std::string name,
                std::vector<std::string>& errors)
      : name_(std::move(name)), errors_(errors) {
    auto it = sections.find(name_);
    sec_ = (it == sections.end()) ? nullptr : &it->second;
  }

  bool present() const { return sec_ != nullptr; }

  bool has(const std::string& key) const { return sec_ && sec_->kv.count(key) > 0; }

  // Raw value; marks the key as consumed.  Null when absent (with an error
  // if required).
  const std::string* raw(const std::string& key, bool required) {
    if (!sec_ || sec_->kv.count(key) == 0) {
      if (required) fail(key, "missing required key");
      return nullptr;
    }
    sec_->taken.insert(key);
    return &sec_->kv.at(key);
  }

  bool get_double(const std::string& key, bool required, double& out) {
    const std::string* v = raw(key, required);
    if (!v) return false;
    if (!parse_double_token(*v, out)) {
      fail(key, "expected a decimal number, got '" + *v + "'");
      return false;
    }
    return true;
  }

  bool get_int(const std::string& key, bool required, int& out) {
    const std::string* v = raw(key, required);
    if (!v) return false;
    long long big = 0;
    if (!parse_int_token(*v, big) || big < -(1LL << 31) || big > (1LL << 31)) {
      fail(key, "expected an integer, got '" + *v + "'");
      return false;
    }
    out = static_cast<int>(big);
    return true;
  }

  bool get_u64(const std::string& key, bool required, std::uint64_t& out) {
    const std::string* v = raw(key, required);
    if (!v) return false;
    if (!parse_u64_token(*v, out)) {
      fail(key, "expected a non-negative integer, got '" + *v + "'");
      return false;
    }
    return true;
  }

  bool get_string(const std::string& key, bool required, std::string& out) {
    const std::string* v = raw(key, required);
    if (!v) return false;
    out = *v;
    return true;
  }

  bool get_vector(const std::string& key, bool required, std::vector<double>& out) {
    const std::string* v = raw(key, required);
    if (!v) return false;
    if (!parse_vector_token(*v, out)) {
      fail(key, "expected whitespace-separated decimal numbers, got '" + *v + "'");
      return false;
    }
    return true;
  }

  void fail(const std::string& key, const std::string& msg) {
    errors_.push_back("[" + name_ + "] " + key + ": " + msg);
  }

  // Report every key that no getter consumed.
  void flag_unknown_keys() {
    if (!sec_) return;
    for (const auto& [key, value] : sec_->kv) {
      (void)value;
      if (sec_->taken.count(key) == 0) fail(key, "unknown key");
    }
  }

 private:
  Section* sec_ = nullptr;
  std::string name_;
  std::vector<std::string>& errors_;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i]);
  }
  return out;
}

std::string fmt_upper_triangle(const Eigen::MatrixXd& m) {
  std::string out;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i; j < m.cols(); ++j) {
      if (!out.empty()) out += ' ';
      out += fmt(m(i, j));
    }
  }
  return out;
}

const std::set<std::string>& known_sections() {
  static const std::set<std::string> s = {"run",      "species1",       "species2",
                                          "coupling", "grid",           "initial1",
                                          "initial2", "initial1_right", "initial2_right"};
  return s;
}

// Reads one initial-condition block.  `d` <= 0 means the grid dimension
// itself failed to parse, so size checks are skipped.
bool read_initial_block(std::map<std::string, Section>& sections, const std::string& name, int d,
                        int dof_internal, InitialBlock& blk, std::vector<std::string>& errors) {
  SectionReader r(sections, name, errors);
  if (!r.present()) {
    errors.push_back("[" + name + "]: missing required section");
    return false;
  }
  bool ok = true;
  ok &= r.get_double("n", true, blk.n);
  if (ok && !(blk.n > 0.0)) {
    r.fail("n", "must be positive, got " + fmt(blk.n));
    ok = false;
  }

  std::vector<double> u;
  if (r.get_vector("u", true, u)) {
    if (d > 0 && static_cast<int>(u.size()) != d) {
      r.fail("u", "expected " + std::to_string(d) + " numbers, got " + std::to_string(u.size()));
      ok = false;
    } else {
      blk.u = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<int>(u.size()));
    }
  } else {
    ok = false;
  }

  if (r.get_double("t_tr", true, blk.t_tr)) {
    if (!(blk.t_tr > 0.0)) {
      r.fail("t_tr", "must be positive, got " + fmt(blk.t_tr));
      ok = false;
    }
  } else {
    ok = false;
  }

  const bool need_rot = dof_internal > 0;
  if (r.get_double("t_rot", need_rot, blk.t_rot)) {
    if (need_rot && !(blk.t_rot > 0.0)) {
      r.fail("t_rot", "must be positive, got " + fmt(blk.t_rot));
      ok = false;
    }
  } else if (need_rot) {
    ok = false;
  } else {
    blk.t_rot = blk.t_tr;
  }

  if (r.get_double("theta0", false, blk.theta0)) {
    if (need_rot && !(blk.theta0 > 0.0)) {
      r.fail("theta0", "must be positive, got " + fmt(blk.theta0));
      ok = false;
    }
  } else {
    blk.theta0 = blk.t_rot;
  }

  std::vector<double> p;
  const bool has_p = r.has("p_over_n");
  if (has_p && r.get_vector("p_over_n", false, p)) {
    const int want = (d > 0) ? d * (d + 1) / 2 : -1;
    if (want > 0 && static_cast<int>(p.size()) != want) {
      r.fail("p_over_n", "expected " + std::to_string(want) +
                             " upper-triangle numbers for d = " + std::to_string(d) + ", got " +
                             std::to_string(p.size()));
      ok = false;
    } else if (want > 0) {
      blk.p_over_n = Eigen::MatrixXd::Zero(d, d);
      int idx = 0;
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
          blk.p_over_n(i, j) = p[idx];
          blk.p_over_n(j, i) = p[idx];
          ++idx;
        }
      const SpdReport rep = spd_check(blk.p_over_n);
      if (!rep.spd) {
        r.fail("p_over_n", "matrix is not positive definite (min eigenvalue " +
                               fmt(rep.min_eigenvalue) + ")");
        ok = false;
      }
      if (blk.t_tr > 0.0) {
        const double tr = blk.p_over_n.trace() / d;
        if (std::abs(tr - blk.t_tr) > 1e-9 * std::abs(blk.t_tr)) {
          r.fail("p_over_n", "trace/d = " + fmt(tr) + " must equal t_tr = " + fmt(blk.t_tr));
          ok = false;
        }
      }
    }
  } else if (has_p) {
    ok = false;
  } else if (d > 0 && blk.t_tr > 0.0) {
    blk.p_over_n = blk.t_tr * Eigen::MatrixXd::Identity(d, d);
  }

  // The derived translational relaxation temperature at t = 0 must be
  // positive for the tensor state to be admissible.
  if (ok && need_rot && d > 0) {
    const double lam0 =
        blk.t_tr + static_cast<double>(dof_internal) / d * (blk.t_rot - blk.theta0);
    if (!(lam0 > 0.0)) {
      r.fail("theta0", "t_tr + (l/d)*(t_rot - theta0) = " + fmt(lam0) +
                           " must be positive (initial relaxation temperature)");
      ok = false;
    }
  }

  r.flag_unknown_keys();
  return ok;
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().maxCoeff();
}

double lambda0_of(const InitialBlock& blk, int d, int l) {
  if (l <= 0) return blk.t_tr;
  return blk.t_tr + static_cast<double>(l) / d * (blk.t_rot - blk.theta0);
}

}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult res;
  std::vector<std::string>& errors = res.errors;

  // --- tokenize into sections ------------------------------------------------
  std::map<std::string, Section> sections;
  {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::string current;
    while (std::getline(is, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          errors.push_back("line " + std::to_string(lineno) + ": malformed section header '" +
                           line + "'");
          current.clear();
          continue;
        }
        current = trim(line.substr(1, line.size() - 2));
        if (known_sections().count(current) == 0) {
          errors.push_back("line " + std::to_string(lineno) + ": unknown section [" + current +
                           "]");
        }
        sections[current];  // created even when left empty
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                         line + "'");
        continue;
      }
      if (current.empty()) {
        errors.push_back("line " + std::to_string(lineno) + ": key outside any [section]");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) {
        errors.push_back("line " + std::to_string(lineno) + ": empty key");
        continue;
      }
      Section& sec = sections[current];
      if (sec.kv.count(key)) {
        errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "' in [" +
                         current + "]");
        continue;
      }
      sec.kv[key] = value;
      sec.line_of[key] = lineno;
    }
  }
  for (const char* name : {"run", "species1", "species2", "coupling", "grid", "initial1",
                           "initial2"}) {
    if (sections.count(name) == 0)
      errors.push_back("[" + std::string(name) + "]: missing required section");
  }

  RunConfig& cfg = res.config;

  // --- [run] -------------------------------------------------------------------
  {
    SectionReader r(sections, "run", errors);
    r.get_string("scenario", true, cfg.scenario);
    if (r.get_double("t_end", true, cfg.time.t_end) && !(cfg.time.t_end > 0.0))
      r.fail("t_end", "must be positive, got " + fmt(cfg.time.t_end));
    if (r.get_double("cfl_relax", false, cfg.time.cfl_relax) &&
        !(cfg.time.cfl_relax > 0.0 && cfg.time.cfl_relax <= 1.0))
      r.fail("cfl_relax", "must lie in (0, 1], got " + fmt(cfg.time.cfl_relax));
    if (r.get_double("cfl_adv", false, cfg.time.cfl_adv) &&
        !(cfg.time.cfl_adv > 0.0 && cfg.time.cfl_adv <= 1.0))
      r.fail("cfl_adv", "must lie in (0, 1], got " + fmt(cfg.time.cfl_adv));
    if (r.get_int("output_stride", false, cfg.time.output_stride) && cfg.time.output_stride < 1)
      r.fail("output_stride", "must be >= 1, got " + std::to_string(cfg.time.output_stride));
    r.get_u64("seed", false, cfg.seed);
    r.flag_unknown_keys();
  }

  // --- [species1] / [species2] --------------------------------------------------
  bool core_ok = true;
  for (int k = 0; k < 2; ++k) {
    SectionReader r(sections, "species" + std::to_string(k + 1), errors);
    SpeciesParams& sp = cfg.mix.species[k];
    const std::size_t before = errors.size();
    r.get_double("mass", true, sp.mass);
    r.get_int("dof_internal", true, sp.dof_internal);
    r.get_double("nu_self", true, sp.nu_self);
    r.get_double("nu_cross", true, sp.nu_cross);
    r.get_double("es_parameter", false, sp.es_parameter);
    r.get_double("z_rot", false, sp.z_rot);
    r.flag_unknown_keys();
    if (errors.size() != before) core_ok = false;
  }

  // --- [grid] --------------------------------------------------------------------
  {
    SectionReader r(sections, "grid", errors);
    const std::size_t before = errors.size();
    if (r.get_int("d", true, cfg.mix.d) && (cfg.mix.d < 1 || cfg.mix.d > 3)) {
      r.fail("d", "must be 1, 2, or 3, got " + std::to_string(cfg.mix.d));
      cfg.mix.d = 0;  // suppress dependent size checks
    }
    const bool any_internal =
        cfg.mix.species[0].dof_internal > 0 || cfg.mix.species[1].dof_internal > 0;
    if (r.get_int("n_v", true, cfg.grid.n_v) && cfg.grid.n_v < 2)
      r.fail("n_v", "must be >= 2, got " + std::to_string(cfg.grid.n_v));
    if (r.get_int("n_eta", any_internal, cfg.grid.n_eta) && any_internal && cfg.grid.n_eta < 2)
      r.fail("n_eta", "must be >= 2, got " + std::to_string(cfg.grid.n_eta));
    if (r.get_double("span_sigma_v", false, cfg.grid.span_sigma_v) &&
        !(cfg.grid.span_sigma_v > 0.0))
      r.fail("span_sigma_v", "must be positive, got " + fmt(cfg.grid.span_sigma_v));
    if (r.get_double("span_sigma_eta", false, cfg.grid.span_sigma_eta) &&
        !(cfg.grid.span_sigma_eta > 0.0))
      r.fail("span_sigma_eta", "must be positive, got " + fmt(cfg.grid.span_sigma_eta));
    if (r.get_int("n_x", false, cfg.grid.n_x) && cfg.grid.n_x < 1)
      r.fail("n_x", "must be >= 1, got " + std::to_string(cfg.grid.n_x));
    r.get_double("x_lo", false, cfg.grid.x_lo);
    r.get_double("x_hi", false, cfg.grid.x_hi);
    if (!(cfg.grid.x_hi > cfg.grid.x_lo))
      r.fail("x_hi", "domain must satisfy x_hi > x_lo, got [" + fmt(cfg.grid.x_lo) + ", " +
                         fmt(cfg.grid.x_hi) + "]");
    std::string bname;
    if (r.get_string("boundary", false, bname)) {
      try {
        cfg.grid.boundary = boundary_from_string(bname);
      } catch (const std::exception&) {
        r.fail("boundary", "expected 'periodic' or 'outflow', got '" + bname + "'");
      }
    }
    r.flag_unknown_keys();
    if (errors.size() != before) core_ok = false;
  }

  // --- [coupling] ------------------------------------------------------------------
  {
    SectionReader r(sections, "coupling", errors);
    MixtureCoupling& c = cfg.mix.coupling;
    const std::size_t before = errors.size();
    r.get_double("epsilon", true, c.epsilon);
    r.get_double("delta", true, c.delta);
    r.get_double("alpha", true, c.alpha);
    std::string graw;
    if (r.get_string("gamma", true, graw)) {
      if (graw == "max") {
        cfg.gamma_is_max = true;
        const GammaBound gb = gamma_bound(cfg.mix.species[0].mass, cfg.mix.species[1].mass,
                                          c.epsilon, c.delta, cfg.mix.d >= 1 ? cfg.mix.d : 3);
        c.gamma = gb.delta_admissible ? gb.value : 0.0;
      } else if (!parse_double_token(graw, c.gamma)) {
        r.fail("gamma", "expected a decimal number or 'max', got '" + graw + "'");
      }
    }
    r.flag_unknown_keys();
    if (errors.size() != before) core_ok = false;
  }

  // --- closure admissibility ----------------------------------------------------
  if (core_ok) {
    for (const std::string& v : validate(cfg.mix)) errors.push_back(v);
    if (cfg.mix.coupling.alpha == 1.0)
      res.warnings.push_back(
          "coupling.alpha = 1: the cross attractors exchange no momentum and no energy between "
          "the species");
    if (cfg.mix.coupling.delta == 1.0)
      res.warnings.push_back(
          "coupling.delta = 1: entropy monotonicity is only guaranteed for delta < 1");
  }

  // --- initial blocks -------------------------------------------------------------
  const int d_checked = core_ok ? cfg.mix.d : 0;
  for (int k = 0; k < 2; ++k) {
    read_initial_block(sections, "initial" + std::to_string(k + 1), d_checked,
                       cfg.mix.species[k].dof_internal, cfg.initial[k], errors);
  }
  const bool right1 = sections.count("initial1_right") > 0;
  const bool right2 = sections.count("initial2_right") > 0;
  if (right1 != right2) {
    errors.push_back(std::string("[") + (right1 ? "initial2_right" : "initial1_right") +
                     "]: two-state runs need both right blocks (only one is present)");
  }
  cfg.has_right = right1 && right2;
  if (cfg.has_right) {
    for (int k = 0; k < 2; ++k) {
      read_initial_block(sections, "initial" + std::to_string(k + 1) + "_right", d_checked,
                         cfg.mix.species[k].dof_internal, cfg.initial_right[k], errors);
    }
    if (cfg.grid.n_x < 2)
      errors.push_back("[grid] n_x: a two-state initial condition needs n_x >= 2, got " +
                       std::to_string(cfg.grid.n_x));
  }

  res.ok = errors.empty();
  return res;
}

ParseResult load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult res;
    res.errors.push_back("cannot open config file '" + path + "'");
    return res;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string print_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[run]\n";
  os << "scenario = " << cfg.scenario << "\n";
  os << "t_end = " << fmt(cfg.time.t_end) << "\n";
  os << "cfl_relax = " << fmt(cfg.time.cfl_relax) << "\n";
  os << "cfl_adv = " << fmt(cfg.time.cfl_adv) << "\n";
  os << "output_stride = " << cfg.time.output_stride << "\n";
  os << "seed = " << cfg.seed << "\n";
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = cfg.mix.species[k];
    os << "\n[species" << (k + 1) << "]\n";
    os << "mass = " << fmt(sp.mass) << "\n";
    os << "dof_internal = " << sp.dof_internal << "\n";
    os << "nu_self = " << fmt(sp.nu_self) << "\n";
    os << "nu_cross = " << fmt(sp.nu_cross) << "\n";
    os << "es_parameter = " << fmt(sp.es_parameter) << "\n";
    os << "z_rot = " << fmt(sp.z_rot) << "\n";
  }
  os << "\n[coupling]\n";
  os << "epsilon = " << fmt(cfg.mix.coupling.epsilon) << "\n";
  os << "delta = " << fmt(cfg.mix.coupling.delta) << "\n";
  os << "alpha = " << fmt(cfg.mix.coupling.alpha) << "\n";
  os << "gamma = " << (cfg.gamma_is_max ? std::string("max") : fmt(cfg.mix.coupling.gamma))
     << "\n";
  os << "\n[grid]\n";
  os << "d = " << cfg.mix.d << "\n";
  os << "n_v = " << cfg.grid.n_v << "\n";
  os << "n_eta = " << cfg.grid.n_eta << "\n";
  os << "span_sigma_v = " << fmt(cfg.grid.span_sigma_v) << "\n";
  os << "span_sigma_eta = " << fmt(cfg.grid.span_sigma_eta) << "\n";
  os << "n_x = " << cfg.grid.n_x << "\n";
  os << "x_lo = " << fmt(cfg.grid.x_lo) << "\n";
  os << "x_hi = " << fmt(cfg.grid.x_hi) << "\n";
  os << "boundary = " << to_string(cfg.grid.boundary) << "\n";
  auto print_block = [&os](const std::string& name, const InitialBlock& blk) {
    os << "\n[" << name << "]\n";
    os << "n = " << fmt(blk.n) << "\n";
    os << "u = " << fmt_vector(blk.u) << "\n";
    os << "t_tr = " << fmt(blk.t_tr) << "\n";
    os << "t_rot = " << fmt(blk.t_rot) << "\n";
    os << "theta0 = " << fmt(blk.theta0) << "\n";
    os << "p_over_n = " << fmt_upper_triangle(blk.p_over_n) << "\n";
  };
  print_block("initial1", cfg.initial[0]);
  print_block("initial2", cfg.initial[1]);
  if (cfg.has_right) {
    print_block("initial1_right", cfg.initial_right[0]);
    print_block("initial2_right", cfg.initial_right[1]);
  }
  return os.str();
}

// --- state construction ----------------------------------------------------------

std::array<std::shared_ptr<const PhaseGrid>, 2> build_grids(const RunConfig& cfg) {
  const int d = cfg.mix.d;
  std::array<std::vector<const InitialBlock*>, 2> blocks;
  for (int k = 0; k < 2; ++k) {
    blocks[k].push_back(&cfg.initial[k]);
    if (cfg.has_right) blocks[k].push_back(&cfg.initial_right[k]);
  }

  // Hull of all mean velocities (both species) per axis, and the hottest
  // temperature anywhere; the bounds must cover every attractor the closure
  // can produce, all of which mix these blocks.
  Eigen::VectorXd u_lo = Eigen::VectorXd::Constant(d, 1e300);
  Eigen::VectorXd u_hi = Eigen::VectorXd::Constant(d, -1e300);
  double t_max = 0.0;
  double theta_max = 0.0;
  for (int k = 0; k < 2; ++k) {
    const int l = cfg.mix.species[k].dof_internal;
    for (const InitialBlock* blk : blocks[k]) {
      u_lo = u_lo.cwiseMin(blk->u);
      u_hi = u_hi.cwiseMax(blk->u);
      const double lam0 = lambda0_of(*blk, d, l);
      const double eig = max_eigenvalue(blk->p_over_n);
      t_max = std::max({t_max, blk->t_tr, eig, lam0, eig * lam0 / blk->t_tr});
      if (l > 0) {
        t_max = std::max({t_max, blk->t_rot, blk->theta0});
        theta_max = std::max({theta_max, blk->t_rot, blk->theta0});
      }
    }
  }

  std::array<std::shared_ptr<const PhaseGrid>, 2> grids;
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = cfg.mix.species[k];
    const double sigma = std::sqrt(t_max / sp.mass);
    std::vector<AxisSpec> axes(d);
    for (int a = 0; a < d; ++a) {
      axes[a].lo = u_lo[a] - cfg.grid.span_sigma_v * sigma;
      axes[a].hi = u_hi[a] + cfg.grid.span_sigma_v * sigma;
      axes[a].n = cfg.grid.n_v;
    }
    if (sp.dof_internal > 0) {
      const double eta_hi = cfg.grid.span_sigma_eta * std::sqrt(theta_max / sp.mass);
      grids[k] = std::make_shared<PhaseGrid>(axes, sp.dof_internal, eta_hi, cfg.grid.n_eta);
    } else {
      grids[k] = std::make_shared<PhaseGrid>(axes, 0, 1.0, 2);
    }
  }
  return grids;
}

GaussianSpec initial_gaussian(const RunConfig& cfg, int k, const InitialBlock& blk) {
  const SpeciesParams& sp = cfg.mix.species[k];
  GaussianSpec spec;
  spec.n = blk.n;
  spec.mass = sp.mass;
  spec.u = blk.u;
  spec.cov_v = blk.p_over_n / sp.mass;
  spec.dof_internal = sp.dof_internal;
  spec.theta = blk.t_rot;
  return spec;
}

Eigen::MatrixXd initial_lambda_ten(const RunConfig& cfg, int k, const InitialBlock& blk) {
  const SpeciesParams& sp = cfg.mix.species[k];
  if (sp.dof_internal == 0) return Eigen::MatrixXd();
  const double lam0 = lambda0_of(blk, cfg.mix.d, sp.dof_internal);
  return blk.p_over_n * (lam0 / blk.t_tr);
}

SystemState build_full_state(const RunConfig& cfg,
                             const std::array<std::shared_ptr<const PhaseGrid>, 2>& grids,
                             int threads) {
  SystemState state;
  for (int k = 0; k < 2; ++k) {
    ProjectionResult proj =
        project_attractor(initial_gaussian(cfg, k, cfg.initial[k]), grids[k], threads);
    state.species[k].f = std::move(proj.dist);
    state.species[k].f.species = k;
    state.species[k].lambda_ten = initial_lambda_ten(cfg, k, cfg.initial[k]);
  }
  state.time = 0.0;
  return state;
}

ReducedState build_reduced_cell(const RunConfig& cfg,
                                const std::array<std::shared_ptr<const PhaseGrid>, 2>& vel_grids,
                                const std::array<InitialBlock, 2>& blocks, int threads) {
  ReducedState state;
  for (int k = 0; k < 2; ++k) {
    const SpeciesParams& sp = cfg.mix.species[k];
    GaussianSpec spec = initial_gaussian(cfg, k, blocks[k]);
    spec.dof_internal = 0;
    spec.theta = 1.0;
    ProjectionResult proj = project_attractor(spec, vel_grids[k], threads);
    ReducedSpecies& rs = state.species[k];
    rs.g = std::move(proj.dist);
    rs.g.species = k;
    if (sp.dof_internal > 0) {
      const double fac = sp.dof_internal * blocks[k].t_rot / sp.mass;
      rs.h.resize(rs.g.values.size());
      for (std::size_t i = 0; i < rs.h.size(); ++i) rs.h[i] = fac * rs.g.values[i];
    }
    rs.lambda_ten = initial_lambda_ten(cfg, k, blocks[k]);
  }
  state.time = 0.0;
  return state;
}

SpatialField1D build_field(const RunConfig& cfg,
                           const std::array<std::shared_ptr<const PhaseGrid>, 2>& vel_grids,
                           int threads) {
  SpatialField1D field = allocate_field(vel_grids, cfg.grid.n_x, cfg.grid.x_lo, cfg.grid.x_hi,
                                        cfg.grid.boundary);
  const ReducedState left = build_reduced_cell(cfg, vel_grids, cfg.initial, threads);
  const ReducedState right =
      cfg.has_right ? build_reduced_cell(cfg, vel_grids, cfg.initial_right, threads) : left;
  const double mid = 0.5 * (cfg.grid.x_lo + cfg.grid.x_hi);
  for (int ix = 0; ix < field.n_cells; ++ix) {
    field.store_cell(ix, field.x_center(ix) < mid ? left : right);
  }
  return field;
}

}  // namespace polykin
