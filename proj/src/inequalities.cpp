#include "lsreg/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lsreg/config.hpp"
#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// int_a^b t^e dt, 0 <= a < b.
double power_integral(double e, double a, double b) {
  if (std::abs(e + 1.0) < 1e-14) return std::log(b / a);
  return (std::pow(b, e + 1.0) - std::pow(a, e + 1.0)) / (e + 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Hardy

HardyParams HardyParams::radial(double gamma, double R) {
  HardyParams hp;
  hp.R = R;
  hp.omega_exp = 1.0;
  hp.nu_exp = 1.0 - 2.0 * gamma;
  return hp;
}

void HardyParams::validate() const {
  if (!(p > 1.0 && q >= p)) throw DomainError("Hardy exponents need 1 < p <= q");
  if (!(R > 0.0)) throw DomainError("Hardy interval length must be positive");
  double c = nu_exp / (1.0 - p);
  if (!(c > -1.0))
    throw IntegrabilityError("int_0^r nu(t)^{1/(1-p)} dt < infinity fails: exponent " + fmt(c, 6) +
                             " <= -1");
}

double HardyParams::radial_gamma() const {
  if (omega_exp != 1.0) return kNaN;
  return (1.0 - nu_exp) / 2.0;
}

double hardy_k(double p, double q) {
  double a = (p + q * p - q) / p;
  double b = (p + q * p - q) / ((p - 1.0) * q);
  return std::pow(a, 1.0 / q) * std::pow(b, (p - 1.0) / p);
}

double hardy_D_closed(double gamma, double R) {
  return std::pow(R, 1.0 + gamma) * std::pow(gamma, (gamma - 1.0) / 2.0) /
         (2.0 * std::pow(gamma + 1.0, (gamma + 1.0) / 2.0));
}

double hardy_D_functional(const HardyParams& hp, double r) {
  if (r <= 0.0 || r >= hp.R) return 0.0;
  double W = power_integral(hp.omega_exp, r, hp.R);
  double c = hp.nu_exp / (1.0 - hp.p);
  double V = std::pow(r, c + 1.0) / (c + 1.0);
  return std::pow(W, 1.0 / hp.q) * std::pow(V, (hp.p - 1.0) / hp.p);
}

HardyBracket hardy_bracket(const HardyParams& hp, int grid) {
  hp.validate();
  grid = std::max(grid, 16);
  double lo = std::log(hp.R * 1e-10), hi = std::log(hp.R);
  auto F = [&](double lr) { return hardy_D_functional(hp, std::exp(lr)); };
  int best = 0;
  double bv = -1.0;
  for (int i = 0; i < grid; ++i) {
    double lr = lo + (hi - lo) * i / (grid - 1);
    double v = F(lr);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  // golden section on the neighbouring cells
  double h = (hi - lo) / (grid - 1);
  double a = lo + h * std::max(0, best - 1), b = lo + h * std::min(grid - 1, best + 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = F(x1), f2 = F(x2);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = F(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = F(x1);
    }
  }
  HardyBracket out;
  double xm = 0.5 * (a + b);
  out.D = std::max(bv, F(xm));
  out.r_star = std::exp(xm);
  out.k = hardy_k(hp.p, hp.q);
  out.lower = out.D;
  out.upper = out.k * out.D;
  double gam = hp.radial_gamma();
  if (hp.p == 2.0 && hp.q == 2.0 && std::isfinite(gam) && gam > 0.0) {
    out.D_closed = hardy_D_closed(gam, hp.R);
    out.rel_diff = std::abs(out.D - out.D_closed) / out.D_closed;
  } else {
    out.D_closed = kNaN;
    out.rel_diff = kNaN;
  }
  return out;
}

std::vector<HardyProfile> hardy_family(const HardyParams& hp, std::uint64_t seed, int n_random) {
  hp.validate();
  std::vector<HardyProfile> fam;
  const double R = hp.R;
  fam.push_back({"one", [](double) { return 1.0; }, [](double t) { return t; }, {}});
  for (double a : {-0.75, -0.5, -0.25, 0.5, 1.0, 2.0, 4.0}) {
    if (!(hp.p * a + hp.nu_exp > -1.0)) continue;
    fam.push_back({"monomial(" + fmt(a, 4) + ")", [a](double t) { return std::pow(t, a); },
                   [a](double t) { return std::pow(t, a + 1.0) / (a + 1.0); }, {}});
  }
  // nu^{1/(1-p)} truncated at r attains at least D_r
  double c = hp.nu_exp / (1.0 - hp.p);
  double rs = hardy_bracket(hp).r_star;
  for (double m : {0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0}) {
    double r = rs * m;
    if (r >= R) continue;
    fam.push_back({"extremal(" + fmt(m, 3) + ")", [c, r](double t) { return t < r ? std::pow(t, c) : 0.0; },
                   [c, r](double t) { return std::pow(std::min(t, r), c + 1.0) / (c + 1.0); }, {r}});
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < n_random; ++k) {
    int pieces = 2 + static_cast<int>(U(rng) * 7);
    std::vector<double> br;
    for (int i = 0; i + 1 < pieces; ++i) br.push_back(k % 2 ? R * U(rng) : R * std::pow(1e-3, U(rng)));
    std::sort(br.begin(), br.end());
    std::vector<double> x{0.0};
    x.insert(x.end(), br.begin(), br.end());
    x.push_back(R);
    std::vector<double> val(pieces), cum(pieces + 1, 0.0);
    for (int i = 0; i < pieces; ++i) {
      val[i] = std::pow(U(rng), 2.0);
      cum[i + 1] = cum[i] + val[i] * (x[i + 1] - x[i]);
    }
    auto locate = [x](double t) {
      auto it = std::upper_bound(x.begin(), x.end(), t);
      int i = static_cast<int>(it - x.begin()) - 1;
      return std::clamp(i, 0, static_cast<int>(x.size()) - 2);
    };
    fam.push_back({"piecewise(" + std::to_string(k) + ")", [val, locate](double t) { return val[locate(t)]; },
                   [val, cum, x, locate](double t) {
                     int i = locate(t);
                     return cum[i] + val[i] * (t - x[i]);
                   },
                   br});
  }
  return fam;
}

double hardy_ratio(const HardyParams& hp, const HardyProfile& f) {
  std::vector<double> br = f.breaks;
  for (int j = 0; j <= 60; ++j) br.push_back(std::ldexp(hp.R, -j));
  br.push_back(0.0);
  Rule rule = composite(br, 8);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    double t = rule.x[i];
    if (t <= 0.0 || t > hp.R) continue;
    double F = f.F(t), v = f.f(t);
    lhs += rule.w[i] * std::pow(std::abs(F), hp.q) * std::pow(t, hp.omega_exp);
    rhs += rule.w[i] * std::pow(std::abs(v), hp.p) * std::pow(t, hp.nu_exp);
  }
  if (!(rhs > 0.0) || !std::isfinite(rhs) || !std::isfinite(lhs)) return kNaN;
  return std::pow(lhs, 1.0 / hp.q) / std::pow(rhs, 1.0 / hp.p);
}

HardyEmpirical hardy_empirical(const HardyParams& hp, const std::vector<HardyProfile>& family) {
  HardyEmpirical out;
  for (const auto& f : family) {
    double r = hardy_ratio(hp, f);
    if (!std::isfinite(r)) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    out.ratios.emplace_back(f.name, r);
    if (r > out.max_ratio) {
      out.max_ratio = r;
      out.argmax = f.name;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Duality bound

TestField TestField::zero() {
  return {"zero", [](const Vec3&) { return 0.0; }, [](const Vec3&) { return Vec3(Vec3::Zero()); }};
}

TestField TestField::gaussian(const Vec3& c, double width, double amp) {
  double s2 = width * width;
  return {"gaussian",
          [=](const Vec3& x) { return amp * std::exp(-(x - c).squaredNorm() / s2); },
          [=](const Vec3& x) -> Vec3 { return (-2.0 * amp / s2 * std::exp(-(x - c).squaredNorm() / s2)) * (x - c); }};
}

TestField TestField::sum(std::vector<TestField> parts, std::string name) {
  auto v = [parts](const Vec3& x) {
    double s = 0.0;
    for (const auto& p : parts) s += p.v(x);
    return s;
  };
  auto g = [parts](const Vec3& x) {
    Vec3 s = Vec3::Zero();
    for (const auto& p : parts) s += p.grad(x);
    return s;
  };
  return {std::move(name), v, g};
}

std::vector<TestField> random_test_fields(const Curve& curve, double R, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<TestField> out;
  for (int k = 0; k < count; ++k) {
    std::vector<TestField> parts;
    int ng = 1 + static_cast<int>(U(rng) * 3);
    for (int i = 0; i < ng; ++i) {
      double s = curve.length() * U(rng);
      Frame f = curve.frame(s);
      double rad = R * std::sqrt(U(rng)), th = 2 * kPi * U(rng);
      Vec3 c = curve.point(s) + rad * (std::cos(th) * f.n + std::sin(th) * f.b);
      double width = 0.05 + 0.45 * U(rng);
      double amp = 2.0 * U(rng) - 1.0;
      parts.push_back(TestField::gaussian(c, width, amp));
    }
    double c0 = U(rng) - 0.5;
    Vec3 g(U(rng) - 0.5, U(rng) - 0.5, U(rng) - 0.5);
    parts.push_back({"linear", [=](const Vec3& x) { return c0 + g.dot(x); }, [=](const Vec3&) { return g; }});
    out.push_back(TestField::sum(std::move(parts), "random(" + std::to_string(k) + ")"));
  }
  return out;
}

double duality_constant(double gamma) {
  return std::pow(gamma, gamma - 1.0) / std::pow(gamma + 1.0, gamma + 1.0);
}

RegionQuadrature duality_quadrature(const Curve& curve, double R, double gamma) {
  QuadOptions o;
  o.n = 6;
  o.n_theta = 16;
  o.scale = R / 2.0;
  o.depth = 4;
  o.min_a = -gamma;
  return region_quadrature(curve, RegionSpec::cylinder(0.0, curve.length(), 0.0, R, "duality"), o);
}

DualityResult delta_duality_bound(const Curve& curve, const LineDensity& sigma, const TestField& v,
                                  double gamma, double R, const RegionQuadrature& q) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("duality bound needs 0 < gamma < 1");
  DualityResult out;
  Rule line = composite([&] {
    std::vector<double> b;
    for (int i = 0; i <= 64; ++i) b.push_back(curve.length() * i / 64.0);
    return b;
  }(), 8);
  double lhs = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    double s = line.x[i];
    double sg = sigma(s);
    lhs += line.w[i] * sg * v.v(curve.point(s));
    s2 += line.w[i] * sg * sg;
  }
  out.lhs = std::abs(lhs);
  out.sigma_l2 = std::sqrt(s2);
  for (const auto& n : q.nodes) {
    double val = v.v(n.x);
    out.v_l2sq += n.w * val * val;
    out.grad_weighted += n.w * std::pow(n.d, -2.0 * gamma) * v.grad(n.x).squaredNorm();
  }
  out.rhs = std::sqrt(2.0 / kPi) * out.sigma_l2 *
            std::sqrt(out.v_l2sq / (R * R) + std::pow(R, 2.0 * gamma) * duality_constant(gamma) * out.grad_weighted);
  out.margin = out.rhs - out.lhs;
  return out;
}

DualityResult delta_duality_bound(const Curve& curve, const LineDensity& sigma, const TestField& v,
                                  double gamma, double R) {
  return delta_duality_bound(curve, sigma, v, gamma, R, duality_quadrature(curve, R, gamma));
}

// ---------------------------------------------------------------------------
// Sets and cubes

SingularSet SingularSet::point(const Vec3& p) {
  SingularSet e;
  e.kind = Kind::Point;
  e.a = p;
  e.b = p;
  return e;
}

SingularSet SingularSet::line(const Vec3& a, const Vec3& dir) {
  SingularSet e;
  e.kind = Kind::Line;
  e.a = a;
  e.b = a + dir.normalized();
  return e;
}

SingularSet SingularSet::segment(const Vec3& a, const Vec3& b) {
  SingularSet e;
  e.kind = Kind::Segment;
  e.a = a;
  e.b = b;
  return e;
}

double SingularSet::distance(const Vec3& x) const {
  switch (kind) {
    case Kind::Point:
      return (x - a).norm();
    case Kind::Line: {
      Vec3 e = b - a, w = x - a;
      return (w - w.dot(e) * e).norm();
    }
    case Kind::Segment: {
      Vec3 e = b - a, w = x - a;
      double t = std::clamp(w.dot(e) / e.squaredNorm(), 0.0, 1.0);
      return (w - t * e).norm();
    }
  }
  return 0.0;
}

std::string SingularSet::describe() const {
  switch (kind) {
    case Kind::Point:
      return "point";
    case Kind::Line:
      return "line";
    case Kind::Segment:
      return "segment";
  }
  return "";
}

Vec3 SingularSet::anchor() const { return kind == Kind::Segment ? Vec3(0.5 * (a + b)) : a; }

Vec3 SingularSet::normal() const {
  if (kind == Kind::Point) return Vec3::UnitX();
  Vec3 e = (b - a).normalized();
  Vec3 t = std::abs(e.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return (t - t.dot(e) * e).normalized();
}

CubeFamily CubeFamily::standard(const SingularSet& E, double ell_max, int octaves, std::uint64_t seed,
                                int n_random) {
  CubeFamily fam;
  fam.strategy = "on-set+off-set+random";
  fam.ell_max = ell_max;
  fam.ell_min = std::ldexp(ell_max, -(octaves - 1));
  Vec3 p = E.anchor(), nrm = E.normal();
  for (int j = 0; j < octaves; ++j) {
    double l = std::ldexp(ell_max, -j);
    fam.cubes.push_back({p - Vec3::Constant(0.5 * l), l, "on-set"});
    fam.cubes.push_back({p - Vec3(0.5 * l, 0.25 * l, 0.125 * l), l, "on-set"});
    fam.cubes.push_back({p + 2.0 * l * nrm - Vec3::Constant(0.5 * l), l, "off-set"});
    fam.cubes.push_back({p + 8.0 * l * nrm - Vec3::Constant(0.5 * l), l, "off-set"});
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < n_random; ++k) {
    double l = ell_max * std::pow(2.0, -(octaves - 1) * U(rng));
    Vec3 off(2 * U(rng) - 1, 2 * U(rng) - 1, 2 * U(rng) - 1);
    fam.cubes.push_back({p + 2.0 * l * off - Vec3::Constant(0.5 * l), l, "random"});
  }
  return fam;
}

int CubeFamily::octaves() const {
  if (cubes.empty()) return 0;
  double lo = cubes.front().edge, hi = lo;
  for (const auto& c : cubes) {
    lo = std::min(lo, c.edge);
    hi = std::max(hi, c.edge);
  }
  return static_cast<int>(std::lround(std::log2(hi / lo))) + 1;
}

void CubeFamily::validate(const SingularSet& E) const {
  if (octaves() < 4) throw DomainError("cube family must span at least 4 dyadic octaves");
  bool hit = false, miss = false;
  for (const auto& c : cubes) {
    double d = E.distance(c.center());
    if (d <= 0.5 * c.edge) hit = true;
    if (d > 0.5 * std::sqrt(3.0) * c.edge) miss = true;
  }
  if (!hit || !miss) throw DomainError("cube family needs cubes meeting E and cubes disjoint from E");
}

namespace {

struct OctreeCtx {
  const SingularSet& E;
  const std::vector<double>& exps;
  int level;
  std::vector<double>& acc;
  const Rule& gl;
};

void octree_cell(const OctreeCtx& k, const Vec3& c, double h, int depth) {
  double dist = k.E.distance(c);
  double hd = h * std::sqrt(3.0);
  if (dist < 2.0 * hd && depth < k.level) {
    for (int i = 0; i < 8; ++i) {
      Vec3 o((i & 1) ? 0.5 * h : -0.5 * h, (i & 2) ? 0.5 * h : -0.5 * h, (i & 4) ? 0.5 * h : -0.5 * h);
      octree_cell(k, c + o, 0.5 * h, depth + 1);
    }
    return;
  }
  bool touches = dist <= hd;
  const int n = static_cast<int>(k.gl.size());
  double w0 = h * h * h;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int cc = 0; cc < n; ++cc) {
        Vec3 x = c + h * Vec3(k.gl.x[a], k.gl.x[b], k.gl.x[cc]);
        double w = w0 * k.gl.w[a] * k.gl.w[b] * k.gl.w[cc];
        double d = k.E.distance(x);
        for (std::size_t e = 0; e < k.exps.size(); ++e) {
          if (touches && k.exps[e] < 0.0) continue;
          k.acc[e] += w * (k.exps[e] == 0.0 ? 1.0 : std::pow(d, k.exps[e]));
        }
      }
}

CubeSupResult cube_sup(const CubeFamily& fam, const std::vector<int>& levels,
                       const std::function<double(const Cube&, int)>& value) {
  CubeSupResult out;
  out.levels = levels;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    auto vals = parallel_map<double>(fam.cubes.size(), [&](std::size_t i) { return value(fam.cubes[i], levels[li]); });
    double sup = 0.0;
    for (double v : vals) sup = std::isfinite(v) ? std::max(sup, v) : std::numeric_limits<double>::infinity();
    out.level_sups.push_back(sup);
    if (li + 1 == levels.size()) {
      for (std::size_t i = 0; i < vals.size(); ++i)
        out.values.push_back({fam.cubes[i].edge, static_cast<int>(i), fam.cubes[i].tag, vals[i]});
    }
  }
  out.sup = out.level_sups.back();
  int oct = fam.octaves();
  for (int m = 4; m <= oct; ++m) {
    double cut = std::ldexp(fam.ell_max, -(m - 1)) * (1.0 - 1e-9);
    double s = 0.0;
    for (const auto& v : out.values)
      if (v.scale >= cut) s = std::max(s, v.value);
    out.octave_sups.push_back(s);
  }
  // growth that decays geometrically is a convergent tail, not divergence
  bool contracting = false;
  const auto& ls = out.level_sups;
  if (ls.size() >= 3) {
    double d1 = ls[ls.size() - 2] - ls[ls.size() - 3], d2 = ls.back() - ls[ls.size() - 2];
    contracting = d1 > 0.0 && d2 / d1 < 0.95;
  }
  out.divergent = (refinement_divergent(out.level_sups) && !contracting) ||
                  (out.octave_sups.size() >= 4 && refinement_divergent(out.octave_sups)) || !std::isfinite(out.sup);
  out.verdict = out.divergent ? "unbounded" : "bounded";
  return out;
}

}  // namespace

std::vector<double> cube_power_averages(const SingularSet& E, const Cube& Q, const std::vector<double>& exps,
                                        int level) {
  std::vector<double> acc(exps.size(), 0.0);
  OctreeCtx k{E, exps, level, acc, gauss_legendre(4)};
  octree_cell(k, Q.center(), 0.5 * Q.edge, 0);
  double vol = Q.edge * Q.edge * Q.edge;
  for (double& a : acc) a /= vol;
  return acc;
}

CubeSupResult muckenhoupt_a2(const SingularSet& E, double gamma, const CubeFamily& cubes, std::vector<int> levels) {
  cubes.validate(E);
  return cube_sup(cubes, levels, [&](const Cube& Q, int level) {
    auto av = cube_power_averages(E, Q, {2.0 * gamma, -2.0 * gamma}, level);
    return av[0] * av[1];
  });
}

double eta_star(int n, double p, double q, double alpha, double eta) { return eta + n / p - n / q - alpha; }

double SWParams::eta_star() const { return lsreg::eta_star(n, p, q, alpha, eta); }

bool SWParams::alpha_condition() const { return n / p - n / q < alpha; }

void SWParams::validate() const {
  if (!(p > 1.0 && q >= p)) throw DomainError("fractional integral weights need 1 < p <= q");
  if (!(alpha > 0.0 && alpha < n)) throw DomainError("alpha must lie in (0, n)");
  if (!(tau >= 1.0)) throw DomainError("tau must be >= 1");
}

SWAnalytic sw_analytic(const SWParams& swp) {
  swp.validate();
  SWAnalytic a;
  double co = swp.n - swp.dim_A;
  a.cond_alpha = swp.alpha_condition();
  a.eta_hi = co / swp.q;
  a.eta_lo = -co / swp.p_dual() - (swp.n / swp.p - swp.n / swp.q - swp.alpha);
  a.cond_eta = swp.eta < a.eta_hi;
  a.cond_eta_star = swp.eta_star() > -co / swp.p_dual();
  a.admissible = a.cond_alpha && a.cond_eta && a.cond_eta_star;
  return a;
}

SWSupResult sw_condition_sup(const SWParams& swp, const SingularSet& E, const CubeFamily& cubes,
                             std::vector<int> levels) {
  cubes.validate(E);
  SWSupResult out;
  out.params = swp;
  out.params.dim_A = E.assouad_dim();
  out.analytic = sw_analytic(out.params);
  const double qt = swp.q * swp.tau, pt = swp.p_dual() * swp.tau;
  const double es = swp.eta_star();
  const double pw = swp.alpha / swp.n + 1.0 / swp.q - 1.0 / swp.p;
  out.numeric = cube_sup(cubes, levels, [&](const Cube& Q, int level) {
    auto av = cube_power_averages(E, Q, {-swp.eta * qt, es * pt}, level);
    double vol = Q.edge * Q.edge * Q.edge;
    return std::pow(vol, pw) * std::pow(av[0], 1.0 / qt) * std::pow(av[1], 1.0 / pt);
  });
  out.agree = out.analytic.admissible == !out.numeric.divergent;
  return out;
}

// ---------------------------------------------------------------------------
// Fractional integral inequality

double SWTestFunction::operator()(const Vec3& y) const {
  double r2 = (y - center).squaredNorm() / (radius * radius);
  if (r2 >= 1.0) return 0.0;
  return shape == Shape::BallIndicator ? 1.0 : (1.0 - r2) * (1.0 - r2);
}

SWGrid SWGrid::doubled() const {
  SWGrid g = *this;
  g.n *= 2;
  g.n_dir *= 2;
  g.budget *= 64;
  return g;
}

namespace {

// Orthonormal pair completing e.
void complete(const Vec3& e, Vec3& u, Vec3& v) {
  Vec3 t = std::abs(e.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  u = (t - t.dot(e) * e).normalized();
  v = e.cross(u);
}

}  // namespace

double fractional_integral(const SWTestFunction& f, double alpha, const Vec3& x, int n_dir) {
  const double a = f.radius;
  Vec3 dc = f.center - x;
  double dist = dc.norm();
  const Rule& gl = gauss_legendre(std::max(2, n_dir / 2));
  if (dist > 2.0 * a) {
    // quadrature over the support around its center
    Rule rr = gl_interval(0.0, a, 3);
    Rule ct = gl_interval(-1.0, 1.0, std::max(2, n_dir / 2));
    double s = 0.0;
    int nphi = n_dir;
    for (std::size_t i = 0; i < rr.size(); ++i)
      for (std::size_t j = 0; j < ct.size(); ++j)
        for (int k = 0; k < nphi; ++k) {
          double ph = 2 * kPi * (k + 0.5) / nphi, st = std::sqrt(1.0 - ct.x[j] * ct.x[j]);
          Vec3 y = f.center + rr.x[i] * Vec3(st * std::cos(ph), st * std::sin(ph), ct.x[j]);
          double w = rr.w[i] * rr.x[i] * rr.x[i] * ct.w[j] * (2 * kPi / nphi);
          s += w * f(y) * std::pow((x - y).norm(), alpha - 3.0);
        }
    return s;
  }
  // rays from x: int_{S^2} int f(x + r w) r^{alpha-1} dr dw
  Vec3 e = dist > 0.0 ? Vec3(dc / dist) : Vec3(Vec3::UnitZ()), u, v;
  complete(e, u, v);
  double cmin = dist > a ? std::sqrt(1.0 - (a / dist) * (a / dist)) : -1.0;
  Rule ct = gl_interval(cmin, 1.0, n_dir);
  int nphi = 2 * n_dir;
  double s = 0.0;
  for (std::size_t j = 0; j < ct.size(); ++j)
    for (int k = 0; k < nphi; ++k) {
      double c = ct.x[j], st = std::sqrt(std::max(0.0, 1.0 - c * c));
      double ph = 2 * kPi * (k + 0.5) / nphi;
      Vec3 w = c * e + st * (std::cos(ph) * u + std::sin(ph) * v);
      double b = w.dot(dc), disc = b * b - (dist * dist - a * a);
      if (disc <= 0.0) continue;
      double sq = std::sqrt(disc);
      double r1 = std::max(0.0, b - sq), r2 = b + sq;
      if (r2 <= 0.0) continue;
      double ray = 0.0;
      if (f.shape == SWTestFunction::Shape::BallIndicator) {
        ray = (std::pow(r2, alpha) - std::pow(r1, alpha)) / alpha;
      } else {
        for (std::size_t i = 0; i < gl.size(); ++i) {
          double r = r1 + (r2 - r1) * 0.5 * (gl.x[i] + 1.0);
          ray += 0.5 * (r2 - r1) * gl.w[i] * f(x + r * w) * std::pow(r, alpha - 1.0);
        }
      }
      s += ct.w[j] * (2 * kPi / nphi) * ray;
    }
  return s;
}

SWRatio sw_inequality_ratio(const SWParams& swp, const SingularSet& E, const SWTestFunction& f,
                            const SWGrid& grid) {
  swp.validate();
  if (swp.n != 3) throw DomainError("fractional integral quadrature is implemented for n = 3");
  SWRatio out;
  out.name = f.name;
  const double es = swp.eta_star();
  const double delta = E.distance(f.center), a = f.radius;
  if (!(delta > a)) throw DomainError("test function support must stay away from E");

  // RHS over the support
  {
    Rule rr = gl_interval(0.0, a, 2 * grid.n);
    Rule ct = gl_interval(-1.0, 1.0, grid.n_dir);
    int nphi = 2 * grid.n_dir;
    double s = 0.0;
    for (std::size_t i = 0; i < rr.size(); ++i)
      for (std::size_t j = 0; j < ct.size(); ++j)
        for (int k = 0; k < nphi; ++k) {
          double ph = 2 * kPi * (k + 0.5) / nphi, st = std::sqrt(1.0 - ct.x[j] * ct.x[j]);
          Vec3 y = f.center + rr.x[i] * Vec3(st * std::cos(ph), st * std::sin(ph), ct.x[j]);
          double w = rr.w[i] * rr.x[i] * rr.x[i] * ct.w[j] * (2 * kPi / nphi);
          s += w * std::pow(f(y), swp.p) * std::pow(E.distance(y), -es * swp.p);
        }
    out.rhs = std::pow(s, 1.0 / swp.p);
  }
  if (!(out.rhs > 0.0)) {
    out.skipped = true;
    return out;
  }

  // radial breaks in d(., E)
  // d < domain 2^{-depth} is cut off
  const double eps = std::ldexp(grid.domain, -grid.depth);
  std::vector<double> rb{grid.domain};
  for (int j = 0; j <= grid.depth; ++j) rb.push_back(std::ldexp(grid.domain, -j));
  for (double m : {-1.0, -0.5, 0.0, 0.5, 1.0}) rb.push_back(delta + m * a);
  for (double m = 2.0; delta * m < grid.domain; m *= 2.0) rb.push_back(delta * m);
  rb.erase(std::remove_if(rb.begin(), rb.end(), [&](double x) { return x < eps; }), rb.end());
  Rule rr = composite(rb, grid.n);

  Vec3 foot = f.center - delta * E.normal();
  Vec3 e_dir = (f.center - E.anchor()).normalized();
  double lhs = 0.0;
  std::size_t evals = 0;
  auto add = [&](const Vec3& x, double w) {
    double d = E.distance(x);
    double If = fractional_integral(f, swp.alpha, x, grid.n_dir);
    evals += static_cast<std::size_t>(grid.n_dir) * grid.n_dir * 2;
    lhs += w * std::pow(std::abs(If), swp.q) * std::pow(d, -swp.eta * swp.q);
  };
  double ang = std::asin(std::min(1.0, a / delta));

  if (E.kind == SingularSet::Kind::Point) {
    // axisymmetric about the axis through the center of f
    Vec3 u, v;
    complete(e_dir, u, v);
    Rule th = composite({0.0, 0.5 * ang, ang, 2.0 * ang, kPi / 2, kPi}, grid.n);
    for (std::size_t i = 0; i < rr.size(); ++i)
      for (std::size_t j = 0; j < th.size(); ++j) {
        double r = rr.x[i], t = th.x[j];
        Vec3 x = E.a + r * (std::cos(t) * e_dir + std::sin(t) * u);
        add(x, rr.w[i] * th.w[j] * 2 * kPi * r * r * std::sin(t));
        if (evals > grid.budget) return out;
      }
  } else {
    // cylindrical around the line; mirror symmetric in phi and z
    Vec3 ax = (E.b - E.a).normalized(), nrm = E.normal(), bin = ax.cross(nrm);
    Rule ph = composite({0.0, 0.5 * ang, ang, 2.0 * ang, kPi / 2, kPi}, grid.n);
    std::vector<double> zb{0.0, grid.domain};
    for (double m = 0.25 * a; m < grid.domain; m *= 2.0) zb.push_back(m);
    Rule zr = composite(zb, grid.n);
    for (std::size_t i = 0; i < rr.size(); ++i)
      for (std::size_t j = 0; j < ph.size(); ++j)
        for (std::size_t k = 0; k < zr.size(); ++k) {
          double r = rr.x[i];
          Vec3 x = foot + r * (std::cos(ph.x[j]) * nrm + std::sin(ph.x[j]) * bin) + zr.x[k] * ax;
          add(x, 4.0 * rr.w[i] * ph.w[j] * zr.w[k] * r);
          if (evals > grid.budget) return out;
        }
  }
  out.evaluations = evals;
  out.lhs = std::pow(lhs, 1.0 / swp.q);
  out.ratio = out.lhs / out.rhs;
  return out;
}

SWInequalityResult sw_inequality_mc(const SWParams& swp, const SingularSet& E,
                                    const std::vector<SWTestFunction>& family, const SWGrid& grid) {
  SWInequalityResult out;
  std::size_t used = 0;
  for (const auto& f : family) {
    SWGrid g = grid;
    g.budget = grid.budget > used ? grid.budget - used : 0;
    SWRatio r = sw_inequality_ratio(swp, E, f, g);
    if (!r.skipped && r.evaluations == 0) {
      out.partial = true;
      break;
    }
    used += r.evaluations;
    out.ratios.push_back(r);
    if (!r.skipped) out.max_ratio = std::max(out.max_ratio, r.ratio);
  }
  return out;
}

std::vector<double> sw_ratio_refinement(const SWParams& swp, const SingularSet& E, const SWTestFunction& f,
                                        const SWGrid& grid, const std::vector<int>& depths) {
  std::vector<double> out;
  for (int d : depths) {
    SWGrid g = grid;
    g.depth = d;
    SWRatio r = sw_inequality_ratio(swp, E, f, g);
    out.push_back(r.evaluations == 0 && !r.skipped ? std::numeric_limits<double>::quiet_NaN() : r.ratio);
  }
  return out;
}

std::vector<SWTestFunction> translated_family(const SingularSet& E, const std::vector<double>& distances) {
  std::vector<SWTestFunction> out;
  for (double d : distances) {
    SWTestFunction f;
    f.center = E.anchor() + d * E.normal();
    f.radius = d / 4.0;
    f.name = "ball@" + fmt(d, 6);
    out.push_back(f);
  }
  return out;
}

void write_cube_csv(std::ostream& os, const CubeSupResult& r, const std::string& config_hash) {
  CsvWriter w(os, {"scale", "cube_id", "tag", "local_value"}, config_hash);
  for (const auto& v : r.values) w.row({fmt(v.scale), std::to_string(v.cube), v.tag, fmt(v.value)});
}

std::string cube_summary_json(const std::string& checker, const CubeSupResult& r, const std::string& params_json) {
  nlohmann::ordered_json j;
  j["checker"] = checker;
  j["sup"] = r.sup;
  j["verdict"] = r.verdict;
  j["levels"] = r.levels;
  j["level_sups"] = r.level_sups;
  j["octave_sups"] = r.octave_sups;
  j["parameters"] = params_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(params_json);
  return j.dump();
}

std::string sw_summary_json(const SWSupResult& r, const SingularSet& E) {
  nlohmann::ordered_json p;
  p["set"] = E.describe();
  p["n"] = r.params.n;
  p["p"] = r.params.p;
  p["q"] = r.params.q;
  p["alpha"] = r.params.alpha;
  p["tau"] = r.params.tau;
  p["eta"] = r.params.eta;
  p["eta_star"] = r.params.eta_star();
  p["dim_A"] = r.params.dim_A;
  p["analytic"] = r.analytic.admissible ? "admissible" : "inadmissible";
  p["eta_interval"] = {r.analytic.eta_lo, r.analytic.eta_hi};
  p["agree"] = r.agree;
  return cube_summary_json("sawyer_wheeden", r.numeric, p.dump());
}

}  // namespace lsreg
