#include "lsreg/weighted_norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lsreg/config.hpp"
#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

double grading(double exponent_plus_one) {
  // integrand ~ t^{2 e} near the singular end; g = 2 / (2 e + 2) as in the radial rule
  if (exponent_plus_one <= 0.0) return 1.0;
  return std::clamp(1.0 / exponent_plus_one, 1.0, 8.0);
}

// Dyadic breakpoints e + h 2^k (k >= 0) and e itself, restricted to [lo, hi].
void dyadic_breaks(std::vector<double>& out, double e, double dir, double h, double lo, double hi) {
  if (e >= lo && e <= hi) out.push_back(e);
  for (double w = h; w < 4.0 * (hi - lo) + h; w *= 2.0) {
    double x = e + dir * w;
    if (x > lo && x < hi) out.push_back(x);
    if ((dir > 0 && x >= hi) || (dir < 0 && x <= lo)) break;
  }
}

std::vector<double> finalize(std::vector<double> b, double lo, double hi) {
  b.push_back(lo);
  b.push_back(hi);
  std::sort(b.begin(), b.end());
  std::vector<double> out;
  for (double x : b) {
    if (x < lo || x > hi) continue;
    if (out.empty() || x - out.back() > 1e-13 * std::max(1.0, std::abs(x))) out.push_back(x);
  }
  return out;
}

// Composite rule with graded panels at breakpoints listed in 'sing'.
Rule panel_rule(const std::vector<double>& br, int n, const std::vector<double>& sing, double g) {
  Rule r;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    double a = br[i], b = br[i + 1];
    bool at_a = false, at_b = false;
    for (double e : sing) {
      if (std::abs(a - e) < 1e-13) at_a = true;
      if (std::abs(b - e) < 1e-13) at_b = true;
    }
    if (at_a && g > 1.0) {
      r.append(graded(a, b, n, g));
    } else if (at_b && g > 1.0) {
      Rule m = graded(0.0, b - a, n, g);
      for (std::size_t k = m.size(); k-- > 0;) {
        r.x.push_back(b - m.x[k]);
        r.w.push_back(m.w[k]);
      }
    } else {
      r.append(gl_interval(a, b, n));
    }
  }
  return r;
}

// Radial rule on [r0, r1]: dyadic toward 0 when r0 = 0, else doubling from r0.
Rule radial_rule(double r0, double r1, double h, int n, double g) {
  std::vector<double> b;
  if (r0 <= 0.0) {
    dyadic_breaks(b, 0.0, 1.0, h, 0.0, r1);
    return panel_rule(finalize(b, 0.0, r1), n, {0.0}, g);
  }
  for (double x = r0; x < r1; x *= 2.0) b.push_back(x);
  return panel_rule(finalize(b, r0, r1), n, {}, 1.0);
}

struct Ctx {
  const Curve& c;
  const QuadOptions& o;
  double scale, hfine;
  bool open;
  Vec3 e0, e1;
};

double endpoint_distance(const Ctx& k, const Vec3& x) {
  if (!k.open) return kInf;
  return std::min((x - k.e0).norm(), (x - k.e1).norm());
}

void cylinder_nodes(const Ctx& k, const RegionSpec& R, RegionQuadrature& q) {
  const double L = k.c.length();
  double s0 = std::max(0.0, R.s0), s1 = std::min(L, R.s1);
  if (!(s1 > s0) || !(R.r1 > R.r0)) return;
  std::vector<double> sb;
  std::vector<double> sing;
  if (k.open) {
    dyadic_breaks(sb, 0.0, 1.0, k.hfine, s0, s1);
    dyadic_breaks(sb, L, -1.0, k.hfine, s0, s1);
    if (0.5 * L > s0 && 0.5 * L < s1) sb.push_back(0.5 * L);
    sing = {0.0, L};
  } else {
    int m = 32;
    for (int i = 1; i < m; ++i) sb.push_back(L * i / m);
  }
  double gs = R.r0 <= 0.0 ? grading(k.o.min_a + k.o.min_b + 1.5) : 1.0;
  Rule rs = panel_rule(finalize(sb, s0, s1), k.o.n, sing, gs);
  Rule rr = radial_rule(R.r0, R.r1, k.hfine, k.o.n, grading(k.o.min_a + 1.0));
  q.touches_endpoint = k.open && R.r0 <= 0.0 && (s0 <= 0.0 || s1 >= L);
  if (k.o.axisymmetric) {
    Frame f = k.c.frame(0.0);
    Vec3 a = k.c.point(0.0);
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = 0; j < rr.size(); ++j) {
        QuadNode nd;
        nd.r = rr.x[j];
        nd.s = rs.x[i];
        nd.x = a + nd.s * f.t + nd.r * f.n;
        nd.w = 2.0 * kPi * nd.r * rr.w[j] * rs.w[i];
        nd.d = nd.r;
        nd.d_e = endpoint_distance(k, nd.x);
        nd.t = f.t;
        q.nodes.push_back(nd);
      }
    return;
  }
  const int nt = std::max(4, k.o.n_theta);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    double s = rs.x[i];
    Vec3 t = k.c.tangent(s);
    for (std::size_t j = 0; j < rr.size(); ++j)
      for (int m = 0; m < nt; ++m) {
        CylCoords cc{rr.x[j], 2.0 * kPi * (m + 0.5) / nt, s};
        QuadNode nd;
        nd.x = to_cartesian(k.c, cc);
        nd.r = cc.r;
        nd.s = s;
        nd.w = tubular_jacobian(k.c, cc) * rr.w[j] * rs.w[i] * 2.0 * kPi / nt;
        nd.d = cc.r;
        nd.d_e = endpoint_distance(k, nd.x);
        nd.t = t;
        q.nodes.push_back(nd);
      }
  }
}

void cap_nodes(const Ctx& k, const RegionSpec& R, RegionQuadrature& q) {
  if (!k.open) return;
  bool start = R.kind == Region::CapStart;
  double se = start ? 0.0 : k.c.length();
  Frame f = k.c.frame(se);
  Vec3 e = start ? k.e0 : k.e1;
  Vec3 tin = start ? f.t : Vec3(-f.t);  // inward tangent
  // xi from the inward tangent; the cap is xi in [pi/2, pi]
  Rule rR = radial_rule(R.r0, R.r1, k.hfine, k.o.n, grading(k.o.min_a + k.o.min_b + 1.5));
  Rule rx = composite({0.5 * kPi, 0.75 * kPi, kPi}, k.o.n);
  q.touches_endpoint = R.r0 <= 0.0;
  const int nt = k.o.axisymmetric ? 1 : std::max(4, k.o.n_theta);
  for (std::size_t i = 0; i < rR.size(); ++i)
    for (std::size_t j = 0; j < rx.size(); ++j)
      for (int m = 0; m < nt; ++m) {
        double Rr = rR.x[i], xi = rx.x[j];
        double th = k.o.axisymmetric ? 0.0 : 2.0 * kPi * (m + 0.5) / nt;
        Vec3 radial = std::cos(th) * f.n + std::sin(th) * f.b;
        QuadNode nd;
        nd.x = e + Rr * (std::cos(xi) * tin + std::sin(xi) * radial);
        double jac = Rr * Rr * std::sin(xi) * rR.w[i] * rx.w[j];
        nd.w = k.o.axisymmetric ? 2.0 * kPi * jac : jac * 2.0 * kPi / nt;
        nd.d = Rr;
        nd.d_e = endpoint_distance(k, nd.x);
        nd.t = f.t;
        nd.r = Rr;
        nd.s = se;
        q.nodes.push_back(nd);
      }
}

bool on_axis(const Curve& c, const Vec3& p) {
  Vec3 a = c.point(0.0), t = c.tangent(0.0);
  Vec3 d = p - a;
  return (d - d.dot(t) * t).norm() < 1e-12 * std::max(1.0, c.length());
}

void far_nodes_axisym(const Ctx& k, const RegionSpec& R, RegionQuadrature& q) {
  const double L = k.c.length();
  Vec3 a = k.c.point(0.0);
  Frame f = k.c.frame(0.0);
  double zc = (R.center - a).dot(f.t), A = R.outer, r0 = R.r0;
  if (!(A > r0 + std::max(zc, L - zc)))
    throw DomainError("far region: ball must contain B(curve, r0)");
  const int n = k.o.n;
  Rule rt = composite({0.0, 0.125, 0.25, 0.5, 1.0}, n);
  // side: z in [0, L], r from r0 to the sphere
  Rule rz = composite([&] {
    std::vector<double> b;
    for (int i = 0; i <= 8; ++i) b.push_back(L * i / 8.0);
    return b;
  }(), n);
  for (std::size_t i = 0; i < rz.size(); ++i) {
    double z = rz.x[i];
    double rmax = std::sqrt(A * A - (z - zc) * (z - zc));
    for (std::size_t j = 0; j < rt.size(); ++j) {
      double r = r0 + rt.x[j] * (rmax - r0);
      QuadNode nd;
      nd.x = a + z * f.t + r * f.n;
      nd.w = 2.0 * kPi * r * (rmax - r0) * rt.w[j] * rz.w[i];
      nd.r = r;
      nd.s = z;
      nd.d = r;
      nd.d_e = endpoint_distance(k, nd.x);
      nd.t = f.t;
      q.nodes.push_back(nd);
    }
  }
  // ends: polar around each endpoint, half plane behind it
  Rule rw = composite({0.5 * kPi, 0.625 * kPi, 0.75 * kPi, 0.875 * kPi, kPi}, n);
  for (int side = 0; side < 2; ++side) {
    double ze = side == 0 ? 0.0 : L;
    double sgn = side == 0 ? 1.0 : -1.0;  // inward direction along t
    for (std::size_t i = 0; i < rw.size(); ++i) {
      double om = rw.x[i];
      double cz = sgn * std::cos(om), cr = std::sin(om);  // ray direction (z, r)
      double b = cz * (ze - zc);
      double Rmax = -b + std::sqrt(b * b - ((ze - zc) * (ze - zc) - A * A));
      for (std::size_t j = 0; j < rt.size(); ++j) {
        double Rr = r0 + rt.x[j] * (Rmax - r0);
        double z = ze + Rr * cz, r = Rr * cr;
        QuadNode nd;
        nd.x = a + z * f.t + r * f.n;
        nd.w = 2.0 * kPi * r * Rr * (Rmax - r0) * rt.w[j] * rw.w[i];
        nd.r = r;
        nd.s = ze;
        nd.d = Rr;
        nd.d_e = endpoint_distance(k, nd.x);
        nd.t = f.t;
        q.nodes.push_back(nd);
      }
    }
  }
}

// Indicator cells over a bounding box; any curve kind.
void cartesian_nodes(const Ctx& k, const RegionSpec& R, RegionQuadrature& q) {
  Vec3 lo, hi;
  if (R.kind == Region::Far) {
    lo = R.center - Vec3::Constant(R.outer);
    hi = R.center + Vec3::Constant(R.outer);
  } else {
    lo = Vec3::Constant(kInf);
    hi = Vec3::Constant(-kInf);
    const double L = k.c.length();
    for (int i = 0; i <= 256; ++i) {
      Vec3 p = k.c.point(std::min(L, L * i / 256.0));
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    lo.array() -= R.r1;
    hi.array() += R.r1;
  }
  const int N = k.o.cartesian_cells > 0 ? k.o.cartesian_cells : 24;
  const Rule& g = gauss_legendre(2);
  Vec3 h = (hi - lo) / N;
  double big = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int l = 0; l < N; ++l)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
              Vec3 x(lo[0] + h[0] * (i + 0.5 + 0.5 * g.x[a]), lo[1] + h[1] * (j + 0.5 + 0.5 * g.x[b]),
                     lo[2] + h[2] * (l + 0.5 + 0.5 * g.x[c]));
              Projection p = project_and_distance(k.c, x, big);
              bool in = false;
              switch (R.kind) {
                case Region::Cylinder:
                  in = p.axial == 0.0 && p.d >= R.r0 && p.d < R.r1 && p.s >= R.s0 && p.s <= R.s1;
                  break;
                case Region::CapStart:
                  in = k.open && p.axial < 0.0 && p.s == 0.0 && p.d >= R.r0 && p.d < R.r1;
                  break;
                case Region::CapEnd:
                  in = k.open && p.axial > 0.0 && p.d >= R.r0 && p.d < R.r1;
                  break;
                case Region::Far:
                  in = (x - R.center).norm() <= R.outer && p.d >= R.r0;
                  break;
              }
              if (!in) continue;
              QuadNode nd;
              nd.x = x;
              nd.w = h[0] * h[1] * h[2] * 0.125 * g.w[a] * g.w[b] * g.w[c];
              nd.d = p.d;
              nd.d_e = p.d_e;
              nd.r = p.r;
              nd.s = p.s;
              nd.t = k.c.tangent(p.s);
              q.nodes.push_back(nd);
            }
}

}  // namespace

RegionSpec RegionSpec::cylinder(double s0, double s1, double r0, double r1, std::string name, int piece) {
  RegionSpec r;
  r.kind = Region::Cylinder;
  r.s0 = s0;
  r.s1 = s1;
  r.r0 = r0;
  r.r1 = r1;
  r.name = std::move(name);
  r.piece = piece;
  return r;
}

RegionSpec RegionSpec::cap(Region side, double r0, double r1, std::string name) {
  if (side != Region::CapStart && side != Region::CapEnd) throw DomainError("cap: side must be a cap");
  RegionSpec r;
  r.kind = side;
  r.r0 = r0;
  r.r1 = r1;
  r.name = name.empty() ? to_string(side) : std::move(name);
  return r;
}

RegionSpec RegionSpec::far(const Vec3& center, double outer, double r0, std::string name) {
  RegionSpec r;
  r.kind = Region::Far;
  r.center = center;
  r.outer = outer;
  r.r0 = r0;
  r.name = std::move(name);
  return r;
}

double RegionQuadrature::volume() const {
  double v = 0.0;
  for (const auto& n : nodes) v += n.w;
  return v;
}

RegionQuadrature region_quadrature(const Curve& curve, const RegionSpec& region, const QuadOptions& opt) {
  RegionQuadrature q;
  q.spec = region;
  double scale = opt.scale > 0 ? opt.scale : curve.R0() / 8.0;
  Ctx k{curve, opt, scale, scale * std::ldexp(1.0, -opt.depth), !curve.closed(), curve.point(0.0),
        curve.point(curve.length())};
  if (region.kind != Region::Far && region.r1 > curve.R0() * (1.0 + 1e-12))
    throw TubularError("region radius exceeds the tubular radius R0");
  bool straight = curve.kind() == CurveKind::Segment;
  bool axis = opt.axisymmetric && straight;
  if (opt.axisymmetric && !straight) throw DomainError("axisymmetric quadrature needs a straight segment");
  QuadOptions o2 = opt;
  o2.axisymmetric = axis;
  Ctx k2{curve, o2, k.scale, k.hfine, k.open, k.e0, k.e1};
  q.axisymmetric = axis;
  bool cartesian = opt.cartesian_cells > 0 || curve.kind() == CurveKind::PolygonalChain;
  if (cartesian) {
    if (axis) throw DomainError("axisymmetric quadrature has no Cartesian fallback");
    cartesian_nodes(k2, region, q);
    q.touches_endpoint = k.open && region.kind != Region::Far && region.r0 <= 0.0;
    return q;
  }
  switch (region.kind) {
    case Region::Cylinder:
      cylinder_nodes(k2, region, q);
      break;
    case Region::CapStart:
    case Region::CapEnd:
      cap_nodes(k2, region, q);
      break;
    case Region::Far:
      if (axis && on_axis(curve, region.center)) {
        far_nodes_axisym(k2, region, q);
      } else {
        if (axis) throw DomainError("axisymmetric far region needs a center on the axis");
        cartesian_nodes(k2, region, q);
      }
      break;
  }
  return q;
}

Integrability weight_integrability(const WeightSpec& w, double shift_a, double shift_b, Region kind,
                                   bool touches_axis, bool touches_endpoint) {
  double a = w.gamma + shift_a, b = w.mu + shift_b;
  auto fmtd = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  if (kind == Region::Far) return {true, ""};
  if (kind == Region::Cylinder && touches_axis && !(a > -1.0))
    return {false, "gamma > -1 (exponent on d is " + fmtd(a) + ")"};
  if (touches_endpoint && !(a + b > -1.5))
    return {false, "gamma + mu > -3/2 (exponents sum to " + fmtd(a + b) + ")"};
  return {true, ""};
}

Integrability weight_integrability(const WeightSpec& w, double shift_a, double shift_b,
                                   const RegionQuadrature& q) {
  bool axis = q.spec.r0 <= 0.0;
  return weight_integrability(w, shift_a, shift_b, q.spec.kind, axis, q.touches_endpoint);
}

double weighted_seminorm(const NodeField& f2, const RegionQuadrature& q, const WeightSpec& w, double shift_a,
                         double shift_b, bool force) {
  if (!force) {
    Integrability ok = weight_integrability(w, shift_a, shift_b, q);
    if (!ok.finite) throw IntegrabilityError("non-integrable weight: " + ok.violated);
  }
  double a2 = 2.0 * (w.gamma + shift_a), b2 = 2.0 * (w.mu + shift_b);
  double sum = 0.0;
  for (const auto& n : q.nodes) {
    double v = f2(n);
    if (v == 0.0) continue;
    double wt = n.w;
    if (a2 != 0.0) wt *= std::pow(n.d, a2);
    if (b2 != 0.0 && std::isfinite(n.d_e)) wt *= std::pow(n.d_e, b2);
    sum += wt * v;
  }
  return sum;
}

CheckedSeminorm weighted_seminorm_checked(const NodeField& f2, const Curve& curve, const RegionSpec& region,
                                          QuadOptions opt, const WeightSpec& w, double shift_a, double shift_b,
                                          double tol) {
  CheckedSeminorm c;
  c.value = weighted_seminorm(f2, region_quadrature(curve, region, opt), w, shift_a, shift_b);
  opt.n += 2;
  opt.depth += 2;
  opt.n_theta *= 2;
  if (opt.cartesian_cells > 0) opt.cartesian_cells *= 2;
  c.refined = weighted_seminorm(f2, region_quadrature(curve, region, opt), w, shift_a, shift_b);
  double den = std::max(std::abs(c.refined), 1e-300);
  c.disagreement = std::abs(c.refined - c.value) / den;
  c.flagged = c.disagreement > tol;
  return c;
}

double split_density(const Jet& j, const Vec3& t, int kperp, int ks) {
  Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - t * t.transpose();
  switch (kperp * 10 + ks) {
    case 0:
      return j.u * j.u;
    case 10:
      return (P * j.g).squaredNorm();
    case 1: {
      double v = t.dot(j.g);
      return v * v;
    }
    case 20:
      return (P * j.H * P).squaredNorm();
    case 11:
      return 2.0 * (P * j.H * t).squaredNorm();
    case 2: {
      double v = t.dot(j.H * t);
      return v * v;
    }
    default:
      throw UnsupportedOrderError("split_density: total order must be <= 2");
  }
}

NormReport split_norm(const SplitField& f, const std::vector<RegionQuadrature>& regions, int kperp, int ks,
                      double a, double b, double rho) {
  NormReport rep;
  rep.rho = rho;
  rep.kperp = kperp;
  rep.ks = ks;
  rep.a = a;
  rep.b = b;
  rep.weight = {a, b};
  double tot = 0.0;
  for (const auto& q : regions) {
    double v = weighted_seminorm([&](const QuadNode& n) { return f(n, kperp, ks); }, q, {a, b}, 0.0, 0.0, true);
    Contribution c;
    c.region = q.spec.name;
    c.kind = q.spec.kind;
    c.piece = q.spec.piece;
    c.value = std::sqrt(std::max(0.0, v));
    rep.parts.push_back(c);
    tot += std::max(0.0, v);
  }
  rep.total = std::sqrt(tot);
  return rep;
}

KondratievReport kondratiev_norm(const SplitField& f, int m, const WeightSpec& w,
                                 const std::vector<RegionQuadrature>& regions, bool isotropic, double rho) {
  if (m < 0 || m > 2) throw UnsupportedOrderError("kondratiev_norm: m must be in 0..2");
  KondratievReport K;
  K.m = m;
  K.weight = w;
  K.isotropic = isotropic;
  double tot = 0.0;
  for (int k = 0; k <= m; ++k)
    for (int ks = 0; ks <= k; ++ks) {
      int kp = k - ks;
      double sa = isotropic ? k : kp, sb = isotropic ? 0.0 : ks;
      double mu = isotropic ? 0.0 : w.mu;
      for (const auto& q : regions) {
        Integrability ok = weight_integrability({w.gamma, mu}, sa, sb, q);
        if (!ok.finite) throw IntegrabilityError("non-integrable weight in " + q.spec.name + ": " + ok.violated);
      }
      NormReport r = split_norm(f, regions, kp, ks, w.gamma + sa, mu + sb, rho);
      r.weight = w;
      r.isotropic = isotropic;
      tot += r.total * r.total;
      K.terms.push_back(r);
    }
  K.total = std::sqrt(tot);
  return K;
}

std::vector<RegionSpec> tube_regions(const Curve& curve, double rho, double R0) {
  std::vector<RegionSpec> out;
  if (curve.closed()) {
    out.push_back(RegionSpec::cylinder(0.0, curve.length(), 0.0, R0, "C"));
    return out;
  }
  DyadicCylinderDecomposition dd = dyadic_decomposition(curve, rho, R0);
  for (const auto& p : dd.pieces)
    out.push_back(RegionSpec::cylinder(p.s0, p.s1, 0.0, R0, "C_" + std::to_string(p.j), p.j));
  out.push_back(RegionSpec::cap(Region::CapStart, 0.0, R0));
  out.push_back(RegionSpec::cap(Region::CapEnd, 0.0, R0));
  return out;
}

void write_norm_csv(std::ostream& os, const std::vector<NormReport>& reports, const std::string& config_hash) {
  CsvWriter w(os, {"rho", "k_perp", "k_s", "gamma", "mu", "region", "contribution", "total", "diag"}, config_hash);
  for (const auto& r : reports) {
    for (const auto& c : r.parts)
      w.row({fmt(r.rho), std::to_string(r.kperp), std::to_string(r.ks), fmt(r.weight.gamma), fmt(r.weight.mu),
             c.region, fmt(c.value), fmt(r.total), fmt(c.diag)});
  }
}

}  // namespace lsreg
