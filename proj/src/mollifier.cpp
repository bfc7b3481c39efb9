#include "lsreg/mollifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "lsreg/config.hpp"
#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// p(t) = exp(1/(t-1)) on t < 1 and its first two derivatives.
double p0(double t) { return t < 1.0 ? std::exp(1.0 / (t - 1.0)) : 0.0; }
double p1(double t) {
  if (t >= 1.0) return 0.0;
  double u = t - 1.0;
  return -p0(t) / (u * u);
}
double p2(double t) {
  if (t >= 1.0) return 0.0;
  double u = t - 1.0, u2 = u * u;
  return p0(t) * (1.0 / (u2 * u2) + 2.0 / (u2 * u));
}

double norm_const(int n, BumpShape shape) {
  if (shape == BumpShape::Smooth) {
    if (n == 1) return 1.0 / (2.0 * integrate_adaptive([](double x) { return p0(x * x); }, 0.0, 1.0, 1e-14));
    return 1.0 / (2.0 * kPi * integrate_adaptive([](double r) { return p0(r * r) * r; }, 0.0, 1.0, 1e-14));
  }
  if (n == 1) return 1.0 / (2.0 * integrate_adaptive([](double x) { return p0(x); }, 0.0, 1.0, 1e-14));
  return 1.0 / (2.0 * kPi * integrate_adaptive([](double r) { return p0(r) * r; }, 0.0, 1.0, 1e-14));
}

// Unscaled derivative of phi_n for |beta| <= 2.
double bump_d2(int n, const std::array<int, 2>& beta, const std::array<double, 2>& x, BumpShape shape) {
  double C = bump_normalization(n, shape);
  int b1 = beta[0], b2 = n == 2 ? beta[1] : 0;
  int order = b1 + b2;
  if (shape == BumpShape::Smooth) {
    double t = x[0] * x[0] + (n == 2 ? x[1] * x[1] : 0.0);
    if (t >= 1.0) return 0.0;
    if (order == 0) return C * p0(t);
    if (order == 1) return C * 2.0 * p1(t) * (b1 ? x[0] : x[1]);
    int i = b1 == 2 ? 0 : (b2 == 2 ? 1 : -1);
    if (i >= 0) return C * (4.0 * p2(t) * x[i] * x[i] + 2.0 * p1(t));
    return C * 4.0 * p2(t) * x[0] * x[1];
  }
  // literal profile exp(1/(|x|-1)), singular derivatives at the origin
  double u = std::sqrt(x[0] * x[0] + (n == 2 ? x[1] * x[1] : 0.0));
  if (u >= 1.0) return 0.0;
  if (order == 0) return C * p0(u);
  if (u == 0.0) return std::nan("");
  double q1 = p1(u), q2 = p2(u);
  if (order == 1) return C * q1 * (b1 ? x[0] : x[1]) / u;
  auto xi = [&](int i) { return x[i]; };
  int i, j;
  if (b1 == 2) i = j = 0;
  else if (b2 == 2) i = j = 1;
  else { i = 0; j = 1; }
  double delta = i == j ? 1.0 : 0.0;
  return C * (q2 * xi(i) * xi(j) / (u * u) + q1 * (delta / u - xi(i) * xi(j) / (u * u * u)));
}

// Richardson-extrapolated central difference of g at x along coordinate i.
template <class G>
double richardson(G&& g, std::array<double, 2> x, int i, double h) {
  auto cd = [&](double hh) {
    std::array<double, 2> xp = x, xm = x;
    xp[i] += hh;
    xm[i] -= hh;
    return (g(xp) - g(xm)) / (2.0 * hh);
  };
  return (4.0 * cd(0.5 * h) - cd(h)) / 3.0;
}

double gl_integrate(double a, double b, int n, const std::function<double(double)>& f) {
  if (!(b > a)) return 0.0;
  const Rule& g = gauss_legendre(n);
  double c = 0.5 * (a + b), h = 0.5 * (b - a), acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) acc += g.w[k] * f(c + h * g.x[k]);
  return acc * h;
}

constexpr int kInnerNodes = 32;

}  // namespace

double bump_normalization(int n, BumpShape shape) {
  if (n != 1 && n != 2) throw DomainError("bump dimension must be 1 or 2");
  static const double table[2][2] = {{norm_const(1, BumpShape::Smooth), norm_const(2, BumpShape::Smooth)},
                                     {norm_const(1, BumpShape::Unsquared),
                                      norm_const(2, BumpShape::Unsquared)}};
  return table[shape == BumpShape::Smooth ? 0 : 1][n - 1];
}

double bump_eval(int n, const std::array<double, 2>& x, BumpShape shape) {
  return bump_d2(n, {0, 0}, x, shape);
}

double scaled_bump_eval(int n, double rho, const std::array<double, 2>& x, BumpShape shape) {
  return bump_eval(n, {x[0] / rho, x[1] / rho}, shape) / std::pow(rho, n);
}

double scaled_bump_deriv(int n, double rho, const std::array<int, 2>& beta, const std::array<double, 2>& x,
                         BumpShape shape) {
  if (n != 1 && n != 2) throw DomainError("bump dimension must be 1 or 2");
  std::array<int, 2> b = {beta[0], n == 2 ? beta[1] : 0};
  if (b[0] < 0 || b[1] < 0) throw DomainError("negative multi-index");
  int order = b[0] + b[1];
  if (order > 4) throw UnsupportedOrderError("bump derivative order " + std::to_string(order) + " > 4");
  std::array<double, 2> xs = {x[0] / rho, n == 2 ? x[1] / rho : 0.0};
  double scale = std::pow(rho, -(n + order));
  if (order <= 2) {
    if (xs[0] * xs[0] + xs[1] * xs[1] >= 1.0) return 0.0;
    return scale * bump_d2(n, b, xs, shape);
  }
  // peel one derivative off in the unscaled variable; h = 1e-3 there is rho 1e-3 outside
  int i = b[0] > 0 ? 0 : 1;
  std::array<int, 2> rest = b;
  --rest[i];
  auto g = [&](const std::array<double, 2>& y) { return scaled_bump_deriv(n, 1.0, rest, y, shape); };
  return scale * richardson(g, xs, i, 1e-3);
}

double phi1_deriv(double rho, int k, double u) {
  if (std::abs(u) >= rho) return 0.0;
  return scaled_bump_deriv(1, rho, {k, 0}, {u, 0.0});
}

double phi2_radial(double rho, int k, double r) {
  if (r >= rho) return 0.0;
  double C = bump_normalization(2);
  double t = (r / rho) * (r / rho), r2 = rho * rho;
  switch (k) {
    case 0: return C * p0(t) / r2;
    case 1: return C * p1(t) * 2.0 * r / (r2 * r2);
    case 2: return C * (4.0 * p2(t) * r * r / (r2 * r2 * r2) + 2.0 * p1(t) / (r2 * r2));
    default: throw UnsupportedOrderError("radial bump derivative order > 2");
  }
}

// ---------------------------------------------------------------- densities

struct LineDensity::Table {
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  double t0, t1;
};

LineDensity LineDensity::constant(double c) {
  LineDensity d;
  d.variant_ = Variant::Constant;
  d.a_ = c;
  return d;
}

LineDensity LineDensity::polynomial(std::vector<double> coeffs) {
  LineDensity d;
  d.variant_ = Variant::Polynomial;
  d.c_ = std::move(coeffs);
  if (d.c_.empty()) d.c_.push_back(0.0);
  return d;
}

LineDensity LineDensity::trigonometric(double a, double b, double omega, double phase) {
  LineDensity d;
  d.variant_ = Variant::Trigonometric;
  d.a_ = a;
  d.b_ = b;
  d.omega_ = omega;
  d.phase_ = phase;
  return d;
}

LineDensity LineDensity::tabulated(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size() || t.size() < 4) throw DomainError("tabulated density needs >= 4 samples");
  double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[i - 1] - h) > 1e-6 * std::max(1.0, h))
      throw DomainError("tabulated density requires a uniform grid");
  LineDensity d;
  d.variant_ = Variant::Tabulated;
  d.m_ = 2;
  d.table_ = std::make_shared<Table>(
      Table{boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), t.front(), h),
            t.front(), t.back()});
  return d;
}

LineDensity LineDensity::from_config(const Config& cfg, double L, const std::string& sec) {
  std::string v = cfg.get_string(sec, "variant", "constant");
  if (v == "constant") return constant(cfg.get_double(sec, "value", 1.0));
  if (v == "polynomial") return polynomial(cfg.get_list(sec, "coeffs", {1.0}));
  if (v == "trig" || v == "trigonometric")
    return trigonometric(cfg.get_double(sec, "a", 1.0), cfg.get_double(sec, "b", 0.5),
                         cfg.get_double(sec, "omega", 2.0 * kPi / L), cfg.get_double(sec, "phase", 0.0));
  if (v == "tabulated") {
    std::string path = cfg.get_string(sec, "table");
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open density table: " + path);
    std::vector<double> t, s;
    std::string line;
    while (std::getline(in, line)) {
      for (char& ch : line)
        if (ch == ',') ch = ' ';
      std::istringstream ls(line);
      double a, b;
      if (ls >> a >> b) {
        t.push_back(a);
        s.push_back(b);
      }
    }
    return tabulated(t, s);
  }
  throw DomainError("unknown density variant: " + v);
}

std::string LineDensity::describe() const {
  std::ostringstream o;
  switch (variant_) {
    case Variant::Constant: o << "constant(" << a_ << ")"; break;
    case Variant::Polynomial:
      o << "polynomial(";
      for (std::size_t i = 0; i < c_.size(); ++i) o << (i ? ";" : "") << c_[i];
      o << ")";
      break;
    case Variant::Trigonometric:
      o << "trig(" << a_ << ";" << b_ << ";" << omega_ << ";" << phase_ << ")";
      break;
    case Variant::Tabulated: o << "tabulated"; break;
  }
  return o.str();
}

double LineDensity::deriv(int l, double t) const {
  if (l < 0) throw DomainError("negative derivative order");
  if (l > m_) throw SmoothnessError("density derivative order " + std::to_string(l) + " exceeds m = " +
                                    std::to_string(m_));
  switch (variant_) {
    case Variant::Constant: return l == 0 ? a_ : 0.0;
    case Variant::Polynomial: {
      double acc = 0.0;
      for (std::size_t i = c_.size(); i-- > static_cast<std::size_t>(l);) {
        double f = 1.0;
        for (int j = 0; j < l; ++j) f *= static_cast<double>(i - j);
        acc = acc * t + c_[i] * f;
      }
      return acc;
    }
    case Variant::Trigonometric: {
      double v = b_ * std::pow(omega_, l) * std::sin(omega_ * t + phase_ + 0.5 * kPi * l);
      return l == 0 ? a_ + v : v;
    }
    case Variant::Tabulated: {
      double tc = std::clamp(t, table_->t0, table_->t1);
      if (l == 0) return table_->spline(tc);
      if (l == 1) return table_->spline.prime(tc);
      return table_->spline.double_prime(tc);
    }
  }
  return 0.0;
}

double LineDensity::l2_norm(double L) const {
  return std::sqrt(integrate_adaptive([&](double t) { double v = deriv(0, t); return v * v; }, 0.0, L, 1e-12));
}

std::string to_string(MollifierMode m) {
  switch (m) {
    case MollifierMode::Open: return "open";
    case MollifierMode::Periodic: return "periodic";
    case MollifierMode::Trimmed: return "trimmed";
  }
  return "?";
}

// ---------------------------------------------------------------- source

RegularizedSource::RegularizedSource(Curve curve, LineDensity density, double rho,
                                     std::optional<MollifierMode> mode, double kappa)
    : curve_(std::move(curve)), density_(std::move(density)), rho_(rho) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  if (rho >= curve_.R0())
    throw TubularError("rho = " + std::to_string(rho) + " must be below R0 = " + std::to_string(curve_.R0()));
  if (mode) mode_ = *mode;
  else if (curve_.closed()) mode_ = MollifierMode::Periodic;
  else if (curve_.kind() == CurveKind::PolygonalChain) mode_ = MollifierMode::Trimmed;
  else mode_ = MollifierMode::Open;
  if (mode_ == MollifierMode::Periodic && !curve_.closed())
    throw DomainError("periodic mollifier needs a closed curve");
  if (mode_ != MollifierMode::Periodic && curve_.closed())
    throw DomainError("closed curves use the periodic mollifier");

  bool chain = mode_ == MollifierMode::Trimmed && curve_.kind() == CurveKind::PolygonalChain;
  if (chain) {
    const auto& vs = curve_.vertex_s();
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
      off_.push_back(vs[i]);
      len_.push_back(vs[i + 1] - vs[i]);
      straight_.push_back({curve_.vertices()[i], curve_.frame(0.5 * (vs[i] + vs[i + 1]))});
    }
  } else {
    off_.push_back(0.0);
    len_.push_back(curve_.length());
    if (curve_.kind() == CurveKind::Segment) straight_.push_back({curve_.point(0.0), curve_.frame(0.0)});
  }
  if (mode_ == MollifierMode::Trimmed)
    kappa_ = kappa > 0.0 ? kappa : std::ceil(2.0 / std::sin(0.5 * curve_.min_interior_angle()));
}

int RegularizedSource::pieces() const { return static_cast<int>(len_.size()); }
double RegularizedSource::piece_length(int i) const { return len_.at(i); }
double RegularizedSource::piece_offset(int i) const { return off_.at(i); }

std::pair<double, double> RegularizedSource::window(int i) const {
  double L = len_.at(i);
  switch (mode_) {
    case MollifierMode::Open: return {rho_, L - rho_};
    case MollifierMode::Trimmed: return {kappa_ * rho_, L - kappa_ * rho_};
    case MollifierMode::Periodic: return {-std::numeric_limits<double>::infinity(),
                                          std::numeric_limits<double>::infinity()};
  }
  return {0, 0};
}

std::pair<double, double> RegularizedSource::support(int i) const {
  if (mode_ == MollifierMode::Periodic) return {0.0, len_.at(i)};
  auto [a, b] = window(i);
  if (!(b > a)) return {0.0, 0.0};
  return {a - rho_, b + rho_};
}

int RegularizedSource::piece_of(double s) const {
  for (int i = pieces() - 1; i > 0; --i)
    if (s >= off_[i]) return i;
  return 0;
}

double RegularizedSource::sigma_global(int l, double s) const {
  double L = curve_.length();
  if (mode_ == MollifierMode::Periodic) {
    s = std::fmod(s, L);
    if (s < 0) s += L;
  } else if (s < 0.0 || s > L) {
    return 0.0;
  }
  return density_.deriv(l, s);
}

double RegularizedSource::tangential(int i, int k, double s, SigmaPart part) const {
  if (k > density_.smoothness())
    throw SmoothnessError("k_s = " + std::to_string(k) + " exceeds density smoothness m = " +
                          std::to_string(density_.smoothness()));
  double off = off_.at(i);
  auto [a, b] = window(i);
  double reg = 0.0, bs = 0.0, be = 0.0;
  if (part == SigmaPart::Full || part == SigmaPart::Regularized) {
    double lo = std::max(a, s - rho_), hi = std::min(b, s + rho_);
    // split at the kernel peak
    auto f = [&](double t) { return sigma_global(k, off + t) * phi1_deriv(rho_, 0, s - t); };
    double mid = std::clamp(s, lo, hi);
    reg = gl_integrate(lo, mid, kInnerNodes, f) + gl_integrate(mid, hi, kInnerNodes, f);
  }
  if (mode_ != MollifierMode::Periodic && b > a) {
    for (int l = 0; l < k; ++l) {
      if (part == SigmaPart::Full || part == SigmaPart::BoundaryStart)
        bs += density_.deriv(l, off + a) * phi1_deriv(rho_, k - 1 - l, s - a);
      if (part == SigmaPart::Full || part == SigmaPart::BoundaryEnd)
        be += density_.deriv(l, off + b) * phi1_deriv(rho_, k - 1 - l, s - b);
    }
  }
  if (part == SigmaPart::BoundaryEnd) return be;
  return reg + bs - be;
}

double RegularizedSource::tangential_direct(int i, int k, double s) const {
  double off = off_.at(i);
  auto [a, b] = window(i);
  double lo = std::max(a, s - rho_), hi = std::min(b, s + rho_);
  auto f = [&](double t) { return sigma_global(0, off + t) * phi1_deriv(rho_, k, s - t); };
  if (!(hi > lo)) return 0.0;
  // oscillatory kernel, steep near the support edges: composite panels
  std::vector<double> br{lo, hi};
  for (double u : {-0.95, -0.85, -0.7, -0.5, 0.0, 0.5, 0.7, 0.85, 0.95}) br.push_back(std::clamp(s + u * rho_, lo, hi));
  return composite(br, kInnerNodes).integrate(f);
}

namespace {

// Local (piece, r, theta, s) of a global tubular point.
struct LocalCoords {
  int piece;
  double r, theta, s;
};

LocalCoords localize(const RegularizedSource& src, const CylCoords& c) {
  int i = src.pieces() > 1 ? src.piece_of(c.s) : 0;
  return {i, c.r, c.theta, c.s - src.piece_offset(i)};
}

bool in_support(const RegularizedSource& src, int i, double s) {
  auto [lo, hi] = src.support(i);
  if (src.mode() == MollifierMode::Periodic) return true;
  return s > lo && s < hi;
}

double tangential_any(const RegularizedSource& src, int i, int k, double s, SigmaPart part) {
  if (part == SigmaPart::Full && k > src.density().smoothness()) return src.tangential_direct(i, k, s);
  return src.tangential(i, k, s, part);
}

// Local Cartesian gradient/Hessian of phi_2 times S on a straight piece, in (n, b, t).
void straight_jet(const RegularizedSource& src, int i, const Vec3& y, int order, double& val, Vec3& g,
                  Eigen::Matrix3d& H) {
  const auto& P = src.straight_piece(i);
  Vec3 d = y - P.a;
  double x1 = d.dot(P.f.n), x2 = d.dot(P.f.b), s = d.dot(P.f.t);
  double rho = src.rho();
  val = 0.0;
  g.setZero();
  H.setZero();
  if (x1 * x1 + x2 * x2 >= rho * rho || !in_support(src, i, s)) return;
  std::array<double, 2> xx = {x1, x2};
  double S0 = tangential_any(src, i, 0, s, SigmaPart::Full);
  double f0 = scaled_bump_deriv(2, rho, {0, 0}, xx);
  val = f0 * S0;
  if (order < 1) return;
  double S1 = tangential_any(src, i, 1, s, SigmaPart::Full);
  double fx = scaled_bump_deriv(2, rho, {1, 0}, xx), fy = scaled_bump_deriv(2, rho, {0, 1}, xx);
  g = Vec3(fx * S0, fy * S0, f0 * S1);
  if (order < 2) return;
  double S2 = tangential_any(src, i, 2, s, SigmaPart::Full);
  H(0, 0) = scaled_bump_deriv(2, rho, {2, 0}, xx) * S0;
  H(1, 1) = scaled_bump_deriv(2, rho, {0, 2}, xx) * S0;
  H(0, 1) = H(1, 0) = scaled_bump_deriv(2, rho, {1, 1}, xx) * S0;
  H(0, 2) = H(2, 0) = fx * S1;
  H(1, 2) = H(2, 1) = fy * S1;
  H(2, 2) = f0 * S2;
}

// Value and Cartesian gradient on a curved piece.
void curved_jet(const RegularizedSource& src, const Vec3& y, double& val, Vec3& g) {
  const Curve& C = src.curve();
  double rho = src.rho();
  val = 0.0;
  g.setZero();
  Projection p = project_and_distance(C, y, rho);
  if (p.d >= rho || p.axial != 0.0) return;
  if (!in_support(src, 0, p.s)) return;
  double S0 = tangential_any(src, 0, 0, p.s, SigmaPart::Full);
  double S1 = tangential_any(src, 0, 1, p.s, SigmaPart::Full);
  double f0 = phi2_radial(rho, 0, p.d), f1 = phi2_radial(rho, 1, p.d);
  val = f0 * S0;
  Vec3 foot = C.point(p.s);
  Vec3 er = p.d > 0 ? Vec3((y - foot) / p.d) : Vec3::Zero();
  double q = 1.0 - (y - foot).dot(C.curvature(p.s));
  g = f1 * S0 * er + f0 * S1 * C.tangent(p.s) / q;
}

}  // namespace

double sigma_rho_deriv(const RegularizedSource& src, const MultiIndexSplit& beta, const CylCoords& c,
                       SigmaPart part) {
  if (beta.perp_n < 0 || beta.perp_b < 0 || beta.ks < 0) throw DomainError("negative multi-index");
  if (beta.ks > src.density().smoothness())
    throw SmoothnessError("k_s = " + std::to_string(beta.ks) + " exceeds density smoothness m = " +
                          std::to_string(src.density().smoothness()));
  if (c.r >= src.rho()) return 0.0;
  LocalCoords lc = localize(src, c);
  if (!in_support(src, lc.piece, lc.s)) return 0.0;
  double rad = scaled_bump_deriv(2, src.rho(), {beta.perp_n, beta.perp_b},
                                 {lc.r * std::cos(lc.theta), lc.r * std::sin(lc.theta)});
  if (rad == 0.0) return 0.0;
  return rad * src.tangential(lc.piece, beta.ks, lc.s, part);
}

double sigma_rho_eval(const RegularizedSource& src, const CylCoords& c) {
  return sigma_rho_deriv(src, {}, c, SigmaPart::Full);
}

double sigma_rho_at(const RegularizedSource& src, const Vec3& y) {
  return sigma_rho_cartesian_deriv(src, y, {});
}

double sigma_rho_cartesian_deriv(const RegularizedSource& src, const Vec3& y, const std::vector<Vec3>& dirs) {
  if (dirs.size() > 2) throw UnsupportedOrderError("Cartesian derivative of sigma_rho beyond order 2");
  int order = static_cast<int>(dirs.size());
  if (src.straight()) {
    double acc = 0.0;
    for (int i = 0; i < src.pieces(); ++i) {
      double v;
      Vec3 g;
      Eigen::Matrix3d H;
      straight_jet(src, i, y, order, v, g, H);
      const Frame& f = src.straight_piece(i).f;
      auto loc = [&](const Vec3& d) { return Vec3(d.dot(f.n), d.dot(f.b), d.dot(f.t)); };
      if (order == 0) acc += v;
      else if (order == 1) acc += g.dot(loc(dirs[0]));
      else acc += loc(dirs[0]).dot(H * loc(dirs[1]));
    }
    return acc;
  }
  double v;
  Vec3 g;
  if (order == 0) {
    curved_jet(src, y, v, g);
    return v;
  }
  if (order == 1) {
    curved_jet(src, y, v, g);
    return g.dot(dirs[0]);
  }
  // second order: Richardson difference of the analytic gradient
  double h = src.rho() * 1e-3;
  auto cd = [&](double hh) {
    Vec3 gp, gm;
    double vv;
    curved_jet(src, y + hh * dirs[1], vv, gp);
    curved_jet(src, y - hh * dirs[1], vv, gm);
    return (gp - gm).dot(dirs[0]) / (2.0 * hh);
  };
  return (4.0 * cd(0.5 * h) - cd(h)) / 3.0;
}

// ---------------------------------------------------------------- quadrature

namespace {

std::vector<double> s_breaks(const RegularizedSource& src, int i, double target_s, double panel) {
  auto [lo, hi] = src.support(i);
  std::vector<double> br;
  if (!(hi > lo)) return br;
  int np = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel)));
  for (int k = 0; k <= np; ++k) br.push_back(lo + (hi - lo) * k / np);
  if (src.mode() != MollifierMode::Periodic) {
    auto [a, b] = src.window(i);
    for (double e : {a, a + src.rho(), b - src.rho(), b})
      if (e > lo && e < hi) br.push_back(e);
  }
  if (target_s > lo && target_s < hi) br.push_back(target_s);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }),
           br.end());
  return br;
}

}  // namespace

std::vector<SourceNode> source_nodes(const RegularizedSource& src, const SourceQuadSpec& spec,
                                     const std::optional<Vec3>& target) {
  const Curve& C = src.curve();
  double rho = src.rho();
  std::vector<SourceNode> out;
  for (int i = 0; i < src.pieces(); ++i) {
    auto [lo, hi] = src.support(i);
    if (!(hi > lo)) continue;
    // target in local coordinates
    std::optional<CylCoords> tc;
    if (target) {
      if (src.straight()) {
        const auto& P = src.straight_piece(i);
        Vec3 d = *target - P.a;
        double x1 = d.dot(P.f.n), x2 = d.dot(P.f.b);
        double r = std::hypot(x1, x2);
        if (r < rho) tc = CylCoords{r, std::atan2(x2, x1), d.dot(P.f.t)};
      } else {
        Projection p = project_and_distance(C, *target, rho);
        if (p.d < rho && p.axial == 0.0) tc = CylCoords{p.d, p.theta, p.s};
      }
    }
    const int per_panel = 16;
    int n_s = spec.n_s > 0 ? spec.n_s
                           : static_cast<int>(std::min(4096.0, 64.0 * (hi - lo) / rho));
    n_s = std::max(per_panel, static_cast<int>(n_s * spec.refine));
    double panel = (hi - lo) * per_panel / n_s;
    Rule rs = composite(s_breaks(src, i, tc ? tc->s : -1e300, panel), per_panel);
    int nr = std::max(4, static_cast<int>(spec.n_r * spec.refine));
    int nt = std::max(4, static_cast<int>(spec.n_theta * spec.refine));
    Rule rr = tc && tc->r > 0 ? composite({0.0, tc->r, rho}, nr) : gl_interval(0.0, rho, nr);
    Rule rt;
    if (tc) {
      // clusters nodes at the target angle from both sides
      rt = gl_interval(tc->theta, tc->theta + 2.0 * kPi, nt);
    } else {
      for (int k = 0; k < nt; ++k) {
        rt.x.push_back(2.0 * kPi * k / nt);
        rt.w.push_back(2.0 * kPi / nt);
      }
    }
    out.reserve(out.size() + rs.size() * rr.size() * rt.size());
    std::vector<double> f0(rr.size()), f1(rr.size());
    for (std::size_t b = 0; b < rr.size(); ++b) {
      f0[b] = phi2_radial(rho, 0, rr.x[b]);
      f1[b] = phi2_radial(rho, 1, rr.x[b]);
    }
    for (std::size_t a = 0; a < rs.size(); ++a) {
      double s = rs.x[a];
      double S0 = tangential_any(src, i, 0, s, SigmaPart::Full);
      double S1 = spec.with_gradient ? tangential_any(src, i, 1, s, SigmaPart::Full) : 0.0;
      Frame f;
      Vec3 base, kv = Vec3::Zero();
      if (src.straight()) {
        f = src.straight_piece(i).f;
        base = src.straight_piece(i).a + s * f.t;
      } else {
        f = C.frame(s);
        base = C.point(s);
        kv = C.curvature(s);
      }
      double k1 = kv.dot(f.n), k2 = kv.dot(f.b);
      for (std::size_t b = 0; b < rr.size(); ++b) {
        double r = rr.x[b];
        for (std::size_t c = 0; c < rt.size(); ++c) {
          double th = rt.x[c];
          double ct = std::cos(th), st = std::sin(th);
          Vec3 er = ct * f.n + st * f.b;
          double q = 1.0 - r * (k1 * ct + k2 * st);
          SourceNode nd;
          nd.y = base + r * er;
          nd.c = CylCoords{r, std::fmod(th + 4.0 * kPi, 2.0 * kPi), s};
          nd.piece = i;
          nd.w = rs.w[a] * rr.w[b] * rt.w[c] * r * q;
          nd.sigma = f0[b] * S0;
          if (spec.with_gradient) nd.grad = f1[b] * S0 * er + f0[b] * S1 / q * f.t;
          out.push_back(nd);
        }
      }
    }
  }
  return out;
}


double sigma_rho_mass(const RegularizedSource& src, const SourceQuadSpec& spec) {
  double acc = 0.0;
  for (const auto& nd : source_nodes(src, spec)) acc += nd.w * nd.sigma;
  return acc;
}

double sigma_rho_l1_norm(const RegularizedSource& src, const SourceQuadSpec& spec) {
  double acc = 0.0;
  for (const auto& nd : source_nodes(src, spec))
    acc += nd.w * std::abs(nd.sigma);
  return acc;
}

SigmaNormResult sigma_rho_weighted_norm(const RegularizedSource& src, const MultiIndexSplit& beta, double eta,
                                        SigmaNormRegion region, SigmaPart part, int n_r, int n_s_per_rho) {
  const Curve& C = src.curve();
  double rho = src.rho();
  int kp = beta.k_perp(), ks = beta.ks;
  if (ks > src.density().smoothness())
    throw SmoothnessError("k_s = " + std::to_string(ks) + " exceeds density smoothness m = " +
                          std::to_string(src.density().smoothness()));
  SigmaNormResult res;
  const int nt = 16;
  auto rad = [&](double r, double th) {
    return scaled_bump_deriv(2, rho, {beta.perp_n, beta.perp_b}, {r * std::cos(th), r * std::sin(th)});
  };
  auto tang = [&](int i, double s) {
    return in_support(src, i, s) ? src.tangential(i, ks, s, part) : 0.0;
  };
  auto jac = [&](double r, double th, double s) { return tubular_jacobian(C, CylCoords{r, th, s}); };

  if (region == SigmaNormRegion::Cylinder) {
    if (!(eta > -1.0))
      throw IntegrabilityError("weight d^{2 eta} on the cylinder needs eta > -1 (eta = " +
                               std::to_string(eta) + ")");
    res.predicted_exponent = -1.0 - beta.k() + eta;
    res.condition = "eta > -1";
    double g = std::max(1.0, 2.0 / (2.0 * eta + 2.0));
    Rule rr = graded(0.0, rho, n_r, g);
    std::vector<double> radial(rr.size() * nt);
    for (std::size_t b = 0; b < rr.size(); ++b)
      for (int c = 0; c < nt; ++c) radial[b * nt + c] = rad(rr.x[b], 2.0 * kPi * c / nt);
    bool flat = C.kind() == CurveKind::Segment || C.kind() == CurveKind::PolygonalChain;
    double acc = 0.0;
    for (int i = 0; i < src.pieces(); ++i) {
      auto [lo, hi] = src.support(i);
      if (!(hi > lo)) continue;
      // rho-wide panels in the end layers, doubling toward the middle
      std::vector<double> br = {lo, hi};
      for (double h = rho; lo + h < 0.5 * (lo + hi); h = (h < 4.0 * rho ? h + rho : 2.0 * h)) {
        br.push_back(lo + h);
        br.push_back(hi - h);
      }
      if (src.mode() != MollifierMode::Periodic) {
        auto [a, b] = src.window(i);
        br.push_back(a);
        br.push_back(b);
      }
      br.push_back(0.5 * (lo + hi));
      std::sort(br.begin(), br.end());
      std::vector<double> fine = {br.front()};
      double cap = std::max(rho, (hi - lo) / 16.0);
      for (std::size_t k = 1; k < br.size(); ++k) {
        double w = br[k] - fine.back();
        if (w < 1e-14) continue;
        int m = static_cast<int>(std::ceil(w / cap));
        double a0 = fine.back();
        for (int j = 1; j <= m; ++j) fine.push_back(a0 + w * j / m);
      }
      Rule rs = composite(fine, n_s_per_rho);
      double off = src.piece_offset(i);
      for (std::size_t a = 0; a < rs.size(); ++a) {
        double T = tang(i, rs.x[a]);
        if (T == 0.0) continue;
        double s = off + rs.x[a];
        for (std::size_t b = 0; b < rr.size(); ++b) {
          double r = rr.x[b], wr = rs.w[a] * rr.w[b] * (2.0 * kPi / nt) * std::pow(r, 2.0 * eta);
          for (int c = 0; c < nt; ++c) {
            double v = radial[b * nt + c] * T;
            double J = flat ? r : jac(r, 2.0 * kPi * c / nt, s);
            acc += wr * J * v * v;
          }
        }
      }
    }
    res.value = std::sqrt(acc);
    return res;
  }

  if (C.closed()) throw DomainError("end pieces are undefined on closed curves");
  if (!(eta > -1.5))
    throw IntegrabilityError("weight d_e^{2 eta} on the end piece needs eta > -3/2 (eta = " +
                             std::to_string(eta) + ")");
  res.predicted_exponent = eta - 0.5 - kp - (part == SigmaPart::Regularized ? 0 : ks);
  res.condition = "eta > -3/2";
  double smax = region == SigmaNormRegion::EndPiece ? rho : 2.0 * rho;
  // spherical (R, xi) about lambda(0): s = R cos xi, r = R sin xi
  double xis = std::atan2(rho, smax);
  double g = std::max(1.0, 2.0 / (2.0 * eta + 3.0));
  Rule rxi = composite({0.0, xis, 0.5 * kPi}, 16);
  bool segment = C.kind() == CurveKind::Segment;
  double acc = 0.0;
  for (std::size_t a = 0; a < rxi.size(); ++a) {
    double xi = rxi.x[a];
    double Rmax = std::min(smax / std::cos(xi), rho / std::sin(xi));
    Rule rR = graded(0.0, Rmax, n_r, g);
    for (std::size_t b = 0; b < rR.size(); ++b) {
      double R = rR.x[b], r = R * std::sin(xi), s = R * std::cos(xi);
      if (r >= rho) continue;
      int i = src.pieces() > 1 ? src.piece_of(s) : 0;
      double T = tang(i, s - src.piece_offset(i));
      if (T == 0.0) continue;
      for (int c = 0; c < nt; ++c) {
        double th = 2.0 * kPi * c / nt;
        double v = rad(r, th) * T;
        if (v == 0.0) continue;
        double de = R, J = r;
        if (!segment) {
          Vec3 x = to_cartesian(C, CylCoords{r, th, s});
          de = (x - C.point(0.0)).norm();
          if (C.kind() == CurveKind::PolygonalChain)
            for (const auto& vx : C.vertices()) de = std::min(de, (x - vx).norm());
          J = jac(r, th, s);
        }
        acc += rxi.w[a] * rR.w[b] * (2.0 * kPi / nt) * J * R * std::pow(de, 2.0 * eta) * v * v;
      }
    }
  }
  res.value = std::sqrt(acc);
  return res;
}

}  // namespace lsreg
