#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "lsreg/potential.hpp"
#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Periodic trapezoid nodes for the well-separated ring integrals.
template <int N = 32>
struct CosTable {
  static constexpr int n = N;
  double c[n], c2[n];
  CosTable() {
    for (int j = 0; j < n; ++j) {
      double t = 2.0 * kPi * (j + 0.5) / n;
      c[j] = std::cos(t);
      c2[j] = std::cos(2.0 * t);
    }
  }
};

}  // namespace

namespace detail {

// Chebyshev-Lobatto interpolant of S, S', S'' on panels of the support.
class TangentialTable {
 public:
  static constexpr int deg = 16;

  TangentialTable(const RegularizedSource& src, int order, double refine) {
    auto [lo, hi] = src.support(0);
    lo_ = lo;
    hi_ = hi;
    if (!(hi > lo)) return;
    double rho = src.rho();
    std::vector<double> br = {lo, hi};
    if (src.mode() != MollifierMode::Periodic) {
      auto [a, b] = src.window(0);
      for (double e : {a, a + rho, b - rho, b})
        if (e > lo && e < hi) br.push_back(e);
    }
    std::sort(br.begin(), br.end());
    double wmax = rho / (8.0 * refine);
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      double w = br[k + 1] - br[k];
      if (w < 1e-14) continue;
      int m = static_cast<int>(std::ceil(w / wmax));
      for (int j = 0; j < m; ++j) edges_.push_back(br[k] + w * j / m);
    }
    edges_.push_back(hi);
    int np = static_cast<int>(edges_.size()) - 1;
    vals_.assign(static_cast<std::size_t>(np) * (deg + 1) * 3, 0.0);
    for (int p = 0; p < np; ++p) {
      double a = edges_[p], b = edges_[p + 1];
      for (int j = 0; j <= deg; ++j) {
        double x = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(kPi * j / deg);
        for (int k = 0; k <= order; ++k) {
          double v = k > src.density().smoothness() ? src.tangential_direct(0, k, x)
                                                     : src.tangential(0, k, x);
          vals_[(static_cast<std::size_t>(p) * 3 + k) * (deg + 1) + j] = v;
        }
      }
    }
  }

  // S^{(k)}(s) for k = 0..2 into out.
  void eval(double s, double out[3]) const {
    out[0] = out[1] = out[2] = 0.0;
    if (!(s > lo_ && s < hi_)) return;
    auto it = std::upper_bound(edges_.begin(), edges_.end(), s);
    int p = static_cast<int>(it - edges_.begin()) - 1;
    p = std::clamp(p, 0, static_cast<int>(edges_.size()) - 2);
    double a = edges_[p], b = edges_[p + 1];
    double x = (2.0 * s - a - b) / (b - a);
    double num[3] = {0, 0, 0}, den = 0.0;
    for (int j = 0; j <= deg; ++j) {
      double xj = std::cos(kPi * j / deg);
      double dx = x - xj;
      if (dx == 0.0) {
        for (int k = 0; k < 3; ++k) out[k] = vals_[(static_cast<std::size_t>(p) * 3 + k) * (deg + 1) + j];
        return;
      }
      double w = ((j % 2) ? -1.0 : 1.0) * ((j == 0 || j == deg) ? 0.5 : 1.0) / dx;
      den += w;
      for (int k = 0; k < 3; ++k) num[k] += w * vals_[(static_cast<std::size_t>(p) * 3 + k) * (deg + 1) + j];
    }
    for (int k = 0; k < 3; ++k) out[k] = num[k] / den;
  }

 private:
  double lo_ = 0, hi_ = 0;
  std::vector<double> edges_;
  std::vector<double> vals_;
};

}  // namespace detail

namespace {

using detail::TangentialTable;

// Gauss rule in u = r^2 for the measure W(r) dr on [0, rho]: sum_j w_j g(r_j)
// approximates int g W dr for g smooth in r^2. Discretized Stieltjes on a
// fine composite rule; W must not change sign.
void radial_gauss(double rho, const std::function<double(double)>& W, int n, std::vector<double>& xr,
                  std::vector<double>& wr) {
  Rule fine = composite({0.0, 0.4 * rho, 0.7 * rho, 0.85 * rho, rho}, 24);
  const std::size_t m = fine.size();
  std::vector<double> u(m), mu(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double t = fine.x[i] / rho;
    u[i] = t * t;
    mu[i] = fine.w[i] * W(fine.x[i]);
    total += mu[i];
  }
  double sign = total < 0 ? -1.0 : 1.0;
  for (double& v : mu) v *= sign;
  std::vector<double> p0(m, 0.0), p1(m, 1.0), a(n), b(n);
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    double nrm = 0.0, un = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      nrm += mu[i] * p1[i] * p1[i];
      un += mu[i] * u[i] * p1[i] * p1[i];
    }
    a[k] = un / nrm;
    b[k] = k ? nrm / prev : nrm;
    for (std::size_t i = 0; i < m; ++i) {
      double p2 = (u[i] - a[k]) * p1[i] - (k ? b[k] * p0[i] : 0.0);
      p0[i] = p1[i];
      p1[i] = p2;
    }
    prev = nrm;
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    J(k, k) = a[k];
    if (k) J(k, k - 1) = J(k - 1, k) = std::sqrt(b[k]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  xr.resize(n);
  wr.resize(n);
  for (int j = 0; j < n; ++j) {
    xr[j] = rho * std::sqrt(std::max(0.0, es.eigenvalues()[j]));
    wr[j] = sign * b[0] * es.eigenvectors()(0, j) * es.eigenvectors()(0, j);
  }
}

// Sorted s breakpoints with panels of width <= h inside the layers
// (e - rho, e + rho) around the window features.
std::vector<double> layered_breaks(std::vector<double> sb, const std::vector<double>& feats, double lo, double hi,
                                   double rho, double h) {
  for (double e : feats)
    for (double x : {e - rho, e + rho})
      if (x > lo && x < hi) sb.push_back(x);
  std::sort(sb.begin(), sb.end());
  std::vector<double> out = {sb.front()};
  for (std::size_t k = 1; k < sb.size(); ++k) {
    double a0 = out.back(), wd = sb[k] - a0;
    if (wd < 1e-14) continue;
    double mid = 0.5 * (a0 + sb[k]);
    bool layer = false;
    for (double e : feats)
      if (std::abs(mid - e) < rho + 0.5 * wd) layer = true;
    int m = layer ? static_cast<int>(std::ceil(wd / h - 1e-9)) : 1;
    for (int j = 1; j <= m; ++j) out.push_back(a0 + wd * j / m);
  }
  return out;
}

struct Accum {
  double u = 0, ur = 0, us = 0, urr = 0, urs = 0, uss = 0;
};

// K(k), E(k) by AGM seeded with the complementary modulus.
void ellipke_kc(double k, double kc, double& K, double& E) {
  double a = 1.0, b = kc, c = k, sum = 0.5 * c * c, pw = 0.5;
  for (int it = 0; it < 40 && std::abs(c) > 1e-17 * a; ++it) {
    c = 0.5 * (a - b);
    double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
    pw *= 2.0;
    sum += pw * c * c;
  }
  K = kPi / (2.0 * a);
  E = K * (1.0 - sum);
}

template <int N>
RingIntegrals ring_trapezoid(double A, double B) {
  static const CosTable<N> tab;
  double i0 = 0, i1 = 0, j0 = 0, j1 = 0, j2 = 0;
  for (int j = 0; j < N; ++j) {
    double v = 1.0 / std::sqrt(A - B * tab.c[j]), v3 = v * v * v;
    i0 += v;
    i1 += v * tab.c[j];
    j0 += v3;
    j1 += v3 * tab.c[j];
    j2 += v3 * tab.c2[j];
  }
  double h = 2.0 * kPi / N;
  return {h * i0, h * i1, h * j0, h * j1, h * j2};
}

}  // namespace

std::array<double, 3> ring_kernels(double A, double B) {
  static const CosTable<> tab;
  constexpr double c4 = -1.0 / (4.0 * kPi);
  if (B <= 1e-300 || B < 1e-14 * A) return {c4 * 2.0 * kPi / std::sqrt(A), 0.0, 0.0};
  double chi = A / B;
  if (chi >= 1.5) {
    double i0 = 0, i1 = 0, i2 = 0;
    for (int j = 0; j < tab.n; ++j) {
      double v = 1.0 / std::sqrt(A - B * tab.c[j]);
      i0 += v;
      i1 += v * tab.c[j];
      i2 += v * tab.c2[j];
    }
    double h = 2.0 * kPi / tab.n;
    return {c4 * h * i0, c4 * h * i1, c4 * h * i2};
  }
  // Legendre functions of half-integer degree via complete elliptic integrals
  double k = std::sqrt(2.0 / (chi + 1.0));
  double K = std::comp_ellint_1(k), E = std::comp_ellint_2(k);
  double qm = k * K;
  double qp = chi * k * K - std::sqrt(2.0 * (chi + 1.0)) * E;
  double q3 = (2.0 * chi * qp - 0.5 * qm) / 1.5;
  double f = 2.0 * std::sqrt(2.0) / std::sqrt(B);
  return {c4 * f * qm, c4 * f * qp, c4 * f * q3};
}

RingIntegrals ring_integrals(double r, double rp, double z) {
  double A = r * r + rp * rp + z * z, B = 2.0 * r * rp;
  double D = (r - rp) * (r - rp) + z * z;  // A - B without cancellation
  if (B <= 1.0 / 3.0 * A) {
    if (B < 1e-14 * A) {
      double v = 1.0 / std::sqrt(A);
      return {2.0 * kPi * v, 0.0, 2.0 * kPi * v * v * v, 0.0, 0.0};
    }
    // trapezoid error ~ exp(-n acosh(A/B)); pick n for ~1e-10
    double eps = B / A;
    if (eps < 0.02) return ring_trapezoid<6>(A, B);
    if (eps < 0.1) return ring_trapezoid<8>(A, B);
    return ring_trapezoid<12>(A, B);
  }
  double sp = std::sqrt(A + B);
  // complementary modulus from D keeps K, E accurate as k -> 1
  double kc = std::sqrt(D / (A + B));
  double K, E;
  ellipke_kc(std::sqrt(2.0 * B / (A + B)), kc, K, E);
  double I0 = 4.0 * K / sp;
  // I1 from Q_{1/2}: (4 / sqrt(A+B)) (A K - (A+B) E) / B
  double I1 = 4.0 * (A * K - (A + B) * E) / (B * sp);
  double J0 = 4.0 * E / (D * sp);
  double J1 = (A * J0 - I0) / B;
  double J2 = 2.0 * (A * J1 - I1) / B - J0;
  return {I0, I1, J0, J1, J2};
}

AxisymSegmentEvaluator::AxisymSegmentEvaluator(const RegularizedSource& src, double refine)
    : src_(src), refine_(refine) {
  if (src.curve().kind() != CurveKind::Segment || src.pieces() != 1)
    throw DomainError("axisymmetric evaluator needs a single straight segment");
  a_ = src.straight_piece(0).a;
  f_ = src.straight_piece(0).f;
  table_ = std::make_shared<const TangentialTable>(src_, 1, refine_);
  double rho = src.rho();
  int nf = std::max(4, static_cast<int>(std::lround(4 * refine)));
  radial_gauss(rho, [rho](double r) { return r * phi2_radial(rho, 0, r); }, nf, fa_r_, fa_w_);
  radial_gauss(rho, [rho](double r) { return r * r * phi2_radial(rho, 1, r); }, nf, fb_r_, fb_w_);
}

void AxisymSegmentEvaluator::local(const Vec3& x, double& r, double& theta, double& s) const {
  Vec3 d = x - a_;
  double x1 = d.dot(f_.n), x2 = d.dot(f_.b);
  r = std::hypot(x1, x2);
  theta = std::atan2(x2, x1);
  s = d.dot(f_.t);
}

AxisymJet AxisymSegmentEvaluator::jet(double r, double s, int order) const {
  const TangentialTable& T = *table_;

  constexpr double c4 = -1.0 / (4.0 * kPi);
  double rho = src_.rho();
  auto [lo, hi] = src_.support(0);
  Accum acc;
  if (!(hi > lo)) return {};

  // one derivative on the source, one on the kernel
  auto add_pre = [&](double rp, double f0, double f1, double sp, const double* S, double w) {
    double z = s - sp;
    RingIntegrals R = ring_integrals(r, rp, z);
    w *= rp * c4;
    acc.u += w * f0 * S[0] * R.I0;
    if (order < 1) return;
    acc.ur += w * f1 * S[0] * R.I1;
    acc.us += w * f0 * S[1] * R.I0;
    if (order < 2) return;
    acc.urr += w * f1 * S[0] * (-r * R.J1 + 0.5 * rp * (R.J0 + R.J2));
    acc.urs += w * f0 * S[1] * (-r * R.J0 + rp * R.J1);
    acc.uss += w * f0 * S[1] * (-z * R.J0);
  };
  auto add = [&](double rp, double sp, double w) {
    double S[3];
    T.eval(sp, S);
    if (S[0] == 0.0 && S[1] == 0.0) return;
    double f0 = phi2_radial(rho, 0, rp);
    if (f0 == 0.0) return;
    add_pre(rp, f0, order >= 1 ? phi2_radial(rho, 1, rp) : 0.0, sp, S, w);
  };

  const int nq = std::max(4, static_cast<int>(std::lround(6 * refine_)));
  const int npsi = std::max(8, static_cast<int>(std::lround(16 * refine_)));
  const int nt = std::max(6, static_cast<int>(std::lround(10 * refine_)));
  const double h = 0.25 * rho;

  std::vector<double> feats = {lo, hi};
  if (src_.mode() != MollifierMode::Periodic) {
    auto [a, b] = src_.window(0);
    for (double e : {a, a + rho, b - rho, b})
      if (e > lo && e < hi) feats.push_back(e);
  }

  bool near = r < rho + h && s > lo - h && s < hi + h;
  double n_s0 = std::max(lo, s - h), n_s1 = std::min(hi, s + h);
  double n_r0 = std::max(0.0, r - h), n_r1 = std::min(rho, r + h);
  if (near && !(n_s1 > n_s0 && n_r1 > n_r0)) near = false;

  // s breakpoints: geometric away from the target, rho/4 panels in the window layers
  std::vector<double> sb = feats;
  double sc = std::clamp(s, lo, hi);
  double dist = std::hypot(std::max(0.0, r - rho), s - sc);
  double w0 = near ? h : std::max(h, 0.5 * dist);
  double cap = std::max(rho, (hi - lo) / 8.0);
  // kernel smooth in r'^2 across the source disc: transverse Gauss rules
  const bool far = !near && dist >= 8.0 * rho;
  if (near) {
    sb.push_back(n_s0);
    sb.push_back(n_s1);
  } else {
    sb.push_back(sc);
  }
  for (double dir : {-1.0, 1.0}) {
    double x = dir < 0 ? (near ? n_s0 : sc) : (near ? n_s1 : sc), w = w0;
    while ((dir < 0 && x > lo) || (dir > 0 && x < hi)) {
      x += dir * w;
      if (x > lo && x < hi) sb.push_back(x);
      w = std::min(2.0 * w, cap);
    }
  }
  std::vector<double> sfine = layered_breaks(std::move(sb), feats, lo, hi, rho, h);
  std::vector<double> rb = {0.0, 0.4 * rho, 0.7 * rho, 0.85 * rho, rho};
  if (near) {
    rb.push_back(n_r0);
    rb.push_back(n_r1);
  }
  std::sort(rb.begin(), rb.end());
  rb.erase(std::unique(rb.begin(), rb.end(), [](double x, double y) { return std::abs(x - y) < 1e-15; }),
           rb.end());

  const Rule& g = gauss_legendre(nt);
  const std::size_t ng = g.size();
  std::vector<double> rn, rw, f0n, f1n;
  for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
    double rm = 0.5 * (rb[j] + rb[j + 1]), rh = 0.5 * (rb[j + 1] - rb[j]);
    for (std::size_t q = 0; q < ng; ++q) {
      double rp = rm + rh * g.x[q];
      rn.push_back(rp);
      rw.push_back(rh * g.w[q]);
      f0n.push_back(phi2_radial(rho, 0, rp));
      f1n.push_back(order >= 1 ? phi2_radial(rho, 1, rp) : 0.0);
    }
  }
  std::vector<double> Sn(3 * ng);
  for (std::size_t i = 0; i + 1 < sfine.size(); ++i) {
    double sa = sfine[i], sbb = sfine[i + 1];
    bool s_in = near && sa >= n_s0 - 1e-14 && sbb <= n_s1 + 1e-14;
    double sm = 0.5 * (sa + sbb), sh = 0.5 * (sbb - sa);
    bool any = false;
    for (std::size_t p = 0; p < ng; ++p) {
      T.eval(sm + sh * g.x[p], &Sn[3 * p]);
      any = any || Sn[3 * p] != 0.0 || Sn[3 * p + 1] != 0.0;
    }
    if (!any) continue;
    if (far || std::hypot(std::max(0.0, r - rho), std::max({0.0, sa - s, s - sbb})) >= 8.0 * rho) {
      for (std::size_t p = 0; p < ng; ++p) {
        const double* S = &Sn[3 * p];
        if (S[0] == 0.0 && S[1] == 0.0) continue;
        double z = s - (sm + sh * g.x[p]), ws = sh * g.w[p] * c4;
        for (std::size_t q = 0; q < fa_r_.size(); ++q) {
          double rp = fa_r_[q], w = ws * fa_w_[q];
          RingIntegrals R = ring_integrals(r, rp, z);
          acc.u += w * S[0] * R.I0;
          if (order < 1) continue;
          acc.us += w * S[1] * R.I0;
          if (order < 2) continue;
          acc.urs += w * S[1] * (-r * R.J0 + rp * R.J1);
          acc.uss += w * S[1] * (-z * R.J0);
        }
        if (order < 1) continue;
        // I_1 and its r-derivative are odd in r'
        for (std::size_t q = 0; q < fb_r_.size(); ++q) {
          double rp = fb_r_[q], w = ws * fb_w_[q] / rp;
          RingIntegrals R = ring_integrals(r, rp, z);
          acc.ur += w * S[0] * R.I1;
          if (order >= 2) acc.urr += w * S[0] * (-r * R.J1 + 0.5 * rp * (R.J0 + R.J2));
        }
      }
      continue;
    }
    for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
      if (s_in && rb[j] >= n_r0 - 1e-14 && rb[j + 1] <= n_r1 + 1e-14) continue;  // polar part
      for (std::size_t q = j * ng; q < (j + 1) * ng; ++q) {
        if (f0n[q] == 0.0) continue;
        for (std::size_t p = 0; p < ng; ++p) {
          const double* S = &Sn[3 * p];
          if (S[0] == 0.0 && S[1] == 0.0) continue;
          add_pre(rn[q], f0n[q], f1n[q], sm + sh * g.x[p], S, sh * g.w[p] * rw[q]);
        }
      }
    }
  }

  if (near) {
    // polar fan around the clamped target over the near box
    double pr = std::clamp(r, n_r0, n_r1), ps = std::clamp(s, n_s0, n_s1);
    double eps = std::hypot(r - pr, s - ps);
    std::array<std::array<double, 2>, 4> V = {{{n_r0, n_s0}, {n_r1, n_s0}, {n_r1, n_s1}, {n_r0, n_s1}}};
    for (int e = 0; e < 4; ++e) {
      auto E1 = V[e], E2 = V[(e + 1) % 4];
      double ax = E1[0] - pr, ay = E1[1] - ps, bx = E2[0] - pr, by = E2[1] - ps;
      double area2 = ax * by - ay * bx;
      if (std::abs(area2) < 1e-14 * rho * rho) continue;
      double psi1 = std::atan2(ay, ax), psi2 = std::atan2(by, bx);
      double dpsi = psi2 - psi1;
      while (dpsi <= -kPi) dpsi += 2.0 * kPi;
      while (dpsi > kPi) dpsi -= 2.0 * kPi;
      double ex = bx - ax, ey = by - ay, el = std::hypot(ex, ey);
      double hperp = std::abs(area2) / el;
      double nx = ey / el, ny = -ex / el;
      if (nx * ax + ny * ay < 0) {
        nx = -nx;
        ny = -ny;
      }
      Rule rp = gl_interval(psi1, psi1 + dpsi, npsi);
      for (std::size_t i = 0; i < rp.size(); ++i) {
        double psi = rp.x[i], c = std::cos(psi), sn = std::sin(psi);
        double qmax = hperp / (c * nx + sn * ny);
        // the integrand is bounded in q; grade toward a displaced singularity only
        int K = eps > 0 ? std::clamp(static_cast<int>(std::ceil(std::log2(qmax / eps))) + 2, 3, 14) : 6;
        Rule rq = geometric_from(0.0, qmax, qmax * std::ldexp(1.0, -K), nq);
        double wpsi = std::abs(rp.w[i]);
        for (std::size_t j = 0; j < rq.size(); ++j) {
          double q = rq.x[j];
          add(pr + q * c, ps + q * sn, wpsi * rq.w[j] * q);
        }
      }
    }
  }
  return {acc.u, acc.ur, acc.us, acc.urr, acc.urs, acc.uss};
}

}  // namespace lsreg

namespace lsreg {

bool AxisymBallCorrector::applicable(const RegularizedSource& src, const BallDomain& dom) {
  if (src.curve().kind() != CurveKind::Segment || src.pieces() != 1) return false;
  const auto& sp = src.straight_piece(0);
  Vec3 d = dom.center - sp.a;
  return (d - d.dot(sp.f.t) * sp.f.t).norm() < 1e-12 * std::max(1.0, src.curve().length());
}

AxisymBallCorrector::AxisymBallCorrector(const RegularizedSource& src, const BallDomain& dom, double refine)
    : src_(src), dom_(dom) {
  if (!applicable(src, dom)) throw DomainError("axisymmetric corrector needs a segment and a center on its axis");
  dom.validate(src.curve());
  const auto& sp = src.straight_piece(0);
  sc_ = (dom.center - sp.a).dot(sp.f.t);
  auto [lo, hi] = src.support(0);
  if (!(hi > lo)) return;
  detail::TangentialTable T(src, 0, refine);
  double rho = src.rho(), h = 0.25 * rho;
  const int nt = std::max(6, static_cast<int>(std::lround(10 * refine)));
  std::vector<double> feats = {lo, hi};
  if (src.mode() != MollifierMode::Periodic) {
    auto [a, b] = src.window(0);
    for (double e : {a, a + rho, b - rho, b})
      if (e > lo && e < hi) feats.push_back(e);
  }
  // the image kernel is smooth on the scale of the ball radius
  double wc = std::min(0.05 * dom.radius, hi - lo);
  std::vector<double> sb = feats;
  for (double x = lo + wc; x < hi; x += wc) sb.push_back(x);
  std::vector<double> sfine = layered_breaks(std::move(sb), feats, lo, hi, rho, h);
  Rule rs = composite(sfine, nt);
  // images lie outside the ball, far from the source disc
  std::vector<double> xr, wr;
  radial_gauss(rho, [rho](double r) { return r * phi2_radial(rho, 0, r); },
               std::max(4, static_cast<int>(std::lround(4 * refine))), xr, wr);
  for (std::size_t j = 0; j < xr.size(); ++j) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      double S[3];
      T.eval(rs.x[i], S);
      if (S[0] == 0.0) continue;
      nodes_.push_back({xr[j], rs.x[i], wr[j] * rs.w[i] * S[0]});
    }
  }
}

AxisymJet AxisymBallCorrector::jet(double r, double s, int order) const {
  constexpr double c4 = 1.0 / (4.0 * kPi);
  const double a = dom_.radius;
  AxisymJet J;
  for (const auto& nd : nodes_) {
    double dz = nd.sp - sc_;
    double ry2 = nd.rp * nd.rp + dz * dz, ry = std::sqrt(ry2);
    if (ry < 1e-12 * a) {
      J.u += nd.w * 2.0 * kPi * c4 / a;
      continue;
    }
    double f = a * a / ry2;
    double rstar = f * nd.rp, zstar = s - (sc_ + f * dz);
    RingIntegrals R = ring_integrals(r, rstar, zstar);
    double w = nd.w * c4 * a / ry;
    J.u += w * R.I0;
    if (order < 1) continue;
    J.ur += -w * (r * R.J0 - rstar * R.J1);
    J.us += -w * zstar * R.J0;
  }
  return J;
}

void AxisymBallCorrector::eval_jet(const Vec3& x, double& u, Vec3& g, Eigen::Matrix3d& H) const {
  const auto& sp = src_.straight_piece(0);
  auto grad = [&](const Vec3& y, double* val) {
    Vec3 d = y - sp.a;
    double x1 = d.dot(sp.f.n), x2 = d.dot(sp.f.b), r = std::hypot(x1, x2), s = d.dot(sp.f.t);
    AxisymJet J = jet(r, s, 1);
    if (val) *val = J.u;
    Vec3 e = r > 0 ? Vec3((x1 * sp.f.n + x2 * sp.f.b) / r) : Vec3(sp.f.n);
    return Vec3(J.ur * e + J.us * sp.f.t);
  };
  g = grad(x, &u);
  double hd = 1e-4 * dom_.radius;
  for (int k = 0; k < 3; ++k) {
    Vec3 dk = Vec3::Unit(k) * hd;
    H.col(k) = (grad(x + dk, nullptr) - grad(x - dk, nullptr)) / (2.0 * hd);
  }
  H = 0.5 * (H + H.transpose()).eval();
}

}  // namespace lsreg
