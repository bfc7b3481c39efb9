#include "lsreg/potential.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double k4pi = 1.0 / (4.0 * kPi);

std::vector<Vec3> axis_dirs(const Multi3& beta) {
  std::vector<Vec3> d;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < beta[i]; ++k) d.push_back(Vec3::Unit(i));
  return d;
}

// Gamma, gradient and Hessian at z = x - y.
void gamma_jet(const Vec3& z, double& v, Vec3& g, Eigen::Matrix3d& H) {
  double r2 = z.squaredNorm(), r = std::sqrt(r2), r3 = r2 * r;
  v = -k4pi / r;
  g = k4pi * z / r3;
  H = k4pi * (Eigen::Matrix3d::Identity() * r2 - 3.0 * z * z.transpose()) / (r3 * r2);
}

}  // namespace

double gamma_eval(const Vec3& x, const Vec3& y) {
  double r = (x - y).norm();
  if (r == 0.0) throw SingularError("Gamma evaluated at x = y");
  return -k4pi / r;
}

double gamma_dir(const std::vector<Vec3>& dirs, const Vec3& z) {
  double r2 = z.squaredNorm();
  if (r2 == 0.0) throw SingularError("Gamma evaluated at x = y");
  double r = std::sqrt(r2);
  switch (dirs.size()) {
    case 0: return -k4pi / r;
    case 1: return k4pi * dirs[0].dot(z) / (r2 * r);
    case 2:
      return k4pi * (dirs[0].dot(dirs[1]) * r2 - 3.0 * dirs[0].dot(z) * dirs[1].dot(z)) / (r2 * r2 * r);
    default: throw UnsupportedOrderError("kernel derivatives beyond order 2");
  }
}

double gamma_deriv(const Multi3& beta, const Vec3& x, const Vec3& y) {
  return gamma_dir(axis_dirs(beta), x - y);
}

double exact_segment_potential(const Vec3& x, double a, double b) {
  double rho = std::hypot(x.x(), x.y()), z = x.z();
  if (rho == 0.0 && z >= a && z <= b) throw SingularError("point on the segment");
  double Ra = std::hypot(rho, a - z), Rb = std::hypot(rho, b - z);
  double v;
  // log form of asinh differences, arranged to avoid cancellation on the axis
  if (z <= 0.5 * (a + b)) v = std::log((b - z + Rb) / (a - z + Ra));
  else v = std::log((z - a + Ra) / (z - b + Rb));
  return -k4pi * v;
}

// ---------------------------------------------------------------- evaluator

PotentialEvaluator::PotentialEvaluator(const RegularizedSource& src, SourceQuadSpec spec, bool use_axisym)
    : src_(src), spec_(spec) {
  spec_.with_gradient = true;
  nodes_ = source_nodes(src_, spec_);
  if (use_axisym && src.curve().kind() == CurveKind::Segment && src.pieces() == 1)
    axisym_ = std::make_unique<AxisymSegmentEvaluator>(src_, spec.refine);
}

namespace {

bool inside_support(const RegularizedSource& src, const Vec3& x) {
  double rho = src.rho();
  for (int i = 0; i < src.pieces(); ++i) {
    auto [lo, hi] = src.support(i);
    if (!(hi > lo)) continue;
    if (src.straight()) {
      const auto& P = src.straight_piece(i);
      Vec3 d = x - P.a;
      double s = d.dot(P.f.t);
      if (std::hypot(d.dot(P.f.n), d.dot(P.f.b)) < rho && s > lo - 1e-12 && s < hi + 1e-12) return true;
    } else {
      Projection p = project_and_distance(src.curve(), x, rho);
      if (p.d < rho) return true;
    }
  }
  return false;
}

double distance_to_curve(const RegularizedSource& src, const Vec3& x) {
  return project_and_distance(src.curve(), x, src.rho()).d;
}

void tensor_jet(const std::vector<SourceNode>& nodes, const Vec3& x, bool source_side, int order, double& u,
                Vec3& g, Eigen::Matrix3d& H) {
  u = 0.0;
  g.setZero();
  H.setZero();
  for (const auto& nd : nodes) {
    if (nd.sigma == 0.0 && nd.grad.isZero()) continue;
    Vec3 z = x - nd.y;
    double r2 = z.squaredNorm();
    if (r2 < 1e-300) continue;
    double r = std::sqrt(r2), gv = -k4pi / r;
    u += nd.w * gv * nd.sigma;
    if (order < 1) continue;
    Vec3 gg = (k4pi / (r2 * r)) * z;
    if (source_side) {
      g += nd.w * gv * nd.grad;
      if (order >= 2) H += nd.w * gg * nd.grad.transpose();
    } else {
      g += nd.w * nd.sigma * gg;
      if (order >= 2) {
        double v;
        Vec3 g2;
        Eigen::Matrix3d h2;
        gamma_jet(z, v, g2, h2);
        H += nd.w * nd.sigma * h2;
      }
    }
  }
  if (source_side && order >= 2) H = 0.5 * (H + H.transpose()).eval();
}

}  // namespace

double PotentialEvaluator::eval_tensor(const Vec3& x, const std::vector<Vec3>& dirs, Placement p) const {
  int order = static_cast<int>(dirs.size());
  if (order > 2) throw UnsupportedOrderError("potential derivatives beyond order 2");
  bool src_side = p == Placement::Source ||
                  (p == Placement::Auto && distance_to_curve(src_, x) < 2.0 * src_.rho());
  double u;
  Vec3 g;
  Eigen::Matrix3d H;
  if (inside_support(src_, x)) tensor_jet(source_nodes(src_, spec_, x), x, src_side, order, u, g, H);
  else tensor_jet(nodes_, x, src_side, order, u, g, H);
  if (order == 0) return u;
  if (order == 1) return g.dot(dirs[0]);
  return dirs[0].dot(H * dirs[1]);
}

void PotentialEvaluator::eval_jet(const Vec3& x, double& u, Vec3& g, Eigen::Matrix3d& H) const {
  if (!axisym_) {
    bool src_side = distance_to_curve(src_, x) < 2.0 * src_.rho();
    if (inside_support(src_, x)) tensor_jet(source_nodes(src_, spec_, x), x, src_side, 2, u, g, H);
    else tensor_jet(nodes_, x, src_side, 2, u, g, H);
    return;
  }
  double r, th, s;
  axisym_->local(x, r, th, s);
  AxisymJet J = axisym_->jet(r, s, 2);
  const Frame& f = src_.straight_piece(0).f;
  Vec3 e = std::cos(th) * f.n + std::sin(th) * f.b;
  u = J.u;
  g = J.ur * e + J.us * f.t;
  // u_r / r -> u_rr on the axis
  double urr_over = r > 1e-9 * src_.rho() ? J.ur / r : J.urr;
  Eigen::Matrix3d P = f.n * f.n.transpose() + f.b * f.b.transpose();
  H = J.urr * e * e.transpose() + urr_over * (P - e * e.transpose()) +
      J.urs * (e * f.t.transpose() + f.t * e.transpose()) + J.uss * f.t * f.t.transpose();
}

double PotentialEvaluator::eval(const Vec3& x, const std::vector<Vec3>& dirs, Placement p) const {
  if (dirs.size() > 2) throw UnsupportedOrderError("potential derivatives beyond order 2");
  if (!axisym_ || p != Placement::Auto) return eval_tensor(x, dirs, p);
  double r, th, s;
  axisym_->local(x, r, th, s);
  AxisymJet J = axisym_->jet(r, s, static_cast<int>(dirs.size()));
  const Frame& f = src_.straight_piece(0).f;
  Vec3 e = std::cos(th) * f.n + std::sin(th) * f.b;
  if (dirs.empty()) return J.u;
  if (dirs.size() == 1) return J.ur * e.dot(dirs[0]) + J.us * f.t.dot(dirs[0]);
  double urr_over = r > 1e-9 * src_.rho() ? J.ur / r : J.urr;
  auto comp = [&](const Vec3& v) { return std::array<double, 3>{v.dot(e), v.dot(f.t), 0.0}; };
  auto a = comp(dirs[0]), b = comp(dirs[1]);
  double perp = dirs[0].dot(dirs[1]) - a[0] * b[0] - a[1] * b[1];
  return J.urr * a[0] * b[0] + urr_over * perp + J.urs * (a[0] * b[1] + a[1] * b[0]) + J.uss * a[1] * b[1];
}

double u_circ_eval(const PotentialEvaluator& ev, const Vec3& x, const MultiIndexSplit& beta, Placement p) {
  if (beta.k() > 2) throw UnsupportedOrderError("potential derivatives beyond order 2");
  const RegularizedSource& src = ev.source();
  Projection pr = project_and_distance(src.curve(), x, src.rho());
  Frame f = src.curve().frame(std::clamp(pr.s, 0.0, src.curve().length()));
  std::vector<Vec3> dirs;
  for (int k = 0; k < beta.perp_n; ++k) dirs.push_back(f.n);
  for (int k = 0; k < beta.perp_b; ++k) dirs.push_back(f.b);
  for (int k = 0; k < beta.ks; ++k) dirs.push_back(f.t);
  return ev.eval(x, dirs, p);
}

CheckedValue u_circ_eval_checked(const RegularizedSource& src, const Vec3& x, const MultiIndexSplit& beta,
                                 double rel_tol, SourceQuadSpec spec) {
  CheckedValue out;
  PotentialEvaluator a(src, spec);
  out.value = u_circ_eval(a, x, beta);
  spec.refine *= 2.0;
  PotentialEvaluator b(src, spec);
  out.refined = u_circ_eval(b, x, beta);
  out.converged = std::abs(out.value - out.refined) <= rel_tol * std::max(std::abs(out.refined), 1e-300);
  return out;
}

std::vector<double> u_circ_batch(const PotentialEvaluator& ev, const std::vector<Vec3>& xs,
                                 const MultiIndexSplit& beta, unsigned workers) {
  return parallel_map<double>(xs.size(), [&](std::size_t i) { return u_circ_eval(ev, xs[i], beta); }, workers);
}

// ---------------------------------------------------------------- ball

void BallDomain::validate(const Curve& curve) const {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  const int n = 512;
  double worst = 0.0;
  for (int i = 0; i <= n; ++i) {
    double s = curve.length() * i / n;
    worst = std::max(worst, (curve.point(s) - center).norm());
  }
  if (worst + curve.R0() >= radius)
    throw DomainError("B(curve, R0) is not inside the ball: max |lambda - c| + R0 = " +
                      std::to_string(worst + curve.R0()) + " >= " + std::to_string(radius));
}

double ball_h_dir(const BallDomain& dom, const std::vector<Vec3>& dirs, const Vec3& x, const Vec3& y) {
  Vec3 yc = y - dom.center;
  double ry = yc.norm(), a = dom.radius;
  if (ry < 1e-12 * a) return dirs.empty() ? k4pi / a : 0.0;
  Vec3 ystar = dom.center + (a * a / (ry * ry)) * yc;
  // h = -(a / |y - c|) Gamma(x - y*)
  return -(a / ry) * gamma_dir(dirs, x - ystar);
}

double ball_h(const BallDomain& dom, const Vec3& x, const Vec3& y) { return ball_h_dir(dom, {}, x, y); }

double ball_green_corrector(const BallDomain& dom, const PotentialEvaluator& ev, const Vec3& x,
                            const std::vector<Vec3>& dirs) {
  if (dirs.size() > 2) throw UnsupportedOrderError("corrector derivatives beyond order 2");
  if (ev.axisymmetric() && AxisymBallCorrector::applicable(ev.source(), dom)) {
    AxisymBallCorrector c(ev.source(), dom, ev.spec().refine);
    double u;
    Vec3 g;
    Eigen::Matrix3d H;
    c.eval_jet(x, u, g, H);
    if (dirs.empty()) return u;
    if (dirs.size() == 1) return g.dot(dirs[0]);
    return dirs[0].dot(H * dirs[1]);
  }
  double acc = 0.0;
  for (const auto& nd : ev.nodes()) {
    if (nd.sigma == 0.0) continue;
    acc += nd.w * nd.sigma * ball_h_dir(dom, dirs, x, nd.y);
  }
  return acc;
}

std::vector<Vec3> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open points file: " + path);
  std::vector<Vec3> out;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    double a, b, c;
    if (ls >> a >> b >> c) out.emplace_back(a, b, c);
  }
  return out;
}

}  // namespace lsreg
