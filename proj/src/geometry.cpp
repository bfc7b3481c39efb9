#include "lsreg/geometry.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lsreg/config.hpp"

namespace lsreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a;
}

Vec3 any_perpendicular(const Vec3& t) {
  Vec3 e = Vec3::UnitX();
  if (std::abs(t.x()) > std::abs(t.y()) && std::abs(t.x()) > std::abs(t.z())) e = Vec3::UnitY();
  if (std::abs(t.x()) <= std::abs(t.z()) && std::abs(t.y()) > std::abs(t.z()) &&
      std::abs(t.x()) > std::abs(t.y()))
    e = Vec3::UnitZ();
  Vec3 n = e - e.dot(t) * t;
  return n.normalized();
}

// One double-reflection step of the rotation-minimizing frame.
Vec3 transport_normal(const Vec3& x0, const Vec3& t0, const Vec3& r0, const Vec3& x1,
                      const Vec3& t1) {
  Vec3 v1 = x1 - x0;
  double c1 = v1.squaredNorm();
  Vec3 rL = r0, tL = t0;
  if (c1 > 1e-300) {
    rL = r0 - (2.0 / c1) * v1.dot(r0) * v1;
    tL = t0 - (2.0 / c1) * v1.dot(t0) * v1;
  }
  Vec3 v2 = t1 - tL;
  double c2 = v2.squaredNorm();
  Vec3 r1 = c2 > 1e-300 ? Vec3(rL - (2.0 / c2) * v2.dot(rL) * v2) : rL;
  r1 -= r1.dot(t1) * t1;
  return r1.normalized();
}

// Closest point on segment [p, q] to x: returns parameter in [0, |q-p|].
double closest_on_segment(const Vec3& p, const Vec3& q, const Vec3& x) {
  Vec3 d = q - p;
  double len2 = d.squaredNorm();
  if (len2 == 0.0) return 0.0;
  double u = std::clamp((x - p).dot(d) / len2, 0.0, 1.0);
  return u * std::sqrt(len2);
}

}  // namespace

std::string to_string(CurveKind k) {
  switch (k) {
    case CurveKind::Segment: return "segment";
    case CurveKind::Circle: return "circle";
    case CurveKind::SampledSmooth: return "sampled";
    case CurveKind::PolygonalChain: return "polygonal";
  }
  return "?";
}

std::string to_string(Region r) {
  switch (r) {
    case Region::Cylinder: return "cylinder";
    case Region::CapStart: return "cap_start";
    case Region::CapEnd: return "cap_end";
    case Region::Far: return "far";
  }
  return "?";
}

struct Curve::Sampled {
  double s0 = 0.0, h = 0.0;
  int n = 0;  // number of original samples
  int pad = 0;
  Spline sx, sy, sz;
  std::vector<double> grid_s;
  std::vector<Vec3> grid_x, grid_t, grid_n;
  double max_curvature = 0.0;
};

Curve Curve::segment(double length, double R0) {
  if (!(length > 0)) throw DomainError("segment length must be positive");
  Curve c;
  c.kind_ = CurveKind::Segment;
  c.L_ = length;
  c.R0_ = R0 > 0 ? R0 : 0.25 * length;
  return c;
}

Curve Curve::segment(const Vec3& a, const Vec3& b, double R0) {
  Curve c = segment((b - a).norm(), R0);
  c.a_ = a;
  c.dir_ = (b - a).normalized();
  if ((c.dir_ - Vec3::UnitZ()).norm() < 1e-15) {
    c.seg_frame_ = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  } else {
    Vec3 n = any_perpendicular(c.dir_);
    c.seg_frame_ = {c.dir_, n, c.dir_.cross(n)};
  }
  return c;
}

Curve Curve::circle(const Vec3& center, double radius, const Vec3& normal, double R0cap) {
  if (!(radius > 0)) throw DomainError("circle radius must be positive");
  Curve c;
  c.kind_ = CurveKind::Circle;
  c.closed_ = true;
  c.center_ = center;
  c.radius_ = radius;
  c.normal_ = normal.normalized();
  c.u_ = any_perpendicular(c.normal_);
  c.v_ = c.normal_.cross(c.u_);
  c.L_ = 2.0 * kPi * radius;
  double cap = R0cap > 0 ? R0cap : 0.5 * radius;
  c.R0_ = std::min(cap, 0.9 * radius);
  return c;
}

double estimate_R0(const std::vector<double>& s, const std::vector<Vec3>& pts, bool closed,
                   double cap) {
  const int n = static_cast<int>(pts.size());
  double L = closed ? s.back() - s.front() + (pts.back() - pts.front()).norm() : s.back() - s.front();
  if (closed && (pts.back() - pts.front()).norm() < 1e-12) L = s.back() - s.front();
  double h = (s.back() - s.front()) / (n - 1);
  double kmax = 0.0;
  for (int i = 1; i + 1 < n; ++i) {
    Vec3 dd = (pts[i + 1] - 2.0 * pts[i] + pts[i - 1]) / (h * h);
    kmax = std::max(kmax, dd.norm());
  }
  double r = cap > 0 ? cap : std::numeric_limits<double>::infinity();
  if (kmax > 0) r = std::min(r, 0.9 / kmax);
  // Arcs closer than pi/kmax in parameter are governed by curvature.
  double gap = kmax > 0 ? std::min(kPi / kmax, 0.5 * L) : 0.5 * L;
  gap = std::max(gap, 3.0 * h);
  double dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double sep = s[j] - s[i];
      if (closed) sep = std::min(sep, L - sep);
      if (sep <= gap) continue;
      dmin = std::min(dmin, (pts[i] - pts[j]).norm());
    }
  if (std::isfinite(dmin)) r = std::min(r, 0.5 * dmin);
  if (!std::isfinite(r)) r = 0.25 * L;
  return r;
}

Curve Curve::sampled(const std::vector<double>& s, const std::vector<Vec3>& pts, bool closed,
                     double R0cap) {
  const int n = static_cast<int>(pts.size());
  if (n < 4 || s.size() != pts.size()) throw DomainError("sampled curve needs >= 4 samples");
  double h = (s.back() - s.front()) / (n - 1);
  for (int i = 1; i < n; ++i)
    if (std::abs(s[i] - s[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw DomainError("sampled curve: s must be uniformly spaced");
  for (int i = 1; i < n; ++i) {
    double speed = (pts[i] - pts[i - 1]).norm() / h;
    if (std::abs(speed - 1.0) > 1e-2)
      throw DomainError("sampled curve: samples are not arc-length parametrized");
  }
  Curve c;
  c.kind_ = CurveKind::SampledSmooth;
  c.closed_ = closed;
  auto data = std::make_shared<Sampled>();
  data->h = h;
  data->n = n;
  // Closed data lists the first point once; drop a duplicated closing sample.
  std::vector<Vec3> base = pts;
  std::vector<double> sb = s;
  if (closed && (pts.back() - pts.front()).norm() < 1e-12) {
    base.pop_back();
    sb.pop_back();
  }
  const int m = static_cast<int>(base.size());
  c.L_ = closed ? m * h : s.back() - s.front();
  data->s0 = sb.front();
  std::vector<double> xs, ys, zs;
  int pad = closed ? 8 : 0;
  data->pad = pad;
  for (int i = -pad; i < m + pad + (closed ? 1 : 0); ++i) {
    int k = closed ? ((i % m) + m) % m : i;
    xs.push_back(base[k].x());
    ys.push_back(base[k].y());
    zs.push_back(base[k].z());
  }
  double left = -pad * h;
  data->sx = Spline(xs.begin(), xs.end(), left, h);
  data->sy = Spline(ys.begin(), ys.end(), left, h);
  data->sz = Spline(zs.begin(), zs.end(), left, h);
  c.sampled_ = data;
  // Transport frame on a grid four times denser than the samples.
  int ng = 4 * (closed ? m : m - 1);
  double hg = c.L_ / ng;
  Sampled& d = *data;
  for (int i = 0; i <= ng; ++i) {
    double si = i * hg;
    d.grid_s.push_back(si);
    d.grid_x.push_back(c.point(si));
    d.grid_t.push_back(c.tangent(si));
  }
  d.grid_n.push_back(any_perpendicular(d.grid_t[0]));
  for (int i = 1; i <= ng; ++i)
    d.grid_n.push_back(transport_normal(d.grid_x[i - 1], d.grid_t[i - 1], d.grid_n[i - 1],
                                        d.grid_x[i], d.grid_t[i]));
  for (int i = 0; i <= ng; ++i) d.max_curvature = std::max(d.max_curvature, c.curvature(d.grid_s[i]).norm());
  double cap = R0cap > 0 ? R0cap : std::numeric_limits<double>::infinity();
  c.R0_ = estimate_R0(s, pts, closed, cap);
  if (d.max_curvature > 0) c.R0_ = std::min(c.R0_, 0.9 / d.max_curvature);
  return c;
}

Curve Curve::polygonal(const std::vector<Vec3>& vertices, double R0cap) {
  if (vertices.size() < 2) throw DomainError("polygonal chain needs >= 2 vertices");
  // Merge collinear consecutive segments.
  std::vector<Vec3> v{vertices.front()};
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if ((vertices[i] - v.back()).norm() < 1e-14) continue;
    if (v.size() >= 2) {
      Vec3 d0 = (v.back() - v[v.size() - 2]).normalized();
      Vec3 d1 = (vertices[i] - v.back()).normalized();
      if (d0.cross(d1).norm() < 1e-12 && d0.dot(d1) > 0) {
        v.back() = vertices[i];
        continue;
      }
    }
    v.push_back(vertices[i]);
  }
  Curve c;
  c.kind_ = CurveKind::PolygonalChain;
  c.vertices_ = v;
  c.vertex_s_.push_back(0.0);
  double minlen = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    double len = (v[i] - v[i - 1]).norm();
    minlen = std::min(minlen, len);
    c.vertex_s_.push_back(c.vertex_s_.back() + len);
  }
  c.L_ = c.vertex_s_.back();
  // Frames transported across corners by the minimal rotation.
  Vec3 t0 = (v[1] - v[0]).normalized();
  Vec3 n0 = any_perpendicular(t0);
  c.seg_frames_.push_back({t0, n0, t0.cross(n0)});
  for (std::size_t i = 2; i < v.size(); ++i) {
    const Frame& f = c.seg_frames_.back();
    Vec3 t1 = (v[i] - v[i - 1]).normalized();
    Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(f.t, t1);
    Vec3 n1 = (q * f.n).normalized();
    n1 = (n1 - n1.dot(t1) * t1).normalized();
    c.seg_frames_.push_back({t1, n1, t1.cross(n1)});
  }
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    for (std::size_t j = i + 2; j + 1 < v.size(); ++j) {
      // Brute-force distance between non-adjacent segments.
      for (int k = 0; k <= 64; ++k) {
        Vec3 p = v[i] + (v[i + 1] - v[i]) * (k / 64.0);
        double u = closest_on_segment(v[j], v[j + 1], p);
        Vec3 q = v[j] + (v[j + 1] - v[j]).normalized() * u;
        dmin = std::min(dmin, (p - q).norm());
      }
    }
  double cap = R0cap > 0 ? R0cap : 0.25 * minlen;
  c.R0_ = std::min(cap, 0.5 * dmin);
  return c;
}

double Curve::min_interior_angle() const {
  double best = kPi;
  for (std::size_t i = 1; i + 1 < vertices_.size(); ++i) {
    Vec3 a = (vertices_[i - 1] - vertices_[i]).normalized();
    Vec3 b = (vertices_[i + 1] - vertices_[i]).normalized();
    best = std::min(best, std::acos(std::clamp(a.dot(b), -1.0, 1.0)));
  }
  return best;
}

bool Curve::is_canonical_segment() const {
  return kind_ == CurveKind::Segment && a_.norm() == 0.0 && (dir_ - Vec3::UnitZ()).norm() == 0.0;
}

double Curve::wrap(double s) const {
  if (!closed_) return s;
  double w = std::fmod(s, L_);
  if (w < 0) w += L_;
  return w;
}

void Curve::check_s(double s) const {
  if (closed_) return;
  const double tol = 1e-12 * std::max(1.0, L_);
  if (s < -tol || s > L_ + tol)
    throw DomainError("arc parameter " + std::to_string(s) + " outside [0, L]");
}

Vec3 Curve::point(double s) const {
  check_s(s);
  s = wrap(s);
  switch (kind_) {
    case CurveKind::Segment: return a_ + s * dir_;
    case CurveKind::Circle: {
      double phi = s / radius_;
      return center_ + radius_ * (std::cos(phi) * u_ + std::sin(phi) * v_);
    }
    case CurveKind::SampledSmooth: {
      double q = s;  // spline abscissa measured from the first sample
      return {sampled_->sx(q), sampled_->sy(q), sampled_->sz(q)};
    }
    case CurveKind::PolygonalChain: {
      auto it = std::upper_bound(vertex_s_.begin(), vertex_s_.end(), s);
      std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - vertex_s_.begin() - 1, 0),
                                            vertices_.size() - 2);
      return vertices_[i] + (s - vertex_s_[i]) * seg_frames_[i].t;
    }
  }
  return Vec3::Zero();
}

Vec3 Curve::tangent(double s) const {
  check_s(s);
  s = wrap(s);
  switch (kind_) {
    case CurveKind::Segment: return dir_;
    case CurveKind::Circle: {
      double phi = s / radius_;
      return -std::sin(phi) * u_ + std::cos(phi) * v_;
    }
    case CurveKind::SampledSmooth: {
      Vec3 d{sampled_->sx.prime(s), sampled_->sy.prime(s), sampled_->sz.prime(s)};
      return d.normalized();
    }
    case CurveKind::PolygonalChain: {
      auto it = std::upper_bound(vertex_s_.begin(), vertex_s_.end(), s);
      std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - vertex_s_.begin() - 1, 0),
                                            vertices_.size() - 2);
      return seg_frames_[i].t;
    }
  }
  return Vec3::UnitZ();
}

Vec3 Curve::curvature(double s) const {
  check_s(s);
  s = wrap(s);
  switch (kind_) {
    case CurveKind::Segment:
    case CurveKind::PolygonalChain: return Vec3::Zero();
    case CurveKind::Circle: return (center_ - point(s)) / (radius_ * radius_);
    case CurveKind::SampledSmooth: {
      Vec3 d1{sampled_->sx.prime(s), sampled_->sy.prime(s), sampled_->sz.prime(s)};
      Vec3 d2{sampled_->sx.double_prime(s), sampled_->sy.double_prime(s),
              sampled_->sz.double_prime(s)};
      double sp2 = d1.squaredNorm();
      return (d2 - d2.dot(d1) / sp2 * d1) / sp2;
    }
  }
  return Vec3::Zero();
}

Frame Curve::frame(double s) const {
  check_s(s);
  s = wrap(s);
  switch (kind_) {
    case CurveKind::Segment: return seg_frame_;
    case CurveKind::Circle: {
      Vec3 t = tangent(s);
      Vec3 n = normal_.cross(t);
      return {t, n, normal_};
    }
    case CurveKind::PolygonalChain: {
      auto it = std::upper_bound(vertex_s_.begin(), vertex_s_.end(), s);
      std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - vertex_s_.begin() - 1, 0),
                                            vertices_.size() - 2);
      return seg_frames_[i];
    }
    case CurveKind::SampledSmooth: {
      const Sampled& d = *sampled_;
      double hg = d.grid_s[1] - d.grid_s[0];
      std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(s / hg), d.grid_s.size() - 2);
      Vec3 x = point(s), t = tangent(s);
      Vec3 n = transport_normal(d.grid_x[i], d.grid_t[i], d.grid_n[i], x, t);
      return {t, n, t.cross(n)};
    }
  }
  return seg_frame_;
}

Frame frame_at(const Curve& curve, double s) { return curve.frame(s); }

Vec3 to_cartesian(const Curve& curve, const CylCoords& c) {
  if (c.r < 0) throw DomainError("negative radial coordinate");
  if (c.r >= curve.R0())
    throw TubularError("tubular coordinates invalid: r = " + std::to_string(c.r) +
                       " >= R0 = " + std::to_string(curve.R0()));
  Frame f = curve.frame(c.s);
  return curve.point(c.s) + c.r * (std::cos(c.theta) * f.n + std::sin(c.theta) * f.b);
}

double tubular_jacobian(const Curve& curve, const CylCoords& c) {
  if (curve.kind() == CurveKind::Segment || curve.kind() == CurveKind::PolygonalChain) return c.r;
  Frame f = curve.frame(c.s);
  Vec3 k = curve.curvature(c.s);
  double k1 = k.dot(f.n), k2 = k.dot(f.b);
  return c.r * (1.0 - c.r * (k1 * std::cos(c.theta) + k2 * std::sin(c.theta)));
}

Projection project_and_distance(const Curve& curve, const Vec3& x, double radius) {
  Projection p;
  const double L = curve.length();
  auto set_theta = [&](double s, const Vec3& foot) {
    Frame f = curve.frame(s);
    Vec3 off = x - foot;
    Vec3 radial = off - off.dot(f.t) * f.t;
    p.r = radial.norm();
    p.theta = p.r > 0 ? wrap_angle(std::atan2(radial.dot(f.b), radial.dot(f.n))) : 0.0;
  };
  switch (curve.kind()) {
    case CurveKind::Segment: {
      double u = (x - curve.a_).dot(curve.dir_);
      p.s = std::clamp(u, 0.0, L);
      Vec3 foot = curve.point(p.s);
      p.d = (x - foot).norm();
      p.d_e = std::min((x - curve.point(0.0)).norm(), (x - curve.point(L)).norm());
      p.axial = u < 0 ? u : (u > L ? u - L : 0.0);
      set_theta(p.s, foot);
      if (u <= 0.0 && p.d < radius) p.region = {Region::CapStart, -1, radius};
      else if (u >= L && p.d < radius) p.region = {Region::CapEnd, -1, radius};
      else if (p.d < radius) p.region = {Region::Cylinder, -1, radius};
      else p.region = {Region::Far, -1, radius};
      break;
    }
    case CurveKind::Circle: {
      Vec3 rel = x - curve.center_;
      double z = rel.dot(curve.normal_);
      Vec3 inplane = rel - z * curve.normal_;
      double rp = inplane.norm();
      double phi = rp > 0 ? wrap_angle(std::atan2(inplane.dot(curve.v_), inplane.dot(curve.u_))) : 0.0;
      p.s = curve.radius_ * phi;
      if (p.s >= L) p.s = 0.0;
      p.d = std::hypot(rp - curve.radius_, z);
      p.d_e = std::numeric_limits<double>::infinity();
      set_theta(p.s, curve.point(p.s));
      p.region = {p.d < radius ? Region::Cylinder : Region::Far, -1, radius};
      break;
    }
    case CurveKind::PolygonalChain: {
      const auto& v = curve.vertices_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        double u = closest_on_segment(v[i], v[i + 1], x);
        Vec3 foot = v[i] + u * curve.seg_frames_[i].t;
        double d = (x - foot).norm();
        if (d < best - 1e-14) {
          best = d;
          p.s = curve.vertex_s_[i] + u;
          p.segment = static_cast<int>(i);
        }
      }
      p.d = best;
      p.d_e = std::numeric_limits<double>::infinity();
      for (const auto& e : v) p.d_e = std::min(p.d_e, (x - e).norm());
      set_theta(p.s, curve.point(p.s));
      double u0 = (x - v.front()).dot(curve.seg_frames_.front().t);
      double uL = (x - v.back()).dot(curve.seg_frames_.back().t);
      if (p.d >= radius) p.region = {Region::Far, -1, radius};
      else if (p.s == 0.0 && u0 <= 0.0) p.region = {Region::CapStart, -1, radius};
      else if (p.s == L && uL >= 0.0) p.region = {Region::CapEnd, -1, radius};
      else p.region = {Region::Cylinder, p.segment, radius};
      if (p.region.kind == Region::CapStart) p.axial = u0;
      if (p.region.kind == Region::CapEnd) p.axial = uL;
      break;
    }
    case CurveKind::SampledSmooth: {
      const auto& d = *curve.sampled_;
      const std::size_t ng = d.grid_s.size();
      double best = std::numeric_limits<double>::infinity();
      double sbest = 0.0;
      std::size_t cell = 0;
      for (std::size_t i = 0; i + 1 < ng; ++i) {
        double u = closest_on_segment(d.grid_x[i], d.grid_x[i + 1], x);
        double len = (d.grid_x[i + 1] - d.grid_x[i]).norm();
        Vec3 foot = d.grid_x[i] + (len > 0 ? u / len : 0.0) * (d.grid_x[i + 1] - d.grid_x[i]);
        double dist = (x - foot).norm();
        if (dist < best - 1e-14) {
          best = dist;
          sbest = d.grid_s[i] + (len > 0 ? u / len : 0.0) * (d.grid_s[i + 1] - d.grid_s[i]);
          cell = i;
        }
      }
      // Newton refinement of |x - lambda(s)|^2 on the spline.
      double lo = d.grid_s[cell > 0 ? cell - 1 : 0];
      double hi = d.grid_s[std::min(cell + 2, ng - 1)];
      double s = sbest;
      for (int it = 0; it < 30; ++it) {
        Vec3 lam = curve.point(s);
        Vec3 d1{d.sx.prime(s), d.sy.prime(s), d.sz.prime(s)};
        Vec3 d2{d.sx.double_prime(s), d.sy.double_prime(s), d.sz.double_prime(s)};
        double g = -(x - lam).dot(d1);
        double hss = d1.squaredNorm() - (x - lam).dot(d2);
        if (hss <= 0) break;
        double step = g / hss;
        double sn = std::clamp(s - step, curve.closed() ? lo : std::max(lo, 0.0),
                               curve.closed() ? hi : std::min(hi, L));
        if (std::abs(sn - s) < 1e-15 * std::max(1.0, L)) {
          s = sn;
          break;
        }
        s = sn;
      }
      s = curve.closed() ? curve.wrap(s) : std::clamp(s, 0.0, L);
      p.s = s;
      Vec3 foot = curve.point(s);
      p.d = (x - foot).norm();
      set_theta(s, foot);
      if (curve.closed()) {
        p.d_e = std::numeric_limits<double>::infinity();
        p.region = {p.d < radius ? Region::Cylinder : Region::Far, -1, radius};
      } else {
        p.d_e = std::min((x - curve.point(0.0)).norm(), (x - curve.point(L)).norm());
        double u0 = (x - curve.point(0.0)).dot(curve.tangent(0.0));
        double uL = (x - curve.point(L)).dot(curve.tangent(L));
        if (p.d >= radius) p.region = {Region::Far, -1, radius};
        else if (s <= 0.0 && u0 <= 0.0) p.region = {Region::CapStart, -1, radius};
        else if (s >= L && uL >= 0.0) p.region = {Region::CapEnd, -1, radius};
        else p.region = {Region::Cylinder, -1, radius};
        if (s <= 0.0 && u0 < 0.0) p.axial = u0;
        if (s >= L && uL > 0.0) p.axial = uL;
      }
      break;
    }
  }
  return p;
}

DyadicCylinderDecomposition dyadic_decomposition(const Curve& curve, double rho, double delta) {
  if (!(rho > 0)) throw DomainError("dyadic_decomposition: rho must be positive");
  if (delta > curve.R0())
    throw TubularError("dyadic_decomposition: delta " + std::to_string(delta) + " exceeds R0 " +
                       std::to_string(curve.R0()));
  const double L = curve.length();
  DyadicCylinderDecomposition dec;
  dec.delta = delta;
  dec.rho_requested = rho;
  int J = std::max(0, static_cast<int>(std::lround(std::log2(L / rho))));
  dec.J = J;
  dec.rho = std::ldexp(L, -J);
  if (std::abs(dec.rho - rho) > 1e-12 * rho) {
    dec.snapped = true;
    dec.warning = "rho snapped from " + fmt(rho, 6) + " to " + fmt(dec.rho, 6) + " so that 2^J rho = L";
  }
  dec.pieces.push_back({0, 0.0, dec.rho});
  for (int j = 1; j <= J; ++j)
    dec.pieces.push_back({j, std::ldexp(dec.rho, j - 1), std::ldexp(dec.rho, j)});
  if (J == 0) dec.pieces.front().s1 = L;
  for (int j = 0; j <= J; ++j) {
    int lo = std::max(0, j - 1), hi = std::min(J, j + 1);
    dec.expanded.push_back({j, dec.pieces[lo].s0, dec.pieces[hi].s1});
  }
  return dec;
}

SphericalCoords endpoint_spherical(const Curve& curve, const Vec3& x, EndpointSide which) {
  if (curve.closed()) throw DomainError("endpoint_spherical: closed curve has no endpoints");
  const double s = which == EndpointSide::Start ? 0.0 : curve.length();
  Frame f = curve.frame(s);
  Vec3 axis = which == EndpointSide::Start ? f.t : Vec3(-f.t);
  Vec3 rel = x - curve.point(s);
  SphericalCoords sc;
  sc.r = rel.norm();
  if (sc.r >= curve.R0())
    throw DomainError("endpoint_spherical: point beyond R0 of the endpoint");
  if (sc.r == 0.0) return sc;
  sc.xi = std::acos(std::clamp(rel.dot(axis) / sc.r, -1.0, 1.0));
  Vec3 radial = rel - rel.dot(f.t) * f.t;
  sc.theta = radial.norm() > 0 ? wrap_angle(std::atan2(radial.dot(f.b), radial.dot(f.n))) : 0.0;
  return sc;
}

void read_curve_csv(const std::string& path, std::vector<double>& s, std::vector<Vec3>& pts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve samples: " + path);
  std::string line;
  s.clear();
  pts.clear();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    double a, x, y, z;
    if (!(ls >> a >> x >> y >> z)) continue;  // header or malformed row
    s.push_back(a);
    pts.emplace_back(x, y, z);
  }
}

Curve Curve::from_config(const Config& cfg, const std::string& sec) {
  std::string kind = cfg.get_string(sec, "kind", "segment");
  double R0 = cfg.get_double(sec, "R0", -1.0);
  auto vec3 = [&](const std::string& key, const Vec3& fallback) {
    auto v = cfg.get_list(sec, key);
    if (v.empty()) return fallback;
    if (v.size() != 3) throw std::runtime_error("config " + sec + "." + key + ": expected 3 numbers");
    return Vec3(v[0], v[1], v[2]);
  };
  if (kind == "segment") {
    if (cfg.has(sec, "start") || cfg.has(sec, "end"))
      return segment(vec3("start", Vec3::Zero()), vec3("end", Vec3::UnitZ()), R0);
    return segment(cfg.get_double(sec, "length", 1.0), R0);
  }
  if (kind == "circle")
    return circle(vec3("center", Vec3::Zero()), cfg.get_double(sec, "radius", 1.0),
                  vec3("normal", Vec3::UnitZ()), R0);
  if (kind == "polygonal") {
    auto v = cfg.get_list(sec, "vertices");
    if (v.size() < 6 || v.size() % 3) throw std::runtime_error("config " + sec + ".vertices: need 3k numbers");
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < v.size(); i += 3) pts.emplace_back(v[i], v[i + 1], v[i + 2]);
    return polygonal(pts, R0);
  }
  if (kind == "sampled") {
    std::vector<double> s;
    std::vector<Vec3> pts;
    read_curve_csv(cfg.get_string(sec, "samples"), s, pts);
    return sampled(s, pts, cfg.get_bool(sec, "closed", false), R0);
  }
  throw std::runtime_error("config " + sec + ".kind: unknown curve kind " + kind);
}

}  // namespace lsreg
