#include "lsreg/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "lsreg/config.hpp"
#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

const double kSqrt3 = std::sqrt(3.0);

double point_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  Vec3 c = p.cwiseMax(lo).cwiseMin(hi);
  return (p - c).norm();
}

// Box to segment [a, b]: the distance along the segment is convex.
double segment_box(const Vec3& a, const Vec3& b, const Vec3& lo, const Vec3& hi) {
  Vec3 d = b - a;
  auto f = [&](double t) { return point_box(a + t * d, lo, hi); };
  double x0 = 0.0, x1 = 1.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = x1 - g * (x1 - x0), e = x0 + g * (x1 - x0);
  double fc = f(c), fe = f(e);
  for (int it = 0; it < 80; ++it) {
    if (fc <= fe) {
      x1 = e;
      e = c;
      fe = fc;
      c = x1 - g * (x1 - x0);
      fc = f(c);
    } else {
      x0 = c;
      c = e;
      fc = fe;
      e = x0 + g * (x1 - x0);
      fe = f(e);
    }
  }
  return std::min({fc, fe, f(0.0), f(1.0), f(0.5 * (x0 + x1))});
}

// Harmonic set H = {0} u {1/n}: largest element <= t and smallest >= t.
bool h_below(double t, double& e) {
  if (t < 0.0) return false;
  if (t >= 1.0) {
    e = 1.0;
    return true;
  }
  if (t == 0.0) {
    e = 0.0;
    return true;
  }
  e = 1.0 / std::ceil(1.0 / t);
  if (e > t) e = 1.0 / (std::ceil(1.0 / t) + 1.0);
  return true;
}

bool h_above(double t, double& e) {
  if (t > 1.0) return false;
  if (t <= 0.0) {
    e = 0.0;
    return true;
  }
  e = 1.0 / std::floor(1.0 / t);
  if (e < t) e = 1.0 / (std::floor(1.0 / t) - 1.0);
  return true;
}

// Distance from [t0, t1] to H.
double h_interval(double t0, double t1) {
  double lo, hi;
  bool has_lo = h_below(t1, lo);
  if (has_lo && lo >= t0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  if (has_lo) best = t0 - lo;
  if (h_above(t0, hi)) best = std::min(best, hi - t1);
  return best;
}

int axis_of(const Vec3& dir) {
  for (int i = 0; i < 3; ++i)
    if (std::abs(std::abs(dir[i]) - 1.0) < 1e-14) return i;
  return -1;
}

// Parameter interval of {a + t d : |a + t d - x| <= R}; false if empty.
bool clip_line(const Vec3& a, const Vec3& d, const Vec3& x, double R, double& t0, double& t1) {
  double dd = d.squaredNorm();
  Vec3 w = a - x;
  double b = w.dot(d), c = w.squaredNorm() - R * R;
  double disc = b * b - dd * c;
  if (disc < 0.0) return false;
  double s = std::sqrt(disc);
  t0 = (-b - s) / dd;
  t1 = (-b + s) / dd;
  return true;
}

void sample_piece(const Vec3& a, const Vec3& b, const Vec3& x, double R, double h, std::vector<Vec3>& out) {
  double t0, t1;
  if (!clip_line(a, b - a, x, R, t0, t1)) return;
  t0 = std::max(t0, 0.0);
  t1 = std::min(t1, 1.0);
  if (t0 > t1) return;
  double len = (b - a).norm() * (t1 - t0);
  int m = std::max(1, static_cast<int>(std::ceil(len / h)));
  for (int i = 0; i <= m; ++i) out.push_back(a + (t0 + (t1 - t0) * i / m) * (b - a));
}

}  // namespace

TargetSet TargetSet::point_cloud(std::vector<Vec3> pts) {
  if (pts.empty()) throw DomainError("point cloud is empty");
  TargetSet e;
  e.kind_ = Kind::FinitePointCloud;
  e.pts_ = std::move(pts);
  return e;
}

TargetSet TargetSet::point(const Vec3& p) { return point_cloud({p}); }

TargetSet TargetSet::segment(const Vec3& a, const Vec3& b) {
  TargetSet e;
  e.kind_ = Kind::Segment;
  e.a_ = a;
  e.b_ = b;
  return e;
}

TargetSet TargetSet::sampled_curve(const Curve& curve, double spacing) {
  if (!(spacing > 0.0)) throw DomainError("curve sample spacing must be positive");
  TargetSet e;
  e.kind_ = Kind::SampledCurve;
  int m = std::max(2, static_cast<int>(std::ceil(curve.length() / spacing)));
  for (int i = 0; i <= m; ++i) {
    double s = curve.length() * i / m;
    if (curve.closed() && i == m) s = 0.0;
    e.pts_.push_back(curve.point(s));
  }
  e.resolution_ = curve.length() / m;
  return e;
}

TargetSet TargetSet::harmonic(const Vec3& origin, const Vec3& dir) {
  if (axis_of(dir) < 0) throw DomainError("harmonic sequence must lie along a coordinate axis");
  TargetSet e;
  e.kind_ = Kind::HarmonicSequence;
  e.a_ = origin;
  e.b_ = dir;
  return e;
}

std::string TargetSet::describe() const {
  switch (kind_) {
    case Kind::FinitePointCloud:
      return pts_.size() == 1 ? "point" : "point_cloud(" + std::to_string(pts_.size()) + ")";
    case Kind::Segment:
      return "segment";
    case Kind::SampledCurve:
      return "sampled_curve(" + std::to_string(pts_.size()) + ")";
    case Kind::HarmonicSequence:
      return "harmonic";
  }
  return "";
}

double TargetSet::box_distance(const Vec3& lo, const Vec3& hi) const {
  switch (kind_) {
    case Kind::FinitePointCloud: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : pts_) best = std::min(best, point_box(p, lo, hi));
      return best;
    }
    case Kind::Segment:
      return segment_box(a_, b_, lo, hi);
    case Kind::SampledCurve: {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
        const Vec3 &p = pts_[i], &q = pts_[i + 1];
        double lb = point_box(0.5 * (p + q), lo, hi) - 0.5 * (q - p).norm();
        if (lb >= best) continue;
        best = std::min(best, segment_box(p, q, lo, hi));
      }
      return best;
    }
    case Kind::HarmonicSequence: {
      int ax = axis_of(b_);
      double sg = b_[ax] > 0 ? 1.0 : -1.0;
      double t0 = (lo[ax] - a_[ax]) * sg, t1 = (hi[ax] - a_[ax]) * sg;
      if (t0 > t1) std::swap(t0, t1);
      double along = h_interval(t0, t1);
      double perp2 = 0.0;
      for (int i = 0; i < 3; ++i) {
        if (i == ax) continue;
        double c = std::clamp(a_[i], lo[i], hi[i]);
        perp2 += (a_[i] - c) * (a_[i] - c);
      }
      return std::sqrt(along * along + perp2);
    }
  }
  return 0.0;
}

double TargetSet::distance(const Vec3& x) const { return box_distance(x, x); }

void TargetSet::bounding_box(Vec3& lo, Vec3& hi) const {
  switch (kind_) {
    case Kind::FinitePointCloud:
    case Kind::SampledCurve:
      lo = hi = pts_.front();
      for (const auto& p : pts_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      return;
    case Kind::Segment:
      lo = a_.cwiseMin(b_);
      hi = a_.cwiseMax(b_);
      return;
    case Kind::HarmonicSequence:
      lo = a_.cwiseMin(a_ + b_);
      hi = a_.cwiseMax(a_ + b_);
      return;
  }
}

double TargetSet::diameter() const {
  switch (kind_) {
    case Kind::FinitePointCloud: {
      double d = 0.0;
      for (std::size_t i = 0; i < pts_.size(); ++i)
        for (std::size_t j = i + 1; j < pts_.size(); ++j) d = std::max(d, (pts_[i] - pts_[j]).norm());
      return d;
    }
    case Kind::Segment:
      return (b_ - a_).norm();
    case Kind::SampledCurve: {
      Vec3 lo, hi;
      bounding_box(lo, hi);
      return (hi - lo).norm();
    }
    case Kind::HarmonicSequence:
      return 1.0;
  }
  return 0.0;
}

std::vector<Vec3> TargetSet::samples(const Vec3& x, double R, double h) const {
  std::vector<Vec3> out;
  switch (kind_) {
    case Kind::FinitePointCloud:
      for (const auto& p : pts_)
        if ((p - x).norm() <= R) out.push_back(p);
      break;
    case Kind::Segment:
      sample_piece(a_, b_, x, R, h, out);
      break;
    case Kind::SampledCurve:
      for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
        std::vector<Vec3> piece;
        sample_piece(pts_[i], pts_[i + 1], x, R, h, piece);
        // drop the shared endpoint
        if (!out.empty() && !piece.empty() && (piece.front() - out.back()).norm() < 1e-14) piece.erase(piece.begin());
        out.insert(out.end(), piece.begin(), piece.end());
      }
      break;
    case Kind::HarmonicSequence: {
      double t0, t1;
      if (!clip_line(a_, b_, x, R, t0, t1)) break;
      t1 = std::min(t1, 1.0);
      if (t1 < 0.0 || t0 > 1.0) break;
      double last = std::numeric_limits<double>::infinity();
      long n0 = t1 >= 1.0 ? 1 : static_cast<long>(std::ceil(1.0 / t1));
      for (long n = n0;; ++n) {
        double e = 1.0 / static_cast<double>(n);
        if (e < t0) break;
        if (e < h) break;  // the rest lies within h of 0
        if (last - e >= h) {
          out.push_back(a_ + e * b_);
          last = e;
        }
      }
      if (t0 <= 0.0) out.push_back(a_);
      break;
    }
  }
  return out;
}

std::vector<Vec3> TargetSet::anchors(int max_count) const {
  std::vector<Vec3> out;
  switch (kind_) {
    case Kind::FinitePointCloud:
    case Kind::SampledCurve: {
      int m = std::min<int>(max_count, static_cast<int>(pts_.size()));
      for (int i = 0; i < m; ++i) out.push_back(pts_[static_cast<std::size_t>(i) * (pts_.size() - 1) / std::max(1, m - 1)]);
      break;
    }
    case Kind::Segment:
      for (double t : {0.5, 0.0, 1.0, 0.25, 0.75}) out.push_back(a_ + t * (b_ - a_));
      break;
    case Kind::HarmonicSequence:
      for (double e : {0.0, 1.0, 0.5, 1.0 / 3, 0.2, 0.1, 0.05, 0.02}) out.push_back(a_ + e * b_);
      break;
  }
  if (static_cast<int>(out.size()) > max_count) out.resize(max_count);
  return out;
}

// ---------------------------------------------------------------------------

WhitneyBox WhitneyBox::around(const TargetSet& E, double margin) {
  Vec3 lo, hi;
  E.bounding_box(lo, hi);
  double ext = (hi - lo).maxCoeff() + 2.0 * margin;
  double edge = std::exp2(std::ceil(std::log2(std::max(ext, 1e-300))));
  Vec3 corner = 0.5 * (lo + hi) - Vec3::Constant(0.5 * edge);
  return {corner, edge};
}

bool whitney_sandwich(const WhitneyCube& q) {
  return kSqrt3 * q.edge <= q.dist && q.dist <= 4.0 * kSqrt3 * q.edge;
}

namespace {

struct Cell {
  Vec3 corner;
  double edge;
  int k;
};

struct Partial {
  std::vector<WhitneyCube> cubes;
  double uncovered = 0.0;
  bool truncated = false;
};

void recurse(const TargetSet& E, const Cell& c, int k_max, Partial& out) {
  double d = E.box_distance(c.corner, c.corner + Vec3::Constant(c.edge));
  if (d >= kSqrt3 * c.edge) {
    out.cubes.push_back({c.k, c.corner, c.edge, d});
    return;
  }
  if (c.k >= k_max) {
    out.uncovered += c.edge * c.edge * c.edge;
    out.truncated = true;
    return;
  }
  double h = 0.5 * c.edge;
  for (int i = 0; i < 8; ++i) {
    Vec3 o((i & 1) ? h : 0.0, (i & 2) ? h : 0.0, (i & 4) ? h : 0.0);
    recurse(E, {c.corner + o, h, c.k + 1}, k_max, out);
  }
}

std::uint64_t cell_key(int k, long ix, long iy, long iz) {
  return (static_cast<std::uint64_t>(k + 64) << 57) | (static_cast<std::uint64_t>(ix) << 38) |
         (static_cast<std::uint64_t>(iy) << 19) | static_cast<std::uint64_t>(iz);
}

}  // namespace

WhitneyResult whitney_decompose(const TargetSet& E, const WhitneyBox& box, int k_max) {
  WhitneyResult res;
  res.box = box;
  res.k_min = static_cast<int>(std::lround(-std::log2(box.edge)));
  if (std::abs(std::exp2(-res.k_min) - box.edge) > 1e-12 * box.edge)
    throw DomainError("Whitney box edge must be a power of two");
  if (k_max - res.k_min > 18) throw DomainError("Whitney depth limited to 18 levels below the box");
  res.k_max = k_max;
  res.box_volume = box.edge * box.edge * box.edge;

  // two levels of subtrees, processed independently and joined in order
  std::vector<Cell> roots{{box.corner, box.edge, res.k_min}};
  std::vector<WhitneyCube> top;
  for (int lvl = 0; lvl < 2; ++lvl) {
    std::vector<Cell> next;
    for (const auto& c : roots) {
      double d = E.box_distance(c.corner, c.corner + Vec3::Constant(c.edge));
      if (d >= kSqrt3 * c.edge) {
        top.push_back({c.k, c.corner, c.edge, d});
        continue;
      }
      if (c.k >= k_max) {
        res.uncovered_volume += c.edge * c.edge * c.edge;
        res.truncated = true;
        continue;
      }
      double h = 0.5 * c.edge;
      for (int i = 0; i < 8; ++i) {
        Vec3 o((i & 1) ? h : 0.0, (i & 2) ? h : 0.0, (i & 4) ? h : 0.0);
        next.push_back({c.corner + o, h, c.k + 1});
      }
    }
    roots = std::move(next);
  }
  auto parts = parallel_map<Partial>(roots.size(), [&](std::size_t i) {
    Partial p;
    recurse(E, roots[i], k_max, p);
    return p;
  });
  res.cubes = std::move(top);
  for (auto& p : parts) {
    res.cubes.insert(res.cubes.end(), p.cubes.begin(), p.cubes.end());
    res.uncovered_volume += p.uncovered;
    res.truncated = res.truncated || p.truncated;
  }
  for (const auto& q : res.cubes) {
    res.covered_volume += q.edge * q.edge * q.edge;
    if (!whitney_sandwich(q)) ++res.sandwich_violations;
  }

  // generation gap over touching pairs, seen from the finer cube
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(res.cubes.size() * 2);
  auto idx = [&](double v, double o, double l) { return static_cast<long>(std::floor((v - o) / l + 1e-9)); };
  for (std::size_t i = 0; i < res.cubes.size(); ++i) {
    const auto& q = res.cubes[i];
    index[cell_key(q.k, idx(q.corner.x(), box.corner.x(), q.edge), idx(q.corner.y(), box.corner.y(), q.edge),
                   idx(q.corner.z(), box.corner.z(), q.edge))] = static_cast<int>(i);
  }
  int gap = 0;
  for (const auto& q : res.cubes) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (!dx && !dy && !dz) continue;
          Vec3 c = q.corner + q.edge * Vec3(dx + 0.5, dy + 0.5, dz + 0.5);
          Vec3 rel = c - box.corner;
          if (rel.minCoeff() < 0.0 || rel.maxCoeff() > box.edge) continue;
          for (int g = q.k; g >= res.k_min; --g) {
            double l = std::exp2(-g);
            auto it = index.find(cell_key(g, static_cast<long>(std::floor(rel.x() / l)),
                                          static_cast<long>(std::floor(rel.y() / l)),
                                          static_cast<long>(std::floor(rel.z() / l))));
            if (it != index.end()) {
              gap = std::max(gap, q.k - g);
              break;
            }
          }
        }
  }
  res.max_generation_gap = gap;
  return res;
}

long GenerationCensus::count(int k) const {
  int i = k - k_min;
  if (i < 0 || i >= static_cast<int>(counts.size())) return 0;
  return counts[i];
}

GenerationCensus generation_census(const WhitneyResult& w, const Vec3& x, double R) {
  GenerationCensus c;
  c.center = x;
  c.radius = R;
  c.k_min = w.k_min;
  c.counts.assign(w.k_max - w.k_min + 1, 0);
  for (const auto& q : w.cubes) {
    Vec3 far;
    for (int i = 0; i < 3; ++i) far[i] = std::max(std::abs(q.corner[i] - x[i]), std::abs(q.corner[i] + q.edge - x[i]));
    if (far.norm() <= R) ++c.counts[q.k - w.k_min];
  }
  return c;
}

double census_slope(const GenerationCensus& c, int k_from) {
  std::vector<double> k, lw;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    int kk = c.k_min + static_cast<int>(i);
    if (kk < k_from || c.counts[i] <= 0) continue;
    k.push_back(kk);
    lw.push_back(std::log2(static_cast<double>(c.counts[i])));
  }
  if (k.size() < 2) return 0.0;
  double mk = 0, ml = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    mk += k[i];
    ml += lw[i];
  }
  mk /= k.size();
  ml /= k.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    num += (k[i] - mk) * (lw[i] - ml);
    den += (k[i] - mk) * (k[i] - mk);
  }
  return num / den;
}

long covering_number(const TargetSet& E, const Vec3& x, double R, double r) {
  if (!(r > 0.0 && r < R)) throw DomainError("covering radius must satisfy 0 < r < R");
  if (E.resolution() > r)
    throw ResolutionError("set sampled at spacing " + fmt(E.resolution(), 6) + " coarser than r = " + fmt(r, 6));
  auto pts = E.samples(x, R, 0.25 * r);
  if (pts.empty()) return 0;
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = (pts[i] - x).norm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
  long count = 0;
  std::size_t c = first;
  while (true) {
    ++count;
    std::size_t far = 0;
    double fd = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      dist[i] = std::min(dist[i], (pts[i] - pts[c]).norm());
      if (dist[i] > fd) {
        fd = dist[i];
        far = i;
      }
    }
    if (fd <= r) break;
    c = far;
  }
  return count;
}

AssouadReport assouad_estimate(const TargetSet& E, const AssouadOptions& opt) {
  AssouadReport rep;
  double diam = E.diameter();
  if (!(diam > 0.0)) diam = 1.0;
  std::vector<double> radii = opt.radii;
  if (radii.empty())
    for (int j = 2; j <= 7; ++j) radii.push_back(std::ldexp(1.0, -j));
  rep.octaves = opt.r_to - opt.r_from;
  rep.low_confidence = rep.octaves < 3;
  rep.policy = "anchors=" + std::to_string(opt.anchors) + ";R/diam=" + fmt(radii.front(), 6) + ".." +
               fmt(radii.back(), 6) + ";r=R*2^-" + std::to_string(opt.r_from) + "..2^-" + std::to_string(opt.r_to) +
               ";slope=lsq(log N, log R/r);estimate=max";
  auto anchors = E.anchors(opt.anchors);
  rep.estimate = -std::numeric_limits<double>::infinity();
  rep.min_slope = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (double f : radii) {
      AssouadRow row;
      row.anchor = static_cast<int>(a);
      row.x = anchors[a];
      row.R = f * diam;
      std::vector<double> ratio, n;
      for (int j = opt.r_from; j <= opt.r_to; ++j) {
        double r = std::ldexp(row.R, -j);
        long N = covering_number(E, row.x, row.R, r);
        row.r.push_back(r);
        row.N.push_back(N);
        ratio.push_back(row.R / r);
        n.push_back(static_cast<double>(std::max(N, 1L)));
      }
      row.slope = loglog_slope(ratio, n);
      rep.estimate = std::max(rep.estimate, row.slope);
      rep.min_slope = std::min(rep.min_slope, row.slope);
      rep.rows.push_back(std::move(row));
    }
  rep.spread = rep.estimate - rep.min_slope;
  return rep;
}

BoxDimensionReport box_dimension_estimate(const TargetSet& E, int j_from, int j_to) {
  BoxDimensionReport rep;
  double diam = E.diameter();
  if (!(diam > 0.0)) diam = 1.0;
  Vec3 lo, hi;
  E.bounding_box(lo, hi);
  Vec3 c = 0.5 * (lo + hi);
  std::vector<double> inv, n;
  for (int j = j_from; j <= j_to; ++j) {
    double r = std::ldexp(diam, -j);
    long N = covering_number(E, c, 2.0 * diam, r);
    rep.r.push_back(r);
    rep.N.push_back(N);
    inv.push_back(1.0 / r);
    n.push_back(static_cast<double>(std::max(N, 1L)));
  }
  rep.estimate = loglog_slope(inv, n);
  return rep;
}

void write_cubes_csv(std::ostream& os, const WhitneyResult& w, const std::string& config_hash) {
  CsvWriter out(os, {"k", "x", "y", "z", "edge", "dist"}, config_hash);
  for (const auto& q : w.cubes)
    out.row({std::to_string(q.k), fmt(q.corner.x()), fmt(q.corner.y()), fmt(q.corner.z()), fmt(q.edge), fmt(q.dist)});
}

void write_census_csv(std::ostream& os, const std::vector<GenerationCensus>& cs, const std::string& config_hash) {
  CsvWriter out(os, {"x", "y", "z", "R", "k", "W_k"}, config_hash);
  for (const auto& c : cs)
    for (std::size_t i = 0; i < c.counts.size(); ++i)
      out.row({fmt(c.center.x()), fmt(c.center.y()), fmt(c.center.z()), fmt(c.radius),
               std::to_string(c.k_min + static_cast<int>(i)), std::to_string(c.counts[i])});
}

void write_assouad_csv(std::ostream& os, const AssouadReport& a, const std::string& config_hash) {
  CsvWriter out(os, {"anchor", "x", "y", "z", "R", "r", "N_r", "slope"}, config_hash);
  for (const auto& row : a.rows)
    for (std::size_t i = 0; i < row.r.size(); ++i)
      out.row({std::to_string(row.anchor), fmt(row.x.x()), fmt(row.x.y()), fmt(row.x.z()), fmt(row.R), fmt(row.r[i]),
               std::to_string(row.N[i]), fmt(row.slope)});
}

}  // namespace lsreg
