#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lsreg/errors.hpp"

namespace lsreg {

class Config;

using Vec3 = Eigen::Vector3d;

enum class CurveKind { Segment, Circle, SampledSmooth, PolygonalChain };

std::string to_string(CurveKind k);

struct Frame {
  Vec3 t, n, b;
};

struct CylCoords {
  double r = 0.0;
  double theta = 0.0;
  double s = 0.0;
};

enum class Region { Cylinder, CapStart, CapEnd, Far };

std::string to_string(Region r);

struct RegionLabel {
  Region kind = Region::Far;
  int piece = -1;  // cylinder piece or polygon segment index, -1 if unset
  double radius = 0.0;
};

struct Projection {
  double s = 0.0;     // nearest arc parameter, smallest on ties
  double d = 0.0;     // distance to the curve
  double d_e = 0.0;   // distance to the endpoints (vertices for chains); +inf if closed
  double r = 0.0;     // radial tubular coordinate (== d inside the tube)
  double theta = 0.0; // angle in the (n,b) plane at s
  double axial = 0.0; // signed tangential offset beyond the ends, 0 inside
  RegionLabel region;
  int segment = -1;   // nearest segment for polygonal chains
};

struct SphericalCoords {
  double r = 0.0;     // distance to the endpoint, equals d_e
  double theta = 0.0; // azimuth in the endpoint frame
  double xi = 0.0;    // zenith angle from the inward tangent
};

enum class EndpointSide { Start, End };

struct CylinderPiece {
  int j = 0;
  double s0 = 0.0, s1 = 0.0;
};

struct DyadicCylinderDecomposition {
  double delta = 0.0;
  double rho = 0.0;            // snapped inner scale, 2^J rho = L
  double rho_requested = 0.0;
  int J = 0;
  bool snapped = false;
  std::string warning;
  std::vector<CylinderPiece> pieces;
  std::vector<CylinderPiece> expanded;  // C-bar_j, s-extent of pieces j-1..j+1
};

// Parametrized fracture. Unit speed in s on [0, L].
class Curve {
 public:
  static Curve segment(double length, double R0);
  static Curve segment(const Vec3& a, const Vec3& b, double R0);
  static Curve circle(const Vec3& center, double radius, const Vec3& normal, double R0cap);
  // Arc-length samples on a uniform grid; positions are spline-interpolated.
  static Curve sampled(const std::vector<double>& s, const std::vector<Vec3>& pts,
                       bool closed, double R0cap);
  static Curve polygonal(const std::vector<Vec3>& vertices, double R0cap);
  // Key-value section [curve]; see README for keys.
  static Curve from_config(const Config& cfg, const std::string& section = "curve");

  CurveKind kind() const { return kind_; }
  double length() const { return L_; }
  bool closed() const { return closed_; }
  double R0() const { return R0_; }

  Vec3 point(double s) const;
  Vec3 tangent(double s) const;
  // Curvature vector dt/ds.
  Vec3 curvature(double s) const;
  Frame frame(double s) const;

  // Polygonal chain data.
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<double>& vertex_s() const { return vertex_s_; }
  double min_interior_angle() const;

  // Straight segment placed on the z-axis from 0 to L with the fixed frame.
  bool is_canonical_segment() const;

 private:
  struct Sampled;
  CurveKind kind_ = CurveKind::Segment;
  double L_ = 1.0;
  bool closed_ = false;
  double R0_ = 0.25;
  Vec3 a_ = Vec3::Zero(), dir_ = Vec3::UnitZ();
  Frame seg_frame_{Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  Vec3 center_ = Vec3::Zero(), u_ = Vec3::UnitX(), v_ = Vec3::UnitY(), normal_ = Vec3::UnitZ();
  double radius_ = 1.0;
  std::vector<Vec3> vertices_;
  std::vector<double> vertex_s_;
  std::vector<Frame> seg_frames_;
  std::shared_ptr<const Sampled> sampled_;

  friend Projection project_and_distance(const Curve&, const Vec3&, double);
  double wrap(double s) const;
  void check_s(double s) const;
};

Frame frame_at(const Curve& curve, double s);
Vec3 to_cartesian(const Curve& curve, const CylCoords& c);
// 'radius' selects the region partition B+_radius(0), C(curve, radius), B+_radius(L).
Projection project_and_distance(const Curve& curve, const Vec3& x, double radius);
DyadicCylinderDecomposition dyadic_decomposition(const Curve& curve, double rho, double delta);
SphericalCoords endpoint_spherical(const Curve& curve, const Vec3& x, EndpointSide which);

// Volume factor of the tubular map X(r, theta, s) for the transport frame.
double tubular_jacobian(const Curve& curve, const CylCoords& c);

// Estimated tubular radius for sampled data: min(cap, 0.9 / max curvature,
// half the minimal distance between non-adjacent arcs).
double estimate_R0(const std::vector<double>& s, const std::vector<Vec3>& pts, bool closed,
                   double cap);

// Reads "s,x,y,z" rows (header optional).
void read_curve_csv(const std::string& path, std::vector<double>& s, std::vector<Vec3>& pts);

}  // namespace lsreg
