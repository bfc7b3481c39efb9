#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lsreg/geometry.hpp"

namespace lsreg {

// Exponents on d(x) and d_e(x).
struct WeightSpec {
  double gamma = 0.0;
  double mu = 0.0;
};

// Region of integration. Cylinder: r in [r0, r1], s in [s0, s1].
// CapStart/CapEnd: the half ball behind the endpoint with R in [r0, r1].
// Far: ball(center, outer) minus the tube B(curve, r0).
struct RegionSpec {
  Region kind = Region::Cylinder;
  int piece = -1;
  double s0 = 0.0, s1 = 0.0;
  double r0 = 0.0, r1 = 0.0;
  Vec3 center = Vec3::Zero();
  double outer = 0.0;
  std::string name;

  static RegionSpec cylinder(double s0, double s1, double r0, double r1, std::string name = "cylinder",
                             int piece = -1);
  static RegionSpec cap(Region side, double r0, double r1, std::string name = "");
  static RegionSpec far(const Vec3& center, double outer, double r0, std::string name = "far");
};

struct QuadOptions {
  int n = 6;              // Gauss-Legendre nodes per panel
  int n_theta = 16;       // trapezoid nodes in theta (ignored when axisymmetric)
  double scale = 0.0;     // finest structure of the integrand (rho); 0 = R0/8
  int depth = 6;          // dyadic levels below 'scale' toward singular sets
  double min_a = 0.0;     // most negative exponent on d to resolve
  double min_b = 0.0;     // most negative exponent on d_e to resolve
  bool axisymmetric = false;  // meridian nodes only; needs a straight segment
  int cartesian_cells = 0;    // > 0 forces the indicator-cell fallback with this many cells per axis
};

struct QuadNode {
  Vec3 x = Vec3::Zero();
  double w = 0.0;    // volume weight (2 pi r folded in when axisymmetric)
  double d = 0.0;
  double d_e = 0.0;  // +inf for closed curves
  Vec3 t = Vec3::UnitZ();  // tangent at the projection
  double r = 0.0, s = 0.0;  // tubular coordinates of x
};

struct RegionQuadrature {
  RegionSpec spec;
  std::vector<QuadNode> nodes;
  bool axisymmetric = false;
  bool touches_endpoint = false;  // region reaches a point where d_e = 0
  double volume() const;
};

RegionQuadrature region_quadrature(const Curve& curve, const RegionSpec& region, const QuadOptions& opt);

// d^{2a} d_e^{2b} integrability, analytic. touches_axis: the region reaches d = 0.
struct Integrability {
  bool finite = true;
  std::string violated;  // empty when finite
};
Integrability weight_integrability(const WeightSpec& w, double shift_a, double shift_b, Region kind,
                                   bool touches_axis = true, bool touches_endpoint = true);
Integrability weight_integrability(const WeightSpec& w, double shift_a, double shift_b,
                                   const RegionQuadrature& q);

// |field|^2 at a node.
using NodeField = std::function<double(const QuadNode&)>;

// int |field|^2 d^{2a} d_e^{2b}, a = gamma + shift_a, b = mu + shift_b.
// Throws IntegrabilityError for non-integrable weights unless force is set.
double weighted_seminorm(const NodeField& f2, const RegionQuadrature& q, const WeightSpec& w,
                         double shift_a = 0.0, double shift_b = 0.0, bool force = false);

struct CheckedSeminorm {
  double value = 0.0;
  double refined = 0.0;
  double disagreement = 0.0;  // relative
  bool flagged = false;
};
// Same integral on the base grid and with n + 2 nodes and depth + 2.
CheckedSeminorm weighted_seminorm_checked(const NodeField& f2, const Curve& curve, const RegionSpec& region,
                                          QuadOptions opt, const WeightSpec& w, double shift_a = 0.0,
                                          double shift_b = 0.0, double tol = 1e-2);

// Value, gradient and Hessian of a field at a point.
struct Jet {
  double u = 0.0;
  Vec3 g = Vec3::Zero();
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
};

// Sum of |D^beta v|^2 over ordered index tuples with k_perp transverse and
// k_s tangential entries (transverse plane rotation invariant), k <= 2.
double split_density(const Jet& j, const Vec3& t, int kperp, int ks);

// Field family for the full norm: density for the split (k_perp, k_s).
using SplitField = std::function<double(const QuadNode&, int kperp, int ks)>;

struct Contribution {
  std::string region;
  Region kind = Region::Cylinder;
  int piece = -1;
  double value = 0.0;  // sqrt of the region integral
  double diag = 0.0;   // refinement disagreement, 0 if not checked
};

struct NormReport {
  double rho = 0.0;
  int kperp = 0, ks = 0;
  WeightSpec weight;
  bool isotropic = true;
  double a = 0.0, b = 0.0;  // exponents actually used on d and d_e
  std::vector<Contribution> parts;
  double total = 0.0;
  double diag = 0.0;
};

// Norm of one split over the given regions, with exponents a, b applied
// as given (no Kondratiev shift).
NormReport split_norm(const SplitField& f, const std::vector<RegionQuadrature>& regions, int kperp, int ks,
                      double a, double b, double rho = 0.0);

struct KondratievReport {
  int m = 0;
  WeightSpec weight;
  bool isotropic = true;
  std::vector<NormReport> terms;
  double total = 0.0;
};

// Isotropic: sum_k int |D^k v|^2 d^{2(gamma+k)}; anisotropic: sum over splits
// of d^{2(gamma+k_perp)} d_e^{2(mu+k_s)}.
KondratievReport kondratiev_norm(const SplitField& f, int m, const WeightSpec& w,
                                 const std::vector<RegionQuadrature>& regions, bool isotropic,
                                 double rho = 0.0);

// Regions of B(curve, R0): dyadic cylinder pieces for rho plus both caps.
std::vector<RegionSpec> tube_regions(const Curve& curve, double rho, double R0);

void write_norm_csv(std::ostream& os, const std::vector<NormReport>& reports, const std::string& config_hash);

}  // namespace lsreg
