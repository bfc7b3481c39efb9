#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lsreg/geometry.hpp"

namespace lsreg {

// Radial profile of the bump. Smooth is e^{1/(|x|^2-1)}; Unsquared is
// e^{1/(|x|-1)}, kept for comparison (it has a kink at the origin).
enum class BumpShape { Smooth, Unsquared };

// C_n such that the bump integrates to one over the unit ball of R^n.
double bump_normalization(int n, BumpShape shape = BumpShape::Smooth);

// phi_n at a point of R^n given as up to two coordinates (n = 1 uses x[0]).
double bump_eval(int n, const std::array<double, 2>& x, BumpShape shape = BumpShape::Smooth);
double scaled_bump_eval(int n, double rho, const std::array<double, 2>& x,
                        BumpShape shape = BumpShape::Smooth);
// Partial derivative D^beta phi_{n,rho}; beta = (b1, b2), b2 ignored for n = 1.
// Orders <= 2 analytic, 3..4 Richardson central differences with h = rho 1e-3.
double scaled_bump_deriv(int n, double rho, const std::array<int, 2>& beta,
                         const std::array<double, 2>& x, BumpShape shape = BumpShape::Smooth);

// phi_{1,rho}^{(k)}(u) for the tangential factor.
double phi1_deriv(double rho, int k, double u);
// Radial form of phi_{2,rho}: value and derivatives in r, orders 0..2.
double phi2_radial(double rho, int k, double r);

// sigma on [0, L] with derivatives.
class LineDensity {
 public:
  enum class Variant { Constant, Polynomial, Trigonometric, Tabulated };

  static LineDensity constant(double c);
  static LineDensity polynomial(std::vector<double> coeffs);  // sum c_i t^i
  // a + b sin(omega t + phase)
  static LineDensity trigonometric(double a, double b, double omega, double phase = 0.0);
  // Uniform table (t, sigma); cubic B-spline, smoothness capped at 2.
  static LineDensity tabulated(const std::vector<double>& t, const std::vector<double>& v);
  static LineDensity from_config(const Config& cfg, double L, const std::string& section = "density");

  Variant variant() const { return variant_; }
  int smoothness() const { return m_; }
  std::string describe() const;
  // sigma^{(l)}(t), no support handling.
  double deriv(int l, double t) const;
  double operator()(double t) const { return deriv(0, t); }
  // L^2 norm over [0, L].
  double l2_norm(double L) const;

 private:
  struct Table;
  Variant variant_ = Variant::Constant;
  int m_ = 16;
  std::vector<double> c_;
  double a_ = 0, b_ = 0, omega_ = 0, phase_ = 0;
  std::shared_ptr<const Table> table_;
};

enum class MollifierMode { Open, Periodic, Trimmed };

std::string to_string(MollifierMode m);

// beta = beta_perp + beta_s; perp counts derivatives along n and b.
struct MultiIndexSplit {
  int perp_n = 0;
  int perp_b = 0;
  int ks = 0;
  int k_perp() const { return perp_n + perp_b; }
  int k() const { return k_perp() + ks; }
};

// Which part of the anisotropic identity to evaluate.
enum class SigmaPart { Full, Regularized, BoundaryStart, BoundaryEnd };

class RegularizedSource {
 public:
  // kappa <= 0 picks the default trim factor for polygonal chains.
  RegularizedSource(Curve curve, LineDensity density, double rho,
                    std::optional<MollifierMode> mode = std::nullopt, double kappa = 0.0);

  const Curve& curve() const { return curve_; }
  const LineDensity& density() const { return density_; }
  double rho() const { return rho_; }
  MollifierMode mode() const { return mode_; }
  double kappa() const { return kappa_; }

  // Number of independent straight or smooth pieces (segments of a chain).
  int pieces() const;
  // Arc interval and window of piece i in its local parameter.
  double piece_length(int i) const;
  double piece_offset(int i) const;
  std::pair<double, double> window(int i) const;
  // Support of the tangential factor in local parameter.
  std::pair<double, double> support(int i) const;

  // Tangential factor S^{(k)} of piece i at local parameter s, by the
  // integration-by-parts identity (part selects the split).
  double tangential(int i, int k, double s, SigmaPart part = SigmaPart::Full) const;
  // Same quantity by direct differentiation of the kernel, for cross-checks.
  double tangential_direct(int i, int k, double s) const;

  // Density along the curve in global arc length, periodic or zero-extended.
  double sigma_global(int l, double s) const;

  // Straight pieces only: start point and fixed frame.
  struct Straight {
    Vec3 a;
    Frame f;
  };
  bool straight() const { return !straight_.empty(); }
  const Straight& straight_piece(int i) const { return straight_[i]; }
  // Piece containing global arc parameter s (trimmed chains), else 0.
  int piece_of(double s) const;

 private:
  Curve curve_;
  LineDensity density_;
  double rho_;
  MollifierMode mode_;
  double kappa_ = 1.0;
  std::vector<double> len_, off_;
  std::vector<Straight> straight_;
};

double sigma_rho_eval(const RegularizedSource& src, const CylCoords& c);
double sigma_rho_deriv(const RegularizedSource& src, const MultiIndexSplit& beta, const CylCoords& c,
                       SigmaPart part = SigmaPart::Full);
// sigma_rho at a Cartesian point (sums over chain pieces).
double sigma_rho_at(const RegularizedSource& src, const Vec3& y);
// Directional derivatives of sigma_rho at a Cartesian point along up to two
// fixed unit directions (empty = value).
double sigma_rho_cartesian_deriv(const RegularizedSource& src, const Vec3& y,
                                 const std::vector<Vec3>& dirs);

// Quadrature node over the support of sigma_rho.
struct SourceNode {
  Vec3 y;
  CylCoords c;
  int piece = 0;
  double w = 0.0;  // includes the tubular Jacobian
  double sigma = 0.0;
  Vec3 grad = Vec3::Zero();  // Cartesian gradient of sigma_rho, when requested
};

struct SourceQuadSpec {
  int n_r = 24;
  int n_theta = 16;
  int n_s = 0;  // 0: 64 L / rho capped at 4096
  double refine = 1.0;
  bool with_gradient = false;
};

// Tensor Gauss-Legendre nodes over C(curve, rho) restricted to the tangential
// support. When 'target' lies inside the support the s- and r-intervals are
// split at its coordinates.
std::vector<SourceNode> source_nodes(const RegularizedSource& src, const SourceQuadSpec& spec,
                                     const std::optional<Vec3>& target = std::nullopt);

enum class SigmaNormRegion { Cylinder, EndPiece, EndPieceExpanded };

struct SigmaNormResult {
  double value = 0.0;
  double predicted_exponent = 0.0;  // power of rho bounding the norm
  std::string condition;
};

// Weighted L^2 norm of D^beta sigma_rho (part selects the identity term).
// Cylinder: weight d^{2 eta} on C(curve, rho), needs eta > -1.
// EndPiece: weight d_e^{2 eta} on C_0^rho, needs eta > -3/2.
// EndPieceExpanded: same on the expanded piece C-bar_0^rho.
SigmaNormResult sigma_rho_weighted_norm(const RegularizedSource& src, const MultiIndexSplit& beta,
                                        double eta, SigmaNormRegion region,
                                        SigmaPart part = SigmaPart::Full, int n_r = 24,
                                        int n_s_per_rho = 8);

// Integral of sigma_rho, and of |sigma_rho|, over its support.
double sigma_rho_mass(const RegularizedSource& src, const SourceQuadSpec& spec = {});
double sigma_rho_l1_norm(const RegularizedSource& src, const SourceQuadSpec& spec = {});

}  // namespace lsreg
