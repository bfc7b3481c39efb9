#pragma once

#include <array>
#include <memory>
#include <ostream>
#include <vector>

#include "lsreg/mollifier.hpp"

namespace lsreg {

// Counts of Cartesian x-derivatives along the three axes.
using Multi3 = std::array<int, 3>;

// Gamma(x - y) = -1 / (4 pi |x - y|). With this sign Delta(Gamma * f) = f.
double gamma_eval(const Vec3& x, const Vec3& y);
// D^beta_x Gamma(x - y), |beta| <= 2.
double gamma_deriv(const Multi3& beta, const Vec3& x, const Vec3& y);
// Directional form: derivatives along the given unit vectors (at most two).
double gamma_dir(const std::vector<Vec3>& dirs, const Vec3& z);

// Potential of unit density on the axis segment from (0,0,a) to (0,0,b).
double exact_segment_potential(const Vec3& x, double a, double b);
inline double exact_segment_potential(const Vec3& x, double L) { return exact_segment_potential(x, 0.0, L); }

enum class Placement { Auto, Source, Kernel };

// u, its first and second derivatives in (r, s) for an axisymmetric source.
struct AxisymJet {
  double u = 0, ur = 0, us = 0, urr = 0, urs = 0, uss = 0;
};

namespace detail {
class TangentialTable;
}

// Straight-segment source: u depends on (r, s) only and is computed as a
// meridian-plane integral against ring kernels.
class AxisymSegmentEvaluator {
 public:
  explicit AxisymSegmentEvaluator(const RegularizedSource& src, double refine = 1.0);
  // order <= 2 fills the corresponding jet entries.
  AxisymJet jet(double r, double s, int order = 2) const;
  // Local coordinates of x relative to the segment axis.
  void local(const Vec3& x, double& r, double& theta, double& s) const;
  const RegularizedSource& source() const { return src_; }

 private:
  const RegularizedSource& src_;
  double refine_;
  Vec3 a_;
  Frame f_;
  std::shared_ptr<const detail::TangentialTable> table_;
  // transverse rules for targets far from the source disc (weights r phi and r^2 phi')
  std::vector<double> fa_r_, fa_w_, fb_r_, fb_w_;
};

// Ring kernels G_n = -(1/4pi) int cos(n t) / sqrt(A - B cos t) dt, n = 0, 1, 2.
std::array<double, 3> ring_kernels(double A, double B);

// Ring integrals for target radius r, source radius rp and axial offset
// z: I_n = int cos(n t) D^{-1/2}, J_n = int cos(n t) D^{-3/2} with
// D = r^2 + rp^2 + z^2 - 2 r rp cos t.
struct RingIntegrals {
  double I0, I1, J0, J1, J2;
};
RingIntegrals ring_integrals(double r, double rp, double z);

class PotentialEvaluator {
 public:
  // use_axisym selects the fast path for straight segments.
  PotentialEvaluator(const RegularizedSource& src, SourceQuadSpec spec = {}, bool use_axisym = true);

  const RegularizedSource& source() const { return src_; }
  const SourceQuadSpec& spec() const { return spec_; }
  bool axisymmetric() const { return axisym_ != nullptr; }
  const std::vector<SourceNode>& nodes() const { return nodes_; }

  // Directional derivative of u_rho^circ along up to two unit vectors.
  double eval(const Vec3& x, const std::vector<Vec3>& dirs, Placement p = Placement::Auto) const;
  // Value, gradient and Hessian at once.
  void eval_jet(const Vec3& x, double& u, Vec3& g, Eigen::Matrix3d& H) const;
  // Tensor-grid evaluation, bypassing the fast path.
  double eval_tensor(const Vec3& x, const std::vector<Vec3>& dirs, Placement p) const;

 private:
  const RegularizedSource& src_;
  SourceQuadSpec spec_;
  std::vector<SourceNode> nodes_;
  std::unique_ptr<AxisymSegmentEvaluator> axisym_;
};

// D^beta u_rho^circ with beta split along the frame at the projection of x.
double u_circ_eval(const PotentialEvaluator& ev, const Vec3& x, const MultiIndexSplit& beta,
                   Placement p = Placement::Auto);

struct CheckedValue {
  double value = 0.0;
  double refined = 0.0;
  bool converged = true;
};
// Evaluates with the base grid and a doubled grid.
CheckedValue u_circ_eval_checked(const RegularizedSource& src, const Vec3& x, const MultiIndexSplit& beta,
                                 double rel_tol = 1e-6, SourceQuadSpec spec = {});

// Batch evaluation in input order.
std::vector<double> u_circ_batch(const PotentialEvaluator& ev, const std::vector<Vec3>& xs,
                                 const MultiIndexSplit& beta, unsigned workers = 0);

struct BallDomain {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  // Throws DomainError unless B(curve, R0) lies strictly inside.
  void validate(const Curve& curve) const;
};

// h(x, y) = a / (4 pi |y - c| |x - y*|), y* the Kelvin image of y.
double ball_h(const BallDomain& dom, const Vec3& x, const Vec3& y);
// Directional x-derivatives of h.
double ball_h_dir(const BallDomain& dom, const std::vector<Vec3>& dirs, const Vec3& x, const Vec3& y);

// u_rho^partial(x) = int h(x, y) sigma_rho(y) dy.
double ball_green_corrector(const BallDomain& dom, const PotentialEvaluator& ev, const Vec3& x,
                            const std::vector<Vec3>& dirs = {});

// Corrector for a straight segment whose ball center lies on the segment
// axis: meridian quadrature against image rings.
class AxisymBallCorrector {
 public:
  AxisymBallCorrector(const RegularizedSource& src, const BallDomain& dom, double refine = 1.0);
  // u, u_r, u_s (order <= 1).
  AxisymJet jet(double r, double s, int order = 1) const;
  // Cartesian jet; Hessian by central differences of the gradient.
  void eval_jet(const Vec3& x, double& u, Vec3& g, Eigen::Matrix3d& H) const;
  static bool applicable(const RegularizedSource& src, const BallDomain& dom);

 private:
  struct Node {
    double rp, sp, w;
  };
  const RegularizedSource& src_;
  BallDomain dom_;
  double sc_ = 0.0;  // axial coordinate of the center
  std::vector<Node> nodes_;
};

// Reads x,y,z rows (header optional).
std::vector<Vec3> read_points_csv(const std::string& path);

}  // namespace lsreg
