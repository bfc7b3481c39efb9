#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lsreg/mollifier.hpp"
#include "lsreg/weighted_norms.hpp"

namespace lsreg {

// ---------------------------------------------------------------------------
// Weighted Hardy inequality on (0, R) with power weights
// omega(t) = t^omega_exp, nu(t) = t^nu_exp.

struct HardyParams {
  double p = 2.0, q = 2.0;
  double R = 1.0;
  double omega_exp = 1.0;
  double nu_exp = 1.0;

  // omega(t) = t, nu(t) = t^{1 - 2 gamma}.
  static HardyParams radial(double gamma, double R = 1.0);
  // Throws IntegrabilityError unless nu^{1/(1-p)} is integrable at 0.
  void validate() const;
  // gamma of a radial pair, NaN otherwise.
  double radial_gamma() const;
};

double hardy_k(double p, double q);
// D for the radial pair with p = q = 2.
double hardy_D_closed(double gamma, double R);
// (int_r^R omega)^{1/q} (int_0^r nu^{1/(1-p)})^{(p-1)/p}
double hardy_D_functional(const HardyParams& hp, double r);

struct HardyBracket {
  double D = 0.0;         // grid maximization
  double D_closed = 0.0;  // NaN unless the radial pair with p = q = 2
  double rel_diff = 0.0;  // |D - D_closed| / D_closed
  double r_star = 0.0;    // maximizer
  double k = 0.0;
  double lower = 0.0, upper = 0.0;  // D and k D
};

HardyBracket hardy_bracket(const HardyParams& hp, int grid = 400);

// Test function with its primitive F(r) = int_0^r f.
struct HardyProfile {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> F;
  std::vector<double> breaks;  // discontinuities of f
};

// Random piecewise constants, monomials and truncated extremal profiles
// nu^{1/(1-p)} on (0, r) for r around the maximizer.
std::vector<HardyProfile> hardy_family(const HardyParams& hp, std::uint64_t seed = 1, int n_random = 16);

// LHS / RHS; NaN when the RHS vanishes or is infinite.
double hardy_ratio(const HardyParams& hp, const HardyProfile& f);

struct HardyEmpirical {
  double max_ratio = 0.0;
  std::string argmax;
  int evaluated = 0;
  int skipped = 0;
  std::vector<std::pair<std::string, double>> ratios;
};
HardyEmpirical hardy_empirical(const HardyParams& hp, const std::vector<HardyProfile>& family);

// ---------------------------------------------------------------------------
// Trace-type bound for sigma delta on a line.

struct TestField {
  std::string name;
  std::function<double(const Vec3&)> v;
  std::function<Vec3(const Vec3&)> grad;

  static TestField zero();
  static TestField gaussian(const Vec3& center, double width, double amplitude);
  // Sum of fields.
  static TestField sum(std::vector<TestField> parts, std::string name);
};

// Gaussians centered near the curve plus a linear term, seeded.
std::vector<TestField> random_test_fields(const Curve& curve, double R, int count, std::uint64_t seed);

// c(gamma) = gamma^{gamma-1} / (gamma+1)^{gamma+1}
double duality_constant(double gamma);

struct DualityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  double sigma_l2 = 0.0;
  double v_l2sq = 0.0;        // ||v||^2 on C(curve, R)
  double grad_weighted = 0.0; // ||grad v||^2 with d^{-2 gamma}
  bool holds() const { return lhs <= rhs; }
};

// Quadrature for C(curve, R) able to resolve d^{-2 gamma}.
RegionQuadrature duality_quadrature(const Curve& curve, double R, double gamma);

DualityResult delta_duality_bound(const Curve& curve, const LineDensity& sigma, const TestField& v,
                                  double gamma, double R, const RegionQuadrature& q);
DualityResult delta_duality_bound(const Curve& curve, const LineDensity& sigma, const TestField& v,
                                  double gamma, double R);

// ---------------------------------------------------------------------------
// Power weights of the distance to a set, sampled over cube families.

struct SingularSet {
  enum class Kind { Point, Line, Segment };
  Kind kind = Kind::Point;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::UnitZ();  // Line: a + t (b - a), t real

  static SingularSet point(const Vec3& p = Vec3::Zero());
  static SingularSet line(const Vec3& a = Vec3::Zero(), const Vec3& dir = Vec3::UnitZ());
  static SingularSet segment(const Vec3& a, const Vec3& b);

  double distance(const Vec3& x) const;
  double assouad_dim() const { return kind == Kind::Point ? 0.0 : 1.0; }
  std::string describe() const;
  // A point of the set and a unit vector orthogonal to it.
  Vec3 anchor() const;
  Vec3 normal() const;
};

struct Cube {
  Vec3 corner = Vec3::Zero();
  double edge = 1.0;
  std::string tag;  // on-set, off-set, random
  Vec3 center() const { return corner + Vec3::Constant(0.5 * edge); }
};

struct CubeFamily {
  std::vector<Cube> cubes;
  std::string strategy;
  double ell_min = 0.0, ell_max = 0.0;

  // Cubes centered on E, at dyadic distances 2l and 8l from E, and seeded
  // random cubes; edges ell_max 2^{-j}, j < octaves.
  static CubeFamily standard(const SingularSet& E, double ell_max, int octaves = 5, std::uint64_t seed = 1,
                             int n_random = 8);
  int octaves() const;
  // Throws DomainError unless >= 4 octaves and both intersecting and
  // disjoint cubes are present.
  void validate(const SingularSet& E) const;
};

// Averages of d(., E)^e over the cube for each exponent. Octree refinement
// toward E down to edge 2^{-level}; finest cells meeting E are dropped for
// negative exponents.
std::vector<double> cube_power_averages(const SingularSet& E, const Cube& Q, const std::vector<double>& exps,
                                        int level);

struct CubeValue {
  double scale = 0.0;
  int cube = 0;
  std::string tag;
  double value = 0.0;
};

struct CubeSupResult {
  std::vector<int> levels;
  std::vector<double> level_sups;   // sup at each refinement level
  std::vector<double> octave_sups;  // sup restricted to the coarsest 4, 5, ... octaves (finest level)
  double sup = 0.0;
  bool divergent = false;
  std::string verdict;  // bounded / unbounded
  std::vector<CubeValue> values;  // finest level
};

// sup over cubes of avg(w) avg(1/w) for w = d^{2 gamma}.
CubeSupResult muckenhoupt_a2(const SingularSet& E, double gamma, const CubeFamily& cubes,
                             std::vector<int> levels = {4, 5, 6, 7});

struct SWParams {
  int n = 3;
  double p = 1.5, q = 2.0;
  double alpha = 2.0;
  double tau = 1.05;
  double eta = 1.0;
  double dim_A = 1.0;

  double eta_star() const;
  double p_dual() const { return p / (p - 1.0); }
  // n/p - n/q < alpha
  bool alpha_condition() const;
  // Throws DomainError for 1 < p <= q, 0 < alpha < n, tau >= 1 violations.
  void validate() const;
};

double eta_star(int n, double p, double q, double alpha, double eta);

struct SWAnalytic {
  bool admissible = false;
  bool cond_alpha = false, cond_eta = false, cond_eta_star = false;
  double eta_lo = 0.0, eta_hi = 0.0;  // admissible open interval in eta
};
SWAnalytic sw_analytic(const SWParams& swp);

struct SWSupResult {
  SWParams params;
  SWAnalytic analytic;
  CubeSupResult numeric;
  bool agree = false;  // analytic admissible == numeric bounded
};

// Cube functional for w = d^{-eta}, v = d^{-eta*}.
SWSupResult sw_condition_sup(const SWParams& swp, const SingularSet& E, const CubeFamily& cubes,
                             std::vector<int> levels = {4, 5, 6, 7});

struct SWTestFunction {
  enum class Shape { BallIndicator, Bump };
  Shape shape = Shape::BallIndicator;
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
  std::string name;
  double operator()(const Vec3& y) const;
};

struct SWGrid {
  double domain = 4.0;  // outer integral over d(., E) < domain
  int depth = 12;       // cutoff at domain 2^{-depth}
  int n = 4;            // Gauss nodes per panel
  int n_dir = 8;        // angular resolution
  std::size_t budget = 50'000'000;  // inner evaluations
  SWGrid doubled() const;
};

struct SWRatio {
  std::string name;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  std::size_t evaluations = 0;
  bool skipped = false;
};

struct SWInequalityResult {
  double max_ratio = 0.0;
  std::vector<SWRatio> ratios;
  bool partial = false;  // budget exhausted before the family was done
};

// I_alpha f at x by ray quadrature.
double fractional_integral(const SWTestFunction& f, double alpha, const Vec3& x, int n_dir = 8);

SWRatio sw_inequality_ratio(const SWParams& swp, const SingularSet& E, const SWTestFunction& f,
                            const SWGrid& grid = {});
SWInequalityResult sw_inequality_mc(const SWParams& swp, const SingularSet& E,
                                    const std::vector<SWTestFunction>& family, const SWGrid& grid = {});

// Ratio for each cutoff depth toward E; grows without bound when the
// left-hand weight is not locally integrable.
std::vector<double> sw_ratio_refinement(const SWParams& swp, const SingularSet& E, const SWTestFunction& f,
                                        const SWGrid& grid, const std::vector<int>& depths);

// Indicators of balls of radius delta/4 at distance delta from E.
std::vector<SWTestFunction> translated_family(const SingularSet& E, const std::vector<double>& distances);

// Rows (scale, cube id, tag, local value).
void write_cube_csv(std::ostream& os, const CubeSupResult& r, const std::string& config_hash);
// One-line JSON summary; keys documented in the README.
std::string cube_summary_json(const std::string& checker, const CubeSupResult& r, const std::string& params_json);
std::string sw_summary_json(const SWSupResult& r, const SingularSet& E);

}  // namespace lsreg
