#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "lsreg/geometry.hpp"

namespace lsreg {

// Compact target set in R^3 with an exact distance evaluator (within the
// sample spacing for sampled curves).
class TargetSet {
 public:
  enum class Kind { FinitePointCloud, Segment, SampledCurve, HarmonicSequence };

  static TargetSet point_cloud(std::vector<Vec3> pts);
  static TargetSet point(const Vec3& p = Vec3::Zero());
  static TargetSet segment(const Vec3& a, const Vec3& b);
  // Polyline through arc-length samples of the curve with the given spacing.
  static TargetSet sampled_curve(const Curve& curve, double spacing);
  // {0} u {1/n : n >= 1} placed at origin + t dir.
  static TargetSet harmonic(const Vec3& origin = Vec3::Zero(), const Vec3& dir = Vec3::UnitX());

  Kind kind() const { return kind_; }
  std::string describe() const;
  double distance(const Vec3& x) const;
  // Distance from the closed box [lo, hi] to the set.
  double box_distance(const Vec3& lo, const Vec3& hi) const;
  void bounding_box(Vec3& lo, Vec3& hi) const;
  double diameter() const;
  // Sample spacing of the representation; 0 for exact descriptors.
  double resolution() const { return resolution_; }
  // Points of E within B(x, R), every point of E within h of the list.
  std::vector<Vec3> samples(const Vec3& x, double R, double h) const;
  // Representative points of E used as ball centers.
  std::vector<Vec3> anchors(int max_count = 8) const;

 private:
  Kind kind_ = Kind::FinitePointCloud;
  std::vector<Vec3> pts_;
  Vec3 a_ = Vec3::Zero(), b_ = Vec3::Zero();
  double resolution_ = 0.0;
};

struct WhitneyCube {
  int k = 0;  // edge 2^{-k}
  Vec3 corner = Vec3::Zero();
  double edge = 1.0;
  double dist = 0.0;  // d(Q, E)
};

struct WhitneyBox {
  Vec3 corner = Vec3::Zero();
  double edge = 1.0;  // power of two
  // Smallest power-of-two cube containing E with the given margin.
  static WhitneyBox around(const TargetSet& E, double margin);
};

struct WhitneyResult {
  std::vector<WhitneyCube> cubes;
  WhitneyBox box;
  int k_min = 0, k_max = 0;
  double box_volume = 0.0;
  double covered_volume = 0.0;
  double uncovered_volume = 0.0;
  bool truncated = false;          // k_max reached with uncovered cells
  std::size_t sandwich_violations = 0;
  int max_generation_gap = 0;      // over touching pairs
};

// Recursive dyadic selection: a cell Q is kept once d(Q, E) >= sqrt(3) l(Q).
WhitneyResult whitney_decompose(const TargetSet& E, const WhitneyBox& box, int k_max);

// sqrt(3) l <= d(Q, E) <= 4 sqrt(3) l
bool whitney_sandwich(const WhitneyCube& q);

struct GenerationCensus {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  int k_min = 0;
  std::vector<long> counts;  // counts[k - k_min]
  long count(int k) const;
};

// Cubes of each generation contained in B(x, R).
GenerationCensus generation_census(const WhitneyResult& w, const Vec3& x, double R);
// Slope of log2 W_k against k over generations k >= k_from with W_k > 0.
double census_slope(const GenerationCensus& c, int k_from);

// Greedy farthest-point covering of E n B(x, R) by balls of radius r
// centered on E. Throws ResolutionError when the set representation is
// coarser than r.
long covering_number(const TargetSet& E, const Vec3& x, double R, double r);

struct AssouadOptions {
  // Ball radii as fractions of diam(E); empty picks 2^{-2} ... 2^{-7}.
  std::vector<double> radii;
  int r_from = 2;  // r = R 2^{-j}, j = r_from .. r_to
  int r_to = 6;
  int anchors = 8;
};

struct AssouadRow {
  int anchor = 0;
  Vec3 x = Vec3::Zero();
  double R = 0.0;
  std::vector<double> r;
  std::vector<long> N;
  double slope = 0.0;
};

struct AssouadReport {
  double estimate = 0.0;  // max slope
  double min_slope = 0.0;
  double spread = 0.0;
  int octaves = 0;
  bool low_confidence = false;  // fewer than 3 octaves of r
  std::string policy;
  std::vector<AssouadRow> rows;
};

AssouadReport assouad_estimate(const TargetSet& E, const AssouadOptions& opt = {});

struct BoxDimensionReport {
  double estimate = 0.0;
  std::vector<double> r;
  std::vector<long> N;
};
// Slope of log N_r(E) against log(1/r) for r = diam 2^{-j}, j = j_from .. j_to.
BoxDimensionReport box_dimension_estimate(const TargetSet& E, int j_from = 4, int j_to = 12);

void write_cubes_csv(std::ostream& os, const WhitneyResult& w, const std::string& config_hash);
void write_census_csv(std::ostream& os, const std::vector<GenerationCensus>& c, const std::string& config_hash);
void write_assouad_csv(std::ostream& os, const AssouadReport& a, const std::string& config_hash);

}  // namespace lsreg
