#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsreg/config.hpp"
#include "lsreg/inequalities.hpp"
#include "lsreg/potential.hpp"
#include "lsreg/weighted_norms.hpp"
#include "lsreg/whitney.hpp"

namespace lsreg {

// One (beta, gamma, mu) cell of a threshold scan. In isotropic scans only
// the total order kperp + ks matters and mu is ignored.
struct ScanCell {
  int kperp = 0, ks = 0;
  double gamma = 0.0, mu = 0.0;
  int k() const { return kperp + ks; }
};

struct ExperimentConfig {
  Config raw;
  std::string command;
  Curve curve = Curve::segment(1.0, 0.25);
  LineDensity density = LineDensity::constant(1.0);
  MollifierMode mode = MollifierMode::Open;
  double rho0 = 0.0625;
  int steps = 4;  // ladder rho0 2^{-i}, i = 0 .. steps
  bool isotropic = true;
  std::vector<ScanCell> cells;
  std::vector<std::string> regions{"near", "mid", "caps"};
  std::optional<BallDomain> ball;
  QuadOptions quad;
  SourceQuadSpec source;
  int refine = 0;
  std::uint64_t seed = 1;
  std::filesystem::path out;

  // Command-dependent defaults, then [curve], [density], [experiment],
  // [quadrature] and [domain] keys.
  static ExperimentConfig from_config(const Config& cfg, const std::string& command);
  // Applies --seed / --refine / --out.
  void apply_overrides(std::optional<std::uint64_t> seed, std::optional<int> refine,
                       const std::string& out);
  std::vector<double> ladder() const;
  // Throws DomainError on an invalid ladder, empty grid or bad region name.
  void validate() const;
  // Hash of the effective configuration, carried by every CSV row.
  std::string hash() const;
};

// Twelve anisotropic cells: for each (kperp, ks) in {(0,1),(1,0),(1,1)},
// gamma = kperp - 1 +- offset at mu = ks, and mu = ks - 1/2 +- offset at gamma = 1/2.
std::vector<ScanCell> anisotropic_threshold_cells(double offset = 0.25);

// ---------------------------------------------------------------------------

enum class Verdict { Bounded, Divergent, Inconclusive };
std::string to_string(Verdict v);

// slope >= -0.05 bounded, <= -0.2 divergent, else inconclusive.
Verdict classify_slope(double slope);
// Log-log slope of norm against rho over the last three ladder points.
double tail_slope(const std::vector<double>& rho, const std::vector<double>& norm);

struct SweepVerdict {
  ScanCell cell;
  bool isotropic = true;
  std::vector<double> rho, norm;
  std::map<std::string, std::vector<double>> region_norm;
  double slope = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  Verdict predicted = Verdict::Inconclusive;
  double margin = 0.0;  // distance from the nearest threshold
  std::string note;
  bool decisive() const { return margin >= 0.25 - 1e-12; }
  bool mismatch() const { return decisive() && verdict != Verdict::Inconclusive && verdict != predicted; }
};

// Predicted verdict: isotropic gamma > k - 1; anisotropic gamma > kperp - 1
// and mu > ks - 1/2.
Verdict predicted_verdict(const ScanCell& c, bool isotropic, double* margin = nullptr);

// Quadrature of one region with u (plus the ball corrector) evaluated at
// every node.
struct RegionJets {
  RegionQuadrature quad;
  std::vector<Jet> jets;
};

struct LadderLevel {
  double rho = 0.0;
  std::vector<RegionJets> regions;
  std::size_t nodes() const;
};

// Jets per ladder level, computed on first use and shared by every cell.
class JetCache {
 public:
  explicit JetCache(const ExperimentConfig& cfg);
  const LadderLevel& level(std::size_t i);
  std::size_t size() const { return rho_.size(); }
  double rho(std::size_t i) const { return rho_.at(i); }

 private:
  const ExperimentConfig& cfg_;
  QuadOptions quad_;
  std::vector<double> rho_;
  std::map<std::size_t, LadderLevel> levels_;
};

// Region specs for one ladder level.
std::vector<RegionSpec> scan_regions(const ExperimentConfig& cfg, double rho);

// Squared weighted norm of a cell over one region; +inf for non-integrable weights.
double cell_region_norm2(const RegionJets& r, const ScanCell& c, bool isotropic, std::string* why = nullptr);

struct ThresholdScan {
  std::vector<SweepVerdict> verdicts;
  int mismatches = 0;
  int inconclusive = 0;
  int undecided = 0;  // cells closer than 0.25 to a threshold
  double seconds = 0.0;
};

ThresholdScan run_threshold_scan(const ExperimentConfig& cfg);
ThresholdScan run_threshold_scan(const ExperimentConfig& cfg, JetCache& cache);

struct RegionLadder {
  std::string region;
  ScanCell cell;
  std::vector<double> rho, norm;
  double slope = 0.0;
  double flatness = 0.0;  // max / min - 1
  Verdict verdict = Verdict::Inconclusive;
};

struct RegionSuite {
  std::vector<RegionLadder> ladders;
  double far_flatness = 0.0;  // worst over far ladders, 0 without a far region
  bool far_flat = true;       // within 2%
  double seconds = 0.0;
};

// Default cells: every split up to order 2 at gamma = mu = 0.
RegionSuite run_region_suite(const ExperimentConfig& cfg);

// Built-in smooth test fields for the weak convergence check.
struct SmoothField {
  std::string name;
  std::function<double(const Vec3&)> v;
};
std::vector<SmoothField> weak_conv_fields(const Curve& curve);

struct WeakConvRow {
  std::string field;
  double rho = 0.0;
  double mollified = 0.0, limit = 0.0, error = 0.0;
};

struct WeakConvResult {
  std::vector<WeakConvRow> rows;
  std::map<std::string, double> slope;
  std::map<std::string, bool> monotone;
  bool pass = true;  // every field monotone with slope >= 0.5
  double seconds = 0.0;
};

WeakConvResult run_weak_convergence(const ExperimentConfig& cfg);

struct PotentialRow {
  Vec3 x = Vec3::Zero();
  double d = 0.0;
  double u = 0.0;
  double oracle = std::numeric_limits<double>::quiet_NaN();
  double rel_err = std::numeric_limits<double>::quiet_NaN();
  double corrector = std::numeric_limits<double>::quiet_NaN();
  bool on_boundary = false;
};

struct PotentialResult {
  double rho = 0.0;
  std::vector<PotentialRow> rows;
  double max_rel_err = 0.0;         // interior points with an oracle
  double max_boundary_residual = 0.0;  // |u + corrector| on the sphere
  double seconds = 0.0;
};

// Points with d >= min_distance * rho, seeded.
std::vector<Vec3> far_points(const Curve& curve, double rho, double min_distance, int count, std::uint64_t seed);
std::vector<Vec3> sphere_points(const BallDomain& dom, int count, std::uint64_t seed);

// Truncated-segment oracle for constant density on a canonical segment;
// [potential] points = <csv> replaces the generated points.
PotentialResult run_potential_eval(const ExperimentConfig& cfg);

struct InequalitySuite {
  std::vector<std::pair<double, HardyBracket>> hardy;
  std::vector<std::pair<double, HardyEmpirical>> hardy_emp;
  int duality_cases = 0, duality_violations = 0;
  double duality_min_margin = 0.0;
  std::vector<std::pair<double, CubeSupResult>> a2;
  std::vector<SWSupResult> sw;
  std::vector<std::string> sw_sets;  // "line" or "point" per entry
  bool pass = true;
  double seconds = 0.0;
};

InequalitySuite run_inequality_suite(const ExperimentConfig& cfg);

// [set] section: kind = point | cloud | segment | harmonic | curve.
TargetSet target_set_from_config(const Config& cfg, const std::string& section = "set");

struct AssouadRun {
  TargetSet set = TargetSet::point();
  AssouadReport assouad;
  BoxDimensionReport box;
  double seconds = 0.0;
};
AssouadRun run_assouad(const ExperimentConfig& cfg);

struct WhitneyRun {
  TargetSet set = TargetSet::point();
  WhitneyResult whitney;
  std::vector<GenerationCensus> census;
  double seconds = 0.0;
};
WhitneyRun run_whitney_dump(const ExperimentConfig& cfg);

// Writes <out>/<name>.meta.json next to a CSV: command, config hash,
// seed, refine, file list and a summary object (JSON text).
void write_sidecar(const ExperimentConfig& cfg, const std::string& name, const std::vector<std::string>& files,
                   const std::string& summary_json);

}  // namespace lsreg
