#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lsreg/harness.hpp"

using namespace lsreg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lsreg_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("verdict rule") {
  CHECK(classify_slope(0.1) == Verdict::Bounded);
  CHECK(classify_slope(-0.05) == Verdict::Bounded);
  CHECK(classify_slope(-0.1) == Verdict::Inconclusive);
  CHECK(classify_slope(-0.2) == Verdict::Divergent);
  CHECK(classify_slope(-INFINITY) == Verdict::Divergent);
  std::vector<double> rho{1, 0.5, 0.25, 0.125}, n;
  for (double r : rho) n.push_back(std::pow(r, -0.3));
  CHECK(tail_slope(rho, n) == doctest::Approx(-0.3));
  n.back() = INFINITY;
  CHECK(std::isinf(tail_slope(rho, n)));
}

TEST_CASE("predicted verdicts") {
  double m;
  CHECK(predicted_verdict({1, 0, 0.25, 0}, true, &m) == Verdict::Bounded);
  CHECK(m == doctest::Approx(0.25));
  CHECK(predicted_verdict({1, 0, -0.25, 0}, true) == Verdict::Divergent);
  CHECK(predicted_verdict({0, 0, -0.75, 0}, true) == Verdict::Bounded);
  CHECK(predicted_verdict({0, 1, 0.5, 0.25}, false, &m) == Verdict::Divergent);
  CHECK(m == doctest::Approx(0.25));
  CHECK(predicted_verdict({0, 1, 0.5, 0.75}, false) == Verdict::Bounded);
  auto cells = anisotropic_threshold_cells();
  CHECK(cells.size() == 12);
  for (const auto& c : cells) {
    double mm;
    predicted_verdict(c, false, &mm);
    CHECK(mm == doctest::Approx(0.25));
  }
}

TEST_CASE("config parsing and ladder") {
  auto raw = Config::parse(
      "[curve]\nkind = segment\nlength = 2\nR0 = 0.5\n"
      "[experiment]\nbetas = 1:0 0:1\ngamma = -0.25, 0.25\nisotropic = false\nmu = 0.75\nsteps = 3\n");
  auto cfg = ExperimentConfig::from_config(raw, "threshold-scan");
  CHECK(cfg.cells.size() == 4);
  CHECK(cfg.rho0 == doctest::Approx(0.125));
  auto l = cfg.ladder();
  CHECK(l.size() == 4);
  for (std::size_t i = 1; i < l.size(); ++i) CHECK(l[i] == doctest::Approx(0.5 * l[i - 1]));
  cfg.validate();
  std::string h = cfg.hash();
  cfg.apply_overrides(7, 1, "");
  CHECK(cfg.seed == 7);
  CHECK(cfg.hash() != h);

  auto bad = Config::parse("[experiment]\nregions = near, nowhere\n");
  CHECK_THROWS_AS(ExperimentConfig::from_config(bad, "threshold-scan").validate(), DomainError);
  auto far = Config::parse("[experiment]\nregions = far\n");
  CHECK_THROWS_AS(ExperimentConfig::from_config(far, "threshold-scan").validate(), DomainError);
  auto suite = ExperimentConfig::from_config(Config{}, "region-suite");
  CHECK(suite.curve.R0() == doctest::Approx(1.0 / 32));
  CHECK(suite.ball.has_value());
  CHECK(suite.cells.size() == 6);
}

TEST_CASE("weak convergence outputs are deterministic") {
  auto cfg = ExperimentConfig::from_config(Config::parse("[experiment]\nsteps = 3\n"), "weak-conv");
  auto a = scratch("wc_a"), b = scratch("wc_b");
  cfg.out = a;
  auto r = run_weak_convergence(cfg);
  CHECK(r.pass);
  CHECK(r.slope.at("one") == doctest::Approx(1.0).epsilon(1e-3));
  cfg.out = b;
  run_weak_convergence(cfg);
  std::string csv = slurp(a / "weak_conv.csv");
  CHECK(csv == slurp(b / "weak_conv.csv"));
  CHECK(fs::exists(a / "weak_conv.meta.json"));
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line.find("config_hash") != std::string::npos);
  while (std::getline(lines, line)) CHECK(line.substr(line.rfind(',') + 1) == cfg.hash());
}

TEST_CASE("non-integrable weights give a divergent verdict without quadrature work") {
  auto raw = Config::parse(
      "[experiment]\nbetas = 0:0\ngamma = -1.25\nregions = near\nsteps = 2\n"
      "[quadrature]\nn = 2\ndepth = 1\nn_theta = 4\n");
  auto cfg = ExperimentConfig::from_config(raw, "threshold-scan");
  auto s = run_threshold_scan(cfg);
  REQUIRE(s.verdicts.size() == 1);
  CHECK(s.verdicts[0].verdict == Verdict::Divergent);
  CHECK(s.verdicts[0].predicted == Verdict::Divergent);
  CHECK(s.verdicts[0].note.find("not integrable") != std::string::npos);
  CHECK(s.mismatches == 0);
}

TEST_CASE("whitney-dump and assouad write CSV with sidecars") {
  auto raw = Config::parse("[set]\nkind = segment\n[whitney]\nk_max = 5\n");
  auto cfg = ExperimentConfig::from_config(raw, "whitney-dump");
  cfg.out = scratch("wd");
  auto w = run_whitney_dump(cfg);
  CHECK(w.whitney.sandwich_violations == 0);
  CHECK(fs::exists(cfg.out / "whitney_cubes.csv"));
  CHECK(fs::exists(cfg.out / "whitney_census.csv"));
  CHECK(slurp(cfg.out / "whitney_dump.meta.json").find(cfg.hash()) != std::string::npos);
  cfg.command = "assouad";
  auto a = run_assouad(cfg);
  CHECK(std::abs(a.assouad.estimate - 1.0) <= 0.15);
  CHECK(fs::exists(cfg.out / "assouad.csv"));
  CHECK(fs::exists(cfg.out / "box_dimension.csv"));
}

TEST_CASE("potential evaluation against the truncated-segment oracle") {
  auto raw = Config::parse("[potential]\ncount = 5\nsphere_count = 5\n");
  auto cfg = ExperimentConfig::from_config(raw, "potential-eval");
  auto r = run_potential_eval(cfg);
  CHECK(r.rows.size() == 10);
  CHECK(r.max_rel_err < 1e-3);
  CHECK(r.max_boundary_residual < 1e-3);
  for (const auto& row : r.rows)
    if (!row.on_boundary) CHECK(row.d >= 10 * r.rho);
}
