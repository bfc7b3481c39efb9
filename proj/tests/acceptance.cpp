// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lsreg/harness.hpp"
#include "lsreg/quadrature.hpp"

using namespace lsreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string f3(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

// ---------------------------------------------------------------------------

double bump_mass(int n, double rho) {
  if (n == 1)
    return integrate_adaptive([&](double x) { return scaled_bump_eval(1, rho, {x, 0.0}); }, -rho, rho, 1e-13);
  return integrate_adaptive([&](double r) { return 2 * kPi * r * scaled_bump_eval(2, rho, {r, 0.0}); }, 0.0, rho,
                            1e-13);
}

double bump_sup(int n, double rho, std::array<int, 2> beta) {
  double best = 0.0;
  const int m = n == 1 ? 2000 : 240;
  for (int i = 0; i < m; ++i) {
    double x = rho * (-1.0 + 2.0 * (i + 0.5) / m);
    if (n == 1) {
      best = std::max(best, std::abs(scaled_bump_deriv(1, rho, beta, {x, 0.0})));
      continue;
    }
    for (int j = 0; j < m; ++j) {
      double y = rho * (-1.0 + 2.0 * (j + 0.5) / m);
      if (x * x + y * y < rho * rho) best = std::max(best, std::abs(scaled_bump_deriv(2, rho, beta, {x, y})));
    }
  }
  return best;
}

Outcome c1_mollifier() {
  double worst_mass = 0.0, worst_scale = 0.0;
  for (int n : {1, 2}) {
    for (double rho : {1.0, 0.1, 0.01}) worst_mass = std::max(worst_mass, std::abs(bump_mass(n, rho) - 1.0));
    std::vector<std::array<int, 2>> betas{{0, 0}, {1, 0}, {2, 0}};
    if (n == 2) {
      betas.push_back({0, 1});
      betas.push_back({1, 1});
      betas.push_back({0, 2});
    }
    for (auto b : betas) {
      int k = b[0] + b[1];
      double ref = bump_sup(n, 1.0, b);
      for (double rho : {0.1, 0.01})
        worst_scale = std::max(worst_scale, std::abs(bump_sup(n, rho, b) * std::pow(rho, n + k) / ref - 1.0));
    }
  }
  return {worst_mass <= 1e-8 && worst_scale <= 0.01,
          "max |mass-1| " + f3(worst_mass) + ", max scaled-sup deviation " + f3(worst_scale)};
}

Outcome c2_hardy() {
  double worst_rel = 0.0, lo = 1e300, hi = 0.0;
  bool ok = true;
  for (double g : {0.25, 0.5, 0.75}) {
    auto hp = HardyParams::radial(g, 1.0);
    auto b = hardy_bracket(hp);
    auto e = hardy_empirical(hp, hardy_family(hp, 1, 16));
    worst_rel = std::max(worst_rel, b.rel_diff);
    double r = e.max_ratio / b.D;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ok = ok && b.rel_diff <= 5e-3 && e.max_ratio >= 0.9 * b.D && e.max_ratio <= b.k * b.D * 1.02;
  }
  return {ok, "max |D-D_closed|/D_closed " + f3(worst_rel) + ", empirical/D in [" + f3(lo) + ", " + f3(hi) + "]"};
}

Outcome c3_duality() {
  Curve c = Curve::segment(1.0, 0.25);
  double R = 0.25;
  auto fields = random_test_fields(c, R, 50, 7);
  std::vector<LineDensity> sigmas{LineDensity::constant(1.0), LineDensity::trigonometric(0.0, 1.0, kPi)};
  int cases = 0, bad = 0;
  double worst = 0.0;
  for (double g : {0.25, 0.5, 0.75}) {
    auto q = duality_quadrature(c, R, g);
    for (const auto& s : sigmas)
      for (const auto& f : fields) {
        auto r = delta_duality_bound(c, s, f, g, R, q);
        ++cases;
        if (!r.holds()) ++bad;
        if (r.rhs > 0) worst = std::max(worst, r.lhs / r.rhs);
      }
  }
  return {bad == 0 && cases == 300,
          std::to_string(cases) + " cases, " + std::to_string(bad) + " violations, max lhs/rhs " + f3(worst)};
}

Outcome c4_weak_convergence() {
  auto cfg = ExperimentConfig::from_config(Config{}, "weak-conv");
  auto r = run_weak_convergence(cfg);
  bool ok = true;
  double smin = 1e300;
  int count = 0;
  for (const char* f : {"one", "gauss_mid", "gauss_end", "poly", "trig"}) {
    ok = ok && r.monotone.at(f) && r.slope.at(f) >= 0.5;
    smin = std::min(smin, r.slope.at(f));
    ++count;
  }
  return {ok && count == 5 && cfg.ladder().size() == 5,
          std::to_string(count) + " fields monotone, min slope " + f3(smin) + " (green cross-check slope " +
              f3(r.slope.at("green")) + ")"};
}

Outcome c5_potential() {
  auto raw = Config::parse("[curve]\nlength = 1\nR0 = 0.25\n[domain]\nkind = ball\ncenter = 0,0,0.5\nradius = 1\n");
  auto cfg = ExperimentConfig::from_config(raw, "potential-eval");
  auto r = run_potential_eval(cfg);
  int interior = 0, boundary = 0;
  double dmin = 1e300;
  for (const auto& row : r.rows) {
    if (row.on_boundary) {
      ++boundary;
    } else {
      ++interior;
      dmin = std::min(dmin, row.d / r.rho);
    }
  }
  bool ok = interior == 20 && boundary == 20 && dmin >= 10.0 && r.max_rel_err < 1e-3 &&
            r.max_boundary_residual < 1e-3 && std::abs(r.rho - 0.25 / 8) < 1e-15;
  return {ok, "max rel err " + f3(r.max_rel_err) + " (min d/rho " + f3(dmin) + "), max |u+h| on sphere " +
                  f3(r.max_boundary_residual)};
}

std::string verdict_line(const SweepVerdict& v, bool iso) {
  char b[200];
  if (iso)
    std::snprintf(b, sizeof b, "k=%d g%+.2f:%s", v.cell.k(), v.cell.gamma, to_string(v.verdict).c_str());
  else
    std::snprintf(b, sizeof b, "(%d,%d) g%+.2f m%+.2f:%s/%s", v.cell.kperp, v.cell.ks, v.cell.gamma, v.cell.mu,
                  to_string(v.verdict).c_str(), to_string(v.predicted).c_str());
  return b;
}

Outcome c6_isotropic() {
  auto raw = Config::parse("[experiment]\nsteps = 6\ncells = 1:0:0.25:0 1:0:-0.25:0 0:0:-0.75:0 0:0:-1.25:0\n");
  auto cfg = ExperimentConfig::from_config(raw, "threshold-scan");
  auto s = run_threshold_scan(cfg);
  std::vector<Verdict> want{Verdict::Bounded, Verdict::Divergent, Verdict::Bounded, Verdict::Divergent};
  bool ok = s.mismatches == 0 && s.inconclusive == 0 && s.verdicts.size() == 4;
  std::string d;
  for (std::size_t i = 0; i < s.verdicts.size(); ++i) {
    ok = ok && s.verdicts[i].verdict == want[i];
    d += (i ? ", " : "") + verdict_line(s.verdicts[i], true) + " (slope " + f3(s.verdicts[i].slope) + ")";
  }
  return {ok, d + "; mismatches " + std::to_string(s.mismatches)};
}

Outcome c7_anisotropic() {
  auto raw = Config::parse(
      "[density]\nvariant = trig\na = 1\nb = 1\nomega = 3.14159265358979323846\n"
      "[experiment]\nsteps = 6\nisotropic = false\ncells = threshold\n");
  auto cfg = ExperimentConfig::from_config(raw, "threshold-scan");
  auto s = run_threshold_scan(cfg);
  int match = 0;
  std::string miss;
  for (const auto& v : s.verdicts) {
    if (v.verdict == v.predicted) {
      ++match;
    } else {
      miss += (miss.empty() ? "" : ", ") + verdict_line(v, false) + " slope " + f3(v.slope);
    }
  }
  return {match == 12 && s.verdicts.size() == 12,
          std::to_string(match) + "/12 cells match" + (miss.empty() ? "" : "; observed/predicted differ: " + miss)};
}

Outcome c8_regions() {
  auto cfg = ExperimentConfig::from_config(Config{}, "region-suite");
  auto s = run_region_suite(cfg);
  bool mid_ok = false;
  double mid_slope = 0.0;
  for (const auto& l : s.ladders)
    if (l.region == "mid" && l.cell.k() == 0 && l.cell.gamma == 0.0) {
      mid_ok = l.verdict == Verdict::Bounded;
      mid_slope = l.slope;
    }
  return {s.far_flat && mid_ok, "far flatness " + f3(s.far_flatness) + " (<= 0.02), mid k=0 slope " +
                                    f3(mid_slope) + (mid_ok ? " bounded" : " not bounded")};
}

Outcome c9_whitney() {
  std::size_t cubes = 0, viol = 0;
  int gap = 0;
  std::vector<TargetSet> sets{TargetSet::point(), TargetSet::segment(Vec3::Zero(), Vec3::UnitX()),
                              TargetSet::harmonic()};
  for (const auto& E : sets) {
    WhitneyBox box = WhitneyBox::around(E, 0.5);
    auto w = whitney_decompose(E, box, -static_cast<int>(std::lround(std::log2(box.edge))) + 8);
    cubes += w.cubes.size();
    viol += w.sandwich_violations;
    gap = std::max(gap, w.max_generation_gap);
  }
  double a0 = assouad_estimate(sets[0]).estimate;
  double a1 = assouad_estimate(sets[1]).estimate;
  double ah = assouad_estimate(sets[2]).estimate;
  double bh = box_dimension_estimate(sets[2]).estimate;
  bool ok = viol == 0 && gap <= 2 && std::abs(a0) <= 0.1 && std::abs(a1 - 1.0) <= 0.15 && ah >= 0.85 &&
            std::abs(bh - 0.5) <= 0.15;
  return {ok, std::to_string(cubes) + " cubes, " + std::to_string(viol) + " sandwich violations, max gap " +
                  std::to_string(gap) + "; assouad point " + f3(a0) + ", segment " + f3(a1) + ", harmonic " +
                  f3(ah) + "; box harmonic " + f3(bh)};
}

Outcome c10_sw_a2() {
  SWParams base;
  base.p = 1.1;
  base.q = 2.0;
  base.alpha = 2.0;
  base.tau = 1.05;
  bool ok = true;
  std::string d;
  auto run = [&](const SingularSet& E, const std::vector<std::pair<double, bool>>& etas) {
    auto cubes = CubeFamily::standard(E, 1.0, 5, 1, 8);
    for (auto [eta, admissible] : etas) {
      SWParams p = base;
      p.eta = eta;
      p.dim_A = E.assouad_dim();
      auto r = sw_condition_sup(p, E, cubes);
      ok = ok && r.analytic.admissible == admissible && r.agree;
      d += E.describe() + " eta " + f3(eta) + ":" + (r.analytic.admissible ? "adm" : "inadm") + "/" +
           r.numeric.verdict + ", ";
    }
  };
  run(SingularSet::line(), {{0.8, true}, {0.95, true}, {1.2, false}});
  run(SingularSet::point(), {{0.25, false}, {1.0, true}, {1.75, false}});
  auto seg = SingularSet::segment(Vec3::Zero(), Vec3::UnitZ());
  auto fam = CubeFamily::standard(seg, 0.25, 7, 1, 8);
  auto a05 = muckenhoupt_a2(seg, 0.5, fam);
  auto a12 = muckenhoupt_a2(seg, 1.2, fam);
  ok = ok && !a05.divergent && a12.divergent;
  d += "A2 gamma 0.5 sup " + f3(a05.sup) + " " + a05.verdict + ", gamma 1.2 sup " + f3(a12.sup) + " " + a12.verdict;
  return {ok, d};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> all{
      {1, "mollifier", 10, c1_mollifier},
      {2, "hardy-bracket", 30, c2_hardy},
      {3, "duality-bound", 120, c3_duality},
      {4, "weak-convergence", 120, c4_weak_convergence},
      {5, "potential-oracle", 300, c5_potential},
      {6, "isotropic-threshold", 900, c6_isotropic},
      {7, "anisotropic-threshold", 1800, c7_anisotropic},
      {8, "region-suite", 600, c8_regions},
      {9, "whitney-assouad", 300, c9_whitney},
      {10, "sw-a2-checkers", 600, c10_sw_a2},
  };
  int failed = 0;
  for (const auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double t = seconds_since(t0);
    bool in_time = t < c.budget;
    bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("C%-2d %s %-22s %s [%.1fs / %.0fs%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), t,
                c.budget, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed ? 1 : 0;
}
