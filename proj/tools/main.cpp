#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "lsreg/harness.hpp"

using namespace lsreg;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> refine;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key-value config file");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--refine", c.refine, "quadrature refinement level");
}

ExperimentConfig load(const Common& c, const std::string& command) {
  Config raw = c.config.empty() ? Config{} : Config::load(c.config);
  auto cfg = ExperimentConfig::from_config(raw, command);
  cfg.apply_overrides(c.seed, c.refine, c.out);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsreg: regularized line-source experiments"};
  app.require_subcommand(1);
  Common common;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"weak-conv", "weak convergence of the mollified source"},
      {"threshold-scan", "gamma/mu threshold scan over a rho ladder"},
      {"region-suite", "per-region norm ladders"},
      {"inequalities", "Hardy, duality, A2 and Sawyer-Wheeden checks"},
      {"assouad", "Assouad and box dimension estimates"},
      {"whitney-dump", "Whitney decomposition and generation census"},
      {"potential-eval", "potential and ball corrector at points"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), common);
  CLI11_PARSE(app, argc, argv);

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    ExperimentConfig cfg = load(common, cmd);
    int rc = 0;
    if (cmd == "weak-conv") {
      auto r = run_weak_convergence(cfg);
      for (const auto& [f, s] : r.slope)
        std::printf("%-10s slope %.3f monotone %d\n", f.c_str(), s, static_cast<int>(r.monotone[f]));
      rc = r.pass ? 0 : 1;
    } else if (cmd == "threshold-scan") {
      auto r = run_threshold_scan(cfg);
      for (const auto& v : r.verdicts)
        std::printf("k_perp %d k_s %d gamma %+.3f mu %+.3f slope %+.4f %-12s predicted %-9s%s\n", v.cell.kperp,
                    v.cell.ks, v.cell.gamma, v.cell.mu, v.slope, to_string(v.verdict).c_str(),
                    to_string(v.predicted).c_str(), v.mismatch() ? "  MISMATCH" : "");
      std::printf("mismatches %d inconclusive %d undecided %d\n", r.mismatches, r.inconclusive, r.undecided);
      rc = r.mismatches || r.inconclusive ? 1 : 0;
    } else if (cmd == "region-suite") {
      auto r = run_region_suite(cfg);
      for (const auto& l : r.ladders)
        std::printf("%-10s k_perp %d k_s %d slope %+.4f flatness %.4f %s\n", l.region.c_str(), l.cell.kperp,
                    l.cell.ks, l.slope, l.flatness, to_string(l.verdict).c_str());
      std::printf("far flatness %.4f (%s)\n", r.far_flatness, r.far_flat ? "flat" : "not flat");
      rc = r.far_flat ? 0 : 1;
    } else if (cmd == "inequalities") {
      auto r = run_inequality_suite(cfg);
      std::printf("duality %d cases, %d violations\n", r.duality_cases, r.duality_violations);
      for (const auto& [g, a] : r.a2) std::printf("A2 gamma %.3f sup %.4g %s\n", g, a.sup, a.verdict.c_str());
      for (std::size_t i = 0; i < r.sw.size(); ++i)
        std::printf("SW %-5s eta %.3f admissible %d numeric %s\n", r.sw_sets[i].c_str(), r.sw[i].params.eta,
                    static_cast<int>(r.sw[i].analytic.admissible), r.sw[i].numeric.verdict.c_str());
      rc = r.pass ? 0 : 1;
    } else if (cmd == "assouad") {
      auto r = run_assouad(cfg);
      std::printf("%s: assouad %.4f (spread %.4f%s) box %.4f\n", r.set.describe().c_str(), r.assouad.estimate,
                  r.assouad.spread, r.assouad.low_confidence ? ", low confidence" : "", r.box.estimate);
    } else if (cmd == "whitney-dump") {
      auto r = run_whitney_dump(cfg);
      std::printf("%zu cubes, %zu sandwich violations, max generation gap %d, uncovered %.3g%s\n",
                  r.whitney.cubes.size(), r.whitney.sandwich_violations, r.whitney.max_generation_gap,
                  r.whitney.uncovered_volume, r.whitney.truncated ? " (truncated)" : "");
      rc = r.whitney.sandwich_violations ? 1 : 0;
    } else if (cmd == "potential-eval") {
      auto r = run_potential_eval(cfg);
      std::printf("rho %.6g: max rel err %.3e, max boundary residual %.3e\n", r.rho, r.max_rel_err,
                  r.max_boundary_residual);
    }
    std::printf("outputs in %s\n", cfg.out.string().c_str());
    return rc;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lsreg %s: %s\n", cmd.c_str(), e.what());
    return 2;
  }
}
