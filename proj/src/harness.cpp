#include "lsreg/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "lsreg/quadrature.hpp"

namespace lsreg {

namespace {

using json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ';' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> colon_fields(const std::string& tok) {
  std::vector<double> v;
  std::stringstream ss(tok);
  std::string part;
  while (std::getline(ss, part, ':')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw DomainError("bad grid entry '" + tok + "'");
    }
  }
  return v;
}

MollifierMode parse_mode(const std::string& s) {
  if (s == "open") return MollifierMode::Open;
  if (s == "periodic") return MollifierMode::Periodic;
  if (s == "trimmed") return MollifierMode::Trimmed;
  throw DomainError("unknown mollifier mode: " + s);
}

void set_default(Config& c, const std::string& sec, const std::string& key, const std::string& value) {
  if (!c.has(sec, key)) c.set(sec, key, value);
}

std::string num(double v) { return fmt(v, 12); }

Vec3 vec3_or(const Config& c, const std::string& sec, const std::string& key, const Vec3& fallback) {
  auto v = c.get_list(sec, key);
  if (v.empty()) return fallback;
  if (v.size() != 3) throw DomainError("config " + sec + "." + key + ": expected 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& file) {
  std::filesystem::create_directories(cfg.out);
  std::ofstream os(cfg.out / file);
  if (!os) throw DomainError("cannot write " + (cfg.out / file).string());
  return os;
}

Vec3 bbox_center(const Curve& c, double& half_diag) {
  Vec3 lo = c.point(0.0), hi = lo;
  for (int i = 1; i <= 64; ++i) {
    Vec3 p = c.point(c.length() * i / 64.0);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  half_diag = 0.5 * (hi - lo).norm();
  return 0.5 * (lo + hi);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ScanCell> anisotropic_threshold_cells(double offset) {
  std::vector<ScanCell> out;
  for (auto [kp, ks] : std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {1, 1}}) {
    for (double sgn : {1.0, -1.0}) out.push_back({kp, ks, kp - 1.0 + sgn * offset, static_cast<double>(ks)});
    for (double sgn : {1.0, -1.0}) out.push_back({kp, ks, 0.5, ks - 0.5 + sgn * offset});
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_config(const Config& in, const std::string& command) {
  ExperimentConfig e;
  e.command = command;
  e.raw = in;
  Config& c = e.raw;

  // command defaults, recorded in the raw config so they enter the hash
  if (command == "region-suite") {
    set_default(c, "curve", "R0", num(c.get_double("curve", "length", 1.0) / 32.0));
    set_default(c, "experiment", "regions", "near, mid, caps, far");
    set_default(c, "experiment", "isotropic", "false");
    set_default(c, "experiment", "cells", "0:0:0:0 1:0:0:0 0:1:0:0 2:0:0:0 1:1:0:0 0:2:0:0");
    set_default(c, "domain", "kind", "ball");
  }
  if (command == "potential-eval") set_default(c, "domain", "kind", "ball");
  set_default(c, "curve", "kind", "segment");

  e.curve = Curve::from_config(c, "curve");
  double L = e.curve.length();
  e.density = LineDensity::from_config(c, L, "density");
  e.mode = parse_mode(c.get_string("experiment", "mode", e.curve.closed() ? "periodic" : "open"));
  e.rho0 = c.get_double("experiment", "rho0", e.curve.R0() / 4.0);
  e.steps = static_cast<int>(c.get_int("experiment", "steps", 4));
  e.isotropic = c.get_bool("experiment", "isotropic", true);

  std::string cells = c.get_string("experiment", "cells", "");
  if (cells == "threshold") {
    e.cells = anisotropic_threshold_cells(c.get_double("experiment", "offset", 0.25));
  } else if (!cells.empty()) {
    for (const auto& t : tokens(cells)) {
      auto f = colon_fields(t);
      if (f.size() != 4) throw DomainError("cell '" + t + "' must be kperp:ks:gamma:mu");
      e.cells.push_back({static_cast<int>(f[0]), static_cast<int>(f[1]), f[2], f[3]});
    }
  } else {
    std::vector<std::pair<int, int>> betas;
    for (const auto& t : tokens(c.get_string("experiment", "betas", "0:0 1:0"))) {
      auto f = colon_fields(t);
      if (f.size() != 2) throw DomainError("beta '" + t + "' must be kperp:ks");
      betas.emplace_back(static_cast<int>(f[0]), static_cast<int>(f[1]));
    }
    auto gammas = c.get_list("experiment", "gamma", {-1.25, -0.75, -0.25, 0.25});
    auto mus = c.get_list("experiment", "mu", {0.0});
    if (e.isotropic) mus = {0.0};
    for (auto [kp, ks] : betas)
      for (double g : gammas)
        for (double m : mus) e.cells.push_back({kp, ks, g, m});
  }

  e.regions = tokens(c.get_string("experiment", "regions", "near, mid, caps"));
  if (e.curve.closed()) e.regions.erase(std::remove(e.regions.begin(), e.regions.end(), "caps"), e.regions.end());

  std::string dom = c.get_string("domain", "kind", "none");
  if (dom == "ball") {
    double hd;
    Vec3 ctr = bbox_center(e.curve, hd);
    BallDomain b;
    b.center = vec3_or(c, "domain", "center", ctr);
    b.radius = c.get_double("domain", "radius", hd + 2.0 * e.curve.R0());
    e.ball = b;
  } else if (dom != "none") {
    throw DomainError("unknown domain kind: " + dom);
  }

  e.quad.n = static_cast<int>(c.get_int("quadrature", "n", 6));
  e.quad.n_theta = static_cast<int>(c.get_int("quadrature", "n_theta", 16));
  e.quad.depth = static_cast<int>(c.get_int("quadrature", "depth", 6));
  e.source.n_r = static_cast<int>(c.get_int("quadrature", "source_n_r", 24));
  e.source.n_theta = static_cast<int>(c.get_int("quadrature", "source_n_theta", 16));
  e.source.n_s = static_cast<int>(c.get_int("quadrature", "source_n_s", 0));
  e.refine = static_cast<int>(c.get_int("quadrature", "refine", 0));
  e.seed = static_cast<std::uint64_t>(c.get_int("experiment", "seed", 1));
  e.apply_overrides(std::nullopt, std::nullopt, c.get_string("experiment", "out", ""));
  return e;
}

void ExperimentConfig::apply_overrides(std::optional<std::uint64_t> s, std::optional<int> r, const std::string& o) {
  if (s) {
    seed = *s;
    raw.set("experiment", "seed", std::to_string(seed));
  }
  if (r) {
    refine = *r;
    raw.set("quadrature", "refine", std::to_string(refine));
  }
  if (!o.empty()) out = o;
  source.refine = 1.0 + refine;
}

std::vector<double> ExperimentConfig::ladder() const {
  std::vector<double> v;
  for (int i = 0; i <= steps; ++i) v.push_back(std::ldexp(rho0, -i));
  return v;
}

void ExperimentConfig::validate() const {
  if (!(rho0 > 0.0) || steps < 2) throw DomainError("ladder needs rho0 > 0 and at least 2 steps");
  if (rho0 > curve.R0()) throw TubularError("rho0 exceeds the tubular radius R0");
  if (cells.empty()) throw DomainError("empty (beta, gamma, mu) grid");
  for (const auto& c : cells)
    if (c.kperp < 0 || c.ks < 0 || c.k() > 2) throw UnsupportedOrderError("derivative order must be in 0..2");
  for (const auto& r : regions) {
    if (r != "near" && r != "mid" && r != "caps" && r != "far") throw DomainError("unknown region: " + r);
    if (r == "far" && !ball) throw DomainError("far region needs a [domain] ball");
  }
  if (ball) ball->validate(curve);
}

std::string ExperimentConfig::hash() const { return raw.hash(); }

// ---------------------------------------------------------------------------

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Bounded: return "bounded";
    case Verdict::Divergent: return "divergent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "";
}

Verdict classify_slope(double slope) {
  if (std::isnan(slope)) return Verdict::Inconclusive;
  if (slope >= -0.05) return Verdict::Bounded;
  if (slope <= -0.2) return Verdict::Divergent;
  return Verdict::Inconclusive;
}

double tail_slope(const std::vector<double>& rho, const std::vector<double>& norm) {
  if (rho.size() < 3 || rho.size() != norm.size()) throw DomainError("tail slope needs three ladder points");
  std::size_t n = rho.size();
  std::vector<double> x(rho.end() - 3, rho.end()), y(norm.begin() + (n - 3), norm.end());
  for (double v : y)
    if (!std::isfinite(v)) return -kInf;
  if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) return 0.0;
  for (double v : y)
    if (!(v > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return loglog_slope(x, y);
}

Verdict predicted_verdict(const ScanCell& c, bool isotropic, double* margin) {
  std::vector<double> gaps;  // value - threshold per condition
  if (isotropic) {
    gaps.push_back(c.gamma - (c.k() - 1.0));
  } else {
    gaps.push_back(c.gamma - (c.kperp - 1.0));
    gaps.push_back(c.mu - (c.ks - 0.5));
  }
  bool ok = std::all_of(gaps.begin(), gaps.end(), [](double g) { return g > 0.0; });
  double m;
  if (ok) {
    m = *std::min_element(gaps.begin(), gaps.end());
  } else {
    m = 0.0;
    for (double g : gaps)
      if (g <= 0.0) m = std::max(m, -g);
  }
  if (margin) *margin = m;
  return ok ? Verdict::Bounded : Verdict::Divergent;
}

std::size_t LadderLevel::nodes() const {
  std::size_t n = 0;
  for (const auto& r : regions) n += r.quad.nodes.size();
  return n;
}

std::vector<RegionSpec> scan_regions(const ExperimentConfig& cfg, double rho) {
  const Curve& c = cfg.curve;
  double L = c.length(), R0 = c.R0();
  std::vector<RegionSpec> out;
  for (const auto& r : cfg.regions) {
    if (r == "near") out.push_back(RegionSpec::cylinder(0.0, L, 0.0, 2.0 * rho, "near"));
    if (r == "mid") out.push_back(RegionSpec::cylinder(0.0, L, 2.0 * rho, R0, "mid"));
    if (r == "caps" && !c.closed()) {
      out.push_back(RegionSpec::cap(Region::CapStart, 0.0, R0, "cap_start"));
      out.push_back(RegionSpec::cap(Region::CapEnd, 0.0, R0, "cap_end"));
    }
    if (r == "far") out.push_back(RegionSpec::far(cfg.ball->center, cfg.ball->radius, R0, "far"));
  }
  return out;
}

JetCache::JetCache(const ExperimentConfig& cfg) : cfg_(cfg), rho_(cfg.ladder()) {
  cfg.validate();
  quad_ = cfg.quad;
  quad_.n += 2 * cfg.refine;
  quad_.depth += cfg.refine;
  quad_.axisymmetric = cfg.curve.kind() == CurveKind::Segment && cfg.mode != MollifierMode::Periodic;
  // resolve the most singular integrable weight of the grid
  double ma = 0.0, mb = 0.0;
  for (const auto& c : cfg.cells) {
    if (c.gamma > -1.0) ma = std::min(ma, c.gamma);
    if (!cfg.isotropic && c.mu > -1.5) mb = std::min(mb, c.mu);
  }
  quad_.min_a = ma;
  quad_.min_b = mb;
}

const LadderLevel& JetCache::level(std::size_t i) {
  auto it = levels_.find(i);
  if (it != levels_.end()) return it->second;
  LadderLevel lv;
  lv.rho = rho_.at(i);
  RegularizedSource src(cfg_.curve, cfg_.density, lv.rho, cfg_.mode);
  PotentialEvaluator ev(src, cfg_.source);
  std::unique_ptr<AxisymBallCorrector> axc;
  if (cfg_.ball && ev.axisymmetric() && AxisymBallCorrector::applicable(src, *cfg_.ball))
    axc = std::make_unique<AxisymBallCorrector>(src, *cfg_.ball, cfg_.source.refine);
  QuadOptions o = quad_;
  o.scale = lv.rho;
  for (const auto& spec : scan_regions(cfg_, lv.rho)) {
    RegionJets rj;
    rj.quad = region_quadrature(cfg_.curve, spec, o);
    const auto& nodes = rj.quad.nodes;
    rj.jets = parallel_map<Jet>(nodes.size(), [&](std::size_t k) {
      Jet j;
      ev.eval_jet(nodes[k].x, j.u, j.g, j.H);
      if (cfg_.ball) {
        double u;
        Vec3 g;
        Eigen::Matrix3d H;
        if (axc) {
          axc->eval_jet(nodes[k].x, u, g, H);
        } else {
          u = ball_green_corrector(*cfg_.ball, ev, nodes[k].x);
          for (int a = 0; a < 3; ++a) {
            g[a] = ball_green_corrector(*cfg_.ball, ev, nodes[k].x, {Vec3::Unit(a)});
            for (int b = a; b < 3; ++b)
              H(a, b) = H(b, a) = ball_green_corrector(*cfg_.ball, ev, nodes[k].x, {Vec3::Unit(a), Vec3::Unit(b)});
          }
        }
        j.u += u;
        j.g += g;
        j.H += H;
      }
      return j;
    });
    lv.regions.push_back(std::move(rj));
  }
  return levels_.emplace(i, std::move(lv)).first->second;
}

double cell_region_norm2(const RegionJets& r, const ScanCell& c, bool isotropic, std::string* why) {
  WeightSpec w{c.gamma, isotropic ? 0.0 : c.mu};
  Integrability ok = weight_integrability(w, 0.0, 0.0, r.quad);
  if (!ok.finite) {
    if (why) *why = "weight not integrable in " + r.quad.spec.name + ": " + ok.violated;
    return kInf;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < r.quad.nodes.size(); ++i) {
    const auto& n = r.quad.nodes[i];
    double dens = 0.0;
    if (isotropic) {
      for (int ks = 0; ks <= c.k(); ++ks) dens += split_density(r.jets[i], n.t, c.k() - ks, ks);
    } else {
      dens = split_density(r.jets[i], n.t, c.kperp, c.ks);
    }
    double wt = n.w;
    if (w.gamma != 0.0) wt *= std::pow(n.d, 2.0 * w.gamma);
    if (w.mu != 0.0 && std::isfinite(n.d_e)) wt *= std::pow(n.d_e, 2.0 * w.mu);
    sum += wt * dens;
  }
  return sum;
}

// ---------------------------------------------------------------------------

namespace {

std::string scan_summary_json(const ThresholdScan& s) {
  json j;
  j["cells"] = s.verdicts.size();
  j["mismatches"] = s.mismatches;
  j["inconclusive"] = s.inconclusive;
  j["undecided"] = s.undecided;
  json cells = json::array();
  for (const auto& v : s.verdicts) {
    cells.push_back({{"k_perp", v.cell.kperp},
                     {"k_s", v.cell.ks},
                     {"gamma", v.cell.gamma},
                     {"mu", v.cell.mu},
                     {"slope", std::isfinite(v.slope) ? json(v.slope) : json(nullptr)},
                     {"verdict", to_string(v.verdict)},
                     {"predicted", to_string(v.predicted)},
                     {"margin", v.margin}});
  }
  j["verdicts"] = cells;
  return j.dump();
}

std::string status_of(const SweepVerdict& v) {
  if (!v.decisive()) return "undecided";
  if (v.verdict == Verdict::Inconclusive) return "inconclusive";
  return v.mismatch() ? "mismatch" : "match";
}

}  // namespace

ThresholdScan run_threshold_scan(const ExperimentConfig& cfg) {
  JetCache cache(cfg);
  return run_threshold_scan(cfg, cache);
}

ThresholdScan run_threshold_scan(const ExperimentConfig& cfg, JetCache& cache) {
  double t0 = now_seconds();
  ThresholdScan res;
  std::vector<std::vector<double>> totals(cfg.cells.size());
  res.verdicts.resize(cfg.cells.size());
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    auto& v = res.verdicts[c];
    v.cell = cfg.cells[c];
    v.isotropic = cfg.isotropic;
    v.predicted = predicted_verdict(v.cell, cfg.isotropic, &v.margin);
  }
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const LadderLevel& lv = cache.level(i);
    for (auto& v : res.verdicts) {
      double tot = 0.0;
      for (const auto& r : lv.regions) {
        std::string why;
        double n2 = cell_region_norm2(r, v.cell, cfg.isotropic, &why);
        if (!why.empty()) v.note = why;
        v.region_norm[r.quad.spec.name].push_back(std::sqrt(n2));
        tot += n2;
      }
      v.rho.push_back(lv.rho);
      v.norm.push_back(std::sqrt(tot));
    }
  }
  for (auto& v : res.verdicts) {
    v.slope = tail_slope(v.rho, v.norm);
    v.verdict = classify_slope(v.slope);
    if (!v.decisive()) ++res.undecided;
    else if (v.verdict == Verdict::Inconclusive) ++res.inconclusive;
    else if (v.mismatch()) ++res.mismatches;
  }
  res.seconds = now_seconds() - t0;

  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "threshold_norms.csv");
    CsvWriter w(os, {"rho", "k_perp", "k_s", "gamma", "mu", "region", "norm"}, cfg.hash());
    for (const auto& v : res.verdicts)
      for (std::size_t i = 0; i < v.rho.size(); ++i) {
        for (const auto& [name, vals] : v.region_norm)
          w.row({fmt(v.rho[i]), std::to_string(v.cell.kperp), std::to_string(v.cell.ks), fmt(v.cell.gamma),
                 fmt(v.cell.mu), name, fmt(vals[i])});
        w.row({fmt(v.rho[i]), std::to_string(v.cell.kperp), std::to_string(v.cell.ks), fmt(v.cell.gamma),
               fmt(v.cell.mu), "total", fmt(v.norm[i])});
      }
    auto vs = open_out(cfg, "threshold_verdicts.csv");
    CsvWriter wv(vs, {"k_perp", "k_s", "gamma", "mu", "slope", "verdict", "predicted", "margin", "status", "note"},
                 cfg.hash());
    for (const auto& v : res.verdicts)
      wv.row({std::to_string(v.cell.kperp), std::to_string(v.cell.ks), fmt(v.cell.gamma), fmt(v.cell.mu),
              fmt(v.slope), to_string(v.verdict), to_string(v.predicted), fmt(v.margin), status_of(v),
              v.note});
    write_sidecar(cfg, "threshold_scan", {"threshold_norms.csv", "threshold_verdicts.csv"}, scan_summary_json(res));
  }
  return res;
}

// ---------------------------------------------------------------------------

RegionSuite run_region_suite(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  JetCache cache(cfg);
  RegionSuite res;
  std::vector<std::string> names;
  for (const auto& s : scan_regions(cfg, cfg.rho0)) names.push_back(s.name);
  for (const auto& name : names)
    for (const auto& c : cfg.cells) res.ladders.push_back({name, c, {}, {}, 0.0, 0.0, Verdict::Inconclusive});
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const LadderLevel& lv = cache.level(i);
    for (auto& l : res.ladders) {
      auto it = std::find_if(lv.regions.begin(), lv.regions.end(),
                             [&](const RegionJets& r) { return r.quad.spec.name == l.region; });
      l.rho.push_back(lv.rho);
      l.norm.push_back(std::sqrt(cell_region_norm2(*it, l.cell, cfg.isotropic)));
    }
  }
  for (auto& l : res.ladders) {
    l.slope = tail_slope(l.rho, l.norm);
    l.verdict = classify_slope(l.slope);
    auto [mn, mx] = std::minmax_element(l.norm.begin(), l.norm.end());
    l.flatness = *mn > 0.0 ? *mx / *mn - 1.0 : (*mx == 0.0 ? 0.0 : kInf);
    if (l.region == "far") {
      res.far_flatness = std::max(res.far_flatness, l.flatness);
      if (!(l.flatness <= 0.02)) res.far_flat = false;
    }
  }
  res.seconds = now_seconds() - t0;

  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "region_norms.csv");
    CsvWriter w(os, {"region", "rho", "k_perp", "k_s", "gamma", "mu", "norm"}, cfg.hash());
    for (const auto& l : res.ladders)
      for (std::size_t i = 0; i < l.rho.size(); ++i)
        w.row({l.region, fmt(l.rho[i]), std::to_string(l.cell.kperp), std::to_string(l.cell.ks), fmt(l.cell.gamma),
               fmt(l.cell.mu), fmt(l.norm[i])});
    auto vs = open_out(cfg, "region_verdicts.csv");
    CsvWriter wv(vs, {"region", "k_perp", "k_s", "gamma", "mu", "slope", "flatness", "verdict"}, cfg.hash());
    for (const auto& l : res.ladders)
      wv.row({l.region, std::to_string(l.cell.kperp), std::to_string(l.cell.ks), fmt(l.cell.gamma), fmt(l.cell.mu),
              fmt(l.slope), fmt(l.flatness), to_string(l.verdict)});
    json j;
    j["ladders"] = res.ladders.size();
    j["far_flatness"] = res.far_flatness;
    j["far_flat"] = res.far_flat;
    write_sidecar(cfg, "region_suite", {"region_norms.csv", "region_verdicts.csv"}, j.dump());
  }
  return res;
}

// ---------------------------------------------------------------------------

std::vector<SmoothField> weak_conv_fields(const Curve& curve) {
  double L = curve.length();
  double hd;
  Vec3 c = bbox_center(curve, hd);
  Frame f = curve.frame(0.5 * L);
  Vec3 p0 = curve.point(0.0);
  Vec3 x0 = curve.point(0.5 * L) + 0.5 * L * f.n;
  std::vector<SmoothField> out;
  out.push_back({"one", [](const Vec3&) { return 1.0; }});
  out.push_back({"gauss_mid", [c, f, L](const Vec3& x) {
                   Vec3 d = x - c - 0.1 * L * f.n;
                   return std::exp(-d.squaredNorm() / (0.09 * L * L));
                 }});
  out.push_back({"gauss_end", [p0, f, L](const Vec3& x) {
                   Vec3 d = x - p0 - 0.05 * L * f.b;
                   return std::exp(-d.squaredNorm() / (0.0625 * L * L));
                 }});
  out.push_back({"poly", [c, L](const Vec3& x) {
                   Vec3 q = (x - c) / L;
                   return 1.0 + q.x() - 0.5 * q.y() * q.z() + q.z() * q.z();
                 }});
  out.push_back({"trig", [c, L](const Vec3& x) {
                   Vec3 q = (x - c) / L;
                   return 1.0 + std::cos(2.0 * q.x()) * std::sin(kPi * q.z() + 0.3);
                 }});
  out.push_back({"green", [x0](const Vec3& y) { return gamma_eval(x0, y); }});
  return out;
}

WeakConvResult run_weak_convergence(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  WeakConvResult res;
  auto fields = weak_conv_fields(cfg.curve);
  double L = cfg.curve.length();
  std::vector<double> breaks;
  for (int i = 0; i <= 64; ++i) breaks.push_back(L * i / 64.0);
  Rule line = composite(breaks, 8);
  std::vector<double> limit(fields.size(), 0.0);
  for (std::size_t f = 0; f < fields.size(); ++f)
    for (std::size_t i = 0; i < line.size(); ++i)
      limit[f] += line.w[i] * cfg.density(line.x[i]) * fields[f].v(cfg.curve.point(line.x[i]));

  std::map<std::string, std::vector<double>> errs;
  auto ladder = cfg.ladder();
  for (double rho : ladder) {
    RegularizedSource src(cfg.curve, cfg.density, rho, cfg.mode);
    auto nodes = source_nodes(src, cfg.source);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      double acc = 0.0;
      for (const auto& n : nodes)
        if (n.sigma != 0.0) acc += n.w * n.sigma * fields[f].v(n.y);
      WeakConvRow row{fields[f].name, rho, acc, limit[f], std::abs(acc - limit[f])};
      errs[row.field].push_back(row.error);
      res.rows.push_back(row);
    }
  }
  for (const auto& f : fields) {
    const auto& e = errs[f.name];
    bool mono = true;
    for (std::size_t i = 1; i < e.size(); ++i) mono = mono && e[i] < e[i - 1];
    double s = loglog_slope(ladder, e);
    res.slope[f.name] = s;
    res.monotone[f.name] = mono;
    res.pass = res.pass && mono && s >= 0.5;
  }
  res.seconds = now_seconds() - t0;

  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "weak_conv.csv");
    CsvWriter w(os, {"field", "rho", "mollified", "limit", "error"}, cfg.hash());
    for (const auto& r : res.rows) w.row({r.field, fmt(r.rho), fmt(r.mollified), fmt(r.limit), fmt(r.error)});
    json j;
    j["pass"] = res.pass;
    json fs = json::object();
    for (const auto& f : fields) fs[f.name] = {{"slope", res.slope[f.name]}, {"monotone", res.monotone[f.name]}};
    j["fields"] = fs;
    write_sidecar(cfg, "weak_conv", {"weak_conv.csv"}, j.dump());
  }
  return res;
}

// ---------------------------------------------------------------------------

std::vector<Vec3> far_points(const Curve& curve, double rho, double min_distance, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double hd;
  Vec3 c = bbox_center(curve, hd);
  double ext = hd + min_distance * rho + 2.0 * curve.R0();
  std::uniform_real_distribution<double> u(-ext, ext);
  std::vector<Vec3> out;
  for (int tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > 1000 * count) throw DomainError("cannot place points at the requested distance");
    Vec3 x = c + Vec3(u(rng), u(rng), u(rng));
    if (project_and_distance(curve, x, curve.R0()).d >= min_distance * rho) out.push_back(x);
  }
  return out;
}

std::vector<Vec3> sphere_points(const BallDomain& dom, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < count) {
    Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() < 1e-8) continue;
    out.push_back(dom.center + dom.radius * v.normalized());
  }
  return out;
}

PotentialResult run_potential_eval(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  PotentialResult res;
  const Config& c = cfg.raw;
  res.rho = c.get_double("potential", "rho", cfg.curve.R0() / 8.0);
  RegularizedSource src(cfg.curve, cfg.density, res.rho, cfg.mode);
  SourceQuadSpec spec = cfg.source;
  PotentialEvaluator ev(src, spec);

  std::vector<Vec3> pts;
  std::string file = c.get_string("potential", "points", "");
  if (!file.empty()) {
    pts = read_points_csv(file);
  } else {
    pts = far_points(cfg.curve, res.rho, c.get_double("potential", "min_distance", 10.0),
                     static_cast<int>(c.get_int("potential", "count", 20)), cfg.seed);
  }
  // straight segment with constant density: potential of the mollifier window
  bool oracle = cfg.curve.kind() == CurveKind::Segment && cfg.density.variant() == LineDensity::Variant::Constant &&
                cfg.mode != MollifierMode::Periodic;
  Vec3 a = cfg.curve.point(0.0), t = cfg.curve.tangent(0.0);
  auto [w0, w1] = src.window(0);
  auto exact = [&](const Vec3& x) {
    double z = (x - a).dot(t);
    double r = (x - a - z * t).norm();
    return cfg.density(0.0) * exact_segment_potential(Vec3(r, 0.0, z), w0, w1);
  };
  std::unique_ptr<AxisymBallCorrector> axc;
  if (cfg.ball && ev.axisymmetric() && AxisymBallCorrector::applicable(src, *cfg.ball))
    axc = std::make_unique<AxisymBallCorrector>(src, *cfg.ball, spec.refine);
  auto corrector = [&](const Vec3& x) {
    if (axc) {
      double u;
      Vec3 g;
      Eigen::Matrix3d H;
      axc->eval_jet(x, u, g, H);
      return u;
    }
    return ball_green_corrector(*cfg.ball, ev, x);
  };
  auto eval_rows = [&](const std::vector<Vec3>& xs, bool boundary) {
    auto rows = parallel_map<PotentialRow>(xs.size(), [&](std::size_t i) {
      PotentialRow r;
      r.x = xs[i];
      r.on_boundary = boundary;
      r.d = project_and_distance(cfg.curve, xs[i], cfg.curve.R0()).d;
      r.u = ev.eval(xs[i], {});
      if (oracle) {
        r.oracle = exact(xs[i]);
        r.rel_err = std::abs(r.u - r.oracle) / std::abs(r.oracle);
      }
      if (cfg.ball) r.corrector = corrector(xs[i]);
      return r;
    });
    res.rows.insert(res.rows.end(), rows.begin(), rows.end());
  };
  eval_rows(pts, false);
  if (cfg.ball) eval_rows(sphere_points(*cfg.ball, static_cast<int>(c.get_int("potential", "sphere_count", 20)),
                                        cfg.seed + 1),
                          true);
  for (const auto& r : res.rows) {
    if (!r.on_boundary && oracle) res.max_rel_err = std::max(res.max_rel_err, r.rel_err);
    if (r.on_boundary) res.max_boundary_residual = std::max(res.max_boundary_residual, std::abs(r.u + r.corrector));
  }
  res.seconds = now_seconds() - t0;

  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "potential.csv");
    CsvWriter w(os, {"x", "y", "z", "d", "on_boundary", "u_circ", "oracle", "rel_err", "corrector", "u_total"},
                cfg.hash());
    for (const auto& r : res.rows)
      w.row({fmt(r.x.x()), fmt(r.x.y()), fmt(r.x.z()), fmt(r.d), r.on_boundary ? "1" : "0", fmt(r.u), fmt(r.oracle),
             fmt(r.rel_err), fmt(r.corrector), fmt(r.u + (std::isnan(r.corrector) ? 0.0 : r.corrector))});
    json j;
    j["rho"] = res.rho;
    j["oracle"] = oracle ? "truncated_segment" : "none";
    j["max_rel_err"] = res.max_rel_err;
    j["max_boundary_residual"] = res.max_boundary_residual;
    write_sidecar(cfg, "potential_eval", {"potential.csv"}, j.dump());
  }
  return res;
}

// ---------------------------------------------------------------------------

InequalitySuite run_inequality_suite(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  const Config& c = cfg.raw;
  const std::string S = "inequalities";
  InequalitySuite res;
  std::string h = cfg.hash();
  std::ofstream hardy_os, dual_os, a2_os, sw_os, swi_os;
  std::unique_ptr<CsvWriter> hw, dw, aw, sw, siw;
  if (!cfg.out.empty()) {
    hardy_os = open_out(cfg, "hardy.csv");
    dual_os = open_out(cfg, "duality.csv");
    a2_os = open_out(cfg, "a2.csv");
    sw_os = open_out(cfg, "sw_condition.csv");
    swi_os = open_out(cfg, "sw_inequality.csv");
    hw = std::make_unique<CsvWriter>(hardy_os, std::vector<std::string>{"gamma", "D", "D_closed", "rel_diff", "r_star",
                                                                        "k", "empirical", "argmax", "pass"}, h);
    dw = std::make_unique<CsvWriter>(dual_os, std::vector<std::string>{"gamma", "sigma", "field", "lhs", "rhs",
                                                                       "margin", "holds"}, h);
    aw = std::make_unique<CsvWriter>(a2_os, std::vector<std::string>{"gamma", "level", "sup", "verdict"}, h);
    sw = std::make_unique<CsvWriter>(sw_os, std::vector<std::string>{"set", "p", "q", "alpha", "tau", "eta",
                                                                     "eta_lo", "eta_hi", "admissible", "numeric_sup",
                                                                     "numeric", "agree"}, h);
    siw = std::make_unique<CsvWriter>(swi_os, std::vector<std::string>{"set", "eta", "depth", "ratio"}, h);
  }

  // Hardy bracket
  double R = c.get_double(S, "hardy_R", 1.0);
  for (double g : c.get_list(S, "hardy_gamma", {0.25, 0.5, 0.75})) {
    auto hp = HardyParams::radial(g, R);
    auto b = hardy_bracket(hp);
    auto e = hardy_empirical(hp, hardy_family(hp, cfg.seed, static_cast<int>(c.get_int(S, "hardy_random", 16))));
    bool pass = (std::isnan(b.D_closed) || b.rel_diff < 5e-3) && e.max_ratio >= 0.9 * b.D &&
                e.max_ratio <= b.k * b.D * 1.02;
    res.pass = res.pass && pass;
    res.hardy.emplace_back(g, b);
    res.hardy_emp.emplace_back(g, e);
    if (hw)
      hw->row({fmt(g), fmt(b.D), fmt(b.D_closed), fmt(b.rel_diff), fmt(b.r_star), fmt(b.k), fmt(e.max_ratio), e.argmax,
               pass ? "1" : "0"});
  }

  // trace duality on the configured curve
  double Rd = cfg.curve.R0();
  double L = cfg.curve.length();
  auto fields = random_test_fields(cfg.curve, Rd, static_cast<int>(c.get_int(S, "duality_fields", 50)), cfg.seed);
  std::vector<std::pair<std::string, LineDensity>> sigmas{{"one", LineDensity::constant(1.0)},
                                                           {"sin", LineDensity::trigonometric(0.0, 1.0, kPi / L)}};
  res.duality_min_margin = kInf;
  for (double g : c.get_list(S, "duality_gamma", {0.25, 0.5, 0.75})) {
    auto q = duality_quadrature(cfg.curve, Rd, g);
    for (const auto& [sname, sg] : sigmas)
      for (const auto& f : fields) {
        auto r = delta_duality_bound(cfg.curve, sg, f, g, Rd, q);
        ++res.duality_cases;
        if (!r.holds()) ++res.duality_violations;
        res.duality_min_margin = std::min(res.duality_min_margin, r.margin);
        if (dw) dw->row({fmt(g), sname, f.name, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), r.holds() ? "1" : "0"});
      }
  }
  res.pass = res.pass && res.duality_violations == 0;

  // A2 on a segment
  auto seg = SingularSet::segment(Vec3::Zero(), Vec3::UnitZ());
  auto fam = CubeFamily::standard(seg, c.get_double(S, "a2_ell", 0.25), static_cast<int>(c.get_int(S, "a2_octaves", 7)),
                                  cfg.seed, 8);
  fam.validate(seg);
  for (double g : c.get_list(S, "a2_gamma", {0.5, 0.9, 1.2})) {
    auto a = muckenhoupt_a2(seg, g, fam);
    if (aw)
      for (std::size_t i = 0; i < a.levels.size(); ++i)
        aw->row({fmt(g), std::to_string(a.levels[i]), fmt(a.level_sups[i]), a.verdict});
    res.a2.emplace_back(g, std::move(a));
  }

  // Sawyer-Wheeden condition and inequality
  SWParams base;
  base.p = c.get_double(S, "sw_p", 1.1);
  base.q = c.get_double(S, "sw_q", 2.0);
  base.alpha = c.get_double(S, "sw_alpha", 2.0);
  base.tau = c.get_double(S, "sw_tau", 1.05);
  auto depths = c.get_list(S, "sw_depths", {6, 7, 8, 9, 10});
  std::vector<int> dep(depths.begin(), depths.end());
  for (std::string set : {"line", "point"}) {
    SingularSet E = set == "line" ? SingularSet::line() : SingularSet::point();
    auto cubes = CubeFamily::standard(E, 1.0, 5, cfg.seed, 8);
    auto etas = c.get_list(S, "sw_eta_" + set, set == "line" ? std::vector<double>{0.8, 0.95, 1.2}
                                                             : std::vector<double>{0.25, 1.0, 1.75});
    for (double eta : etas) {
      SWParams p = base;
      p.eta = eta;
      p.dim_A = E.assouad_dim();
      auto r = sw_condition_sup(p, E, cubes);
      res.pass = res.pass && r.agree;
      if (sw)
        sw->row({set, fmt(p.p), fmt(p.q), fmt(p.alpha), fmt(p.tau), fmt(eta), fmt(r.analytic.eta_lo),
                 fmt(r.analytic.eta_hi), r.analytic.admissible ? "1" : "0", fmt(r.numeric.sup), r.numeric.verdict,
                 r.agree ? "1" : "0"});
      if (siw && c.get_bool(S, "sw_inequality", true)) {
        auto f = translated_family(E, {1.0})[0];
        auto ratios = sw_ratio_refinement(p, E, f, SWGrid{}, dep);
        for (std::size_t i = 0; i < ratios.size(); ++i) siw->row({set, fmt(eta), std::to_string(dep[i]), fmt(ratios[i])});
      }
      res.sw.push_back(std::move(r));
      res.sw_sets.push_back(set);
    }
  }
  res.seconds = now_seconds() - t0;

  if (!cfg.out.empty()) {
    json j;
    j["pass"] = res.pass;
    j["duality"] = {{"cases", res.duality_cases}, {"violations", res.duality_violations},
                    {"min_margin", res.duality_min_margin}};
    json a2 = json::array();
    for (const auto& [g, a] : res.a2)
      a2.push_back(json::parse(cube_summary_json("a2", a, json{{"gamma", g}}.dump())));
    j["a2"] = a2;
    json swj = json::array();
    for (std::size_t i = 0; i < res.sw.size(); ++i)
      swj.push_back(json::parse(sw_summary_json(res.sw[i], res.sw_sets[i] == "line" ? SingularSet::line()
                                                                                     : SingularSet::point())));
    j["sw"] = swj;
    write_sidecar(cfg, "inequalities",
                  {"hardy.csv", "duality.csv", "a2.csv", "sw_condition.csv", "sw_inequality.csv"}, j.dump());
  }
  return res;
}

// ---------------------------------------------------------------------------

TargetSet target_set_from_config(const Config& c, const std::string& sec) {
  std::string kind = c.get_string(sec, "kind", "point");
  if (kind == "point") return TargetSet::point(vec3_or(c, sec, "at", Vec3::Zero()));
  if (kind == "cloud") {
    auto v = c.get_list(sec, "points");
    if (v.empty() || v.size() % 3) throw DomainError("config " + sec + ".points: need 3k numbers");
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < v.size(); i += 3) pts.emplace_back(v[i], v[i + 1], v[i + 2]);
    return TargetSet::point_cloud(pts);
  }
  if (kind == "segment")
    return TargetSet::segment(vec3_or(c, sec, "start", Vec3::Zero()), vec3_or(c, sec, "end", Vec3::UnitX()));
  if (kind == "harmonic")
    return TargetSet::harmonic(vec3_or(c, sec, "origin", Vec3::Zero()), vec3_or(c, sec, "dir", Vec3::UnitX()));
  if (kind == "curve") return TargetSet::sampled_curve(Curve::from_config(c, "curve"), c.get_double(sec, "spacing", 1e-3));
  throw DomainError("unknown set kind: " + kind);
}

AssouadRun run_assouad(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  const Config& c = cfg.raw;
  AssouadRun res;
  res.set = target_set_from_config(c);
  AssouadOptions o;
  o.radii = c.get_list("assouad", "radii", {});
  o.r_from = static_cast<int>(c.get_int("assouad", "r_from", 2));
  o.r_to = static_cast<int>(c.get_int("assouad", "r_to", 6));
  o.anchors = static_cast<int>(c.get_int("assouad", "anchors", 8));
  res.assouad = assouad_estimate(res.set, o);
  res.box = box_dimension_estimate(res.set, static_cast<int>(c.get_int("assouad", "box_from", 4)),
                                   static_cast<int>(c.get_int("assouad", "box_to", 12)));
  res.seconds = now_seconds() - t0;
  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "assouad.csv");
    write_assouad_csv(os, res.assouad, cfg.hash());
    auto bs = open_out(cfg, "box_dimension.csv");
    CsvWriter w(bs, {"r", "N_r"}, cfg.hash());
    for (std::size_t i = 0; i < res.box.r.size(); ++i) w.row({fmt(res.box.r[i]), std::to_string(res.box.N[i])});
    json j;
    j["set"] = res.set.describe();
    j["assouad_estimate"] = res.assouad.estimate;
    j["min_slope"] = res.assouad.min_slope;
    j["spread"] = res.assouad.spread;
    j["octaves"] = res.assouad.octaves;
    j["low_confidence"] = res.assouad.low_confidence;
    j["policy"] = res.assouad.policy;
    j["box_estimate"] = res.box.estimate;
    write_sidecar(cfg, "assouad", {"assouad.csv", "box_dimension.csv"}, j.dump());
  }
  return res;
}

WhitneyRun run_whitney_dump(const ExperimentConfig& cfg) {
  double t0 = now_seconds();
  const Config& c = cfg.raw;
  WhitneyRun res;
  res.set = target_set_from_config(c);
  WhitneyBox box;
  if (c.has("whitney", "corner")) {
    box.corner = vec3_or(c, "whitney", "corner", Vec3::Zero());
    box.edge = c.get_double("whitney", "edge", 1.0);
  } else {
    box = WhitneyBox::around(res.set, c.get_double("whitney", "margin", 0.5));
  }
  int k_min = static_cast<int>(std::lround(-std::log2(box.edge)));
  res.whitney = whitney_decompose(res.set, box, static_cast<int>(c.get_int("whitney", "k_max", k_min + 8)));
  auto radii = c.get_list("whitney", "census_radii", {0.125, 0.25, 0.5});
  for (const auto& x : res.set.anchors(static_cast<int>(c.get_int("whitney", "census_anchors", 2))))
    for (double r : radii) res.census.push_back(generation_census(res.whitney, x, r));
  res.seconds = now_seconds() - t0;
  if (!cfg.out.empty()) {
    auto os = open_out(cfg, "whitney_cubes.csv");
    write_cubes_csv(os, res.whitney, cfg.hash());
    auto cs = open_out(cfg, "whitney_census.csv");
    write_census_csv(cs, res.census, cfg.hash());
    const auto& w = res.whitney;
    json j;
    j["set"] = res.set.describe();
    j["cubes"] = w.cubes.size();
    j["k_min"] = w.k_min;
    j["k_max"] = w.k_max;
    j["box_volume"] = w.box_volume;
    j["covered_volume"] = w.covered_volume;
    j["uncovered_volume"] = w.uncovered_volume;
    j["truncated"] = w.truncated;
    j["sandwich_violations"] = w.sandwich_violations;
    j["max_generation_gap"] = w.max_generation_gap;
    write_sidecar(cfg, "whitney_dump", {"whitney_cubes.csv", "whitney_census.csv"}, j.dump());
  }
  return res;
}

void write_sidecar(const ExperimentConfig& cfg, const std::string& name, const std::vector<std::string>& files,
                   const std::string& summary_json) {
  json j;
  j["command"] = cfg.command;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["refine"] = cfg.refine;
  j["files"] = files;
  json conf = json::object();
  for (const auto& [sec, kv] : cfg.raw.sections())
    for (const auto& [k, v] : kv) conf[sec.empty() ? k : sec + "." + k] = v;
  j["config"] = conf;
  j["summary"] = json::parse(summary_json);
  auto os = open_out(cfg, name + ".meta.json");
  os << j.dump(2) << "\n";
}

}  // namespace lsreg
