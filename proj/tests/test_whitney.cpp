#include <doctest.h>

#include <cmath>

#include "lsreg/whitney.hpp"

using namespace lsreg;

TEST_CASE("point in [-1,1]^3: sandwich, gap and volume") {
  auto E = TargetSet::point();
  WhitneyBox box{Vec3(-1, -1, -1), 2.0};
  double last_unc = 1e9;
  for (int k : {4, 6, 8}) {
    auto w = whitney_decompose(E, box, k);
    CHECK(w.sandwich_violations == 0);
    for (const auto& q : w.cubes) CHECK(whitney_sandwich(q));
    CHECK(w.max_generation_gap <= 2);
    CHECK(w.truncated);
    CHECK(w.covered_volume + w.uncovered_volume == doctest::Approx(8.0));
    CHECK(w.uncovered_volume < last_unc);
    CHECK(w.uncovered_volume <= 64.0 * std::ldexp(1.0, -3 * k));
    last_unc = w.uncovered_volume;
  }
}

TEST_CASE("segment and harmonic sets satisfy the sandwich") {
  for (const auto& E : {TargetSet::segment(Vec3::Zero(), Vec3::UnitX()), TargetSet::harmonic()}) {
    auto w = whitney_decompose(E, WhitneyBox::around(E, 0.5), 7);
    CHECK(w.sandwich_violations == 0);
    CHECK(w.max_generation_gap <= 2);
  }
}

TEST_CASE("exact distances") {
  auto H = TargetSet::harmonic();
  CHECK(H.distance(Vec3(0.3, 0, 0)) == doctest::Approx(1.0 / 3 - 0.3));
  CHECK(H.distance(Vec3(0.27, 0.04, 0)) == doctest::Approx(std::hypot(0.02, 0.04)));
  CHECK(H.distance(Vec3(-0.5, 0, 0)) == doctest::Approx(0.5));
  CHECK(H.distance(Vec3(2.0, 0, 0)) == doctest::Approx(1.0));
  CHECK(H.box_distance(Vec3(0.21, -1, -1), Vec3(0.24, 1, 1)) == doctest::Approx(0.01));
  auto S = TargetSet::segment(Vec3::Zero(), Vec3::UnitX());
  CHECK(S.box_distance(Vec3(0.2, 0.3, 0.4), Vec3(0.5, 0.6, 0.8)) == doctest::Approx(0.5));
  CHECK(S.distance(Vec3(1.3, 0.4, 0)) == doctest::Approx(0.5));
}

TEST_CASE("covering numbers") {
  auto P = TargetSet::point();
  for (double r : {0.5, 0.1, 0.01}) CHECK(covering_number(P, Vec3::Zero(), 1.0, r) == 1);
  auto S = TargetSet::segment(Vec3::Zero(), Vec3::UnitX());
  long n = covering_number(S, Vec3(0.5, 0, 0), 0.5, 0.5 / 8);
  CHECK(n >= 8);
  CHECK(n <= 16);
  CHECK_THROWS_AS(covering_number(S, Vec3::Zero(), 0.1, 0.2), DomainError);
  auto C = TargetSet::sampled_curve(Curve::circle(Vec3::Zero(), 1.0, Vec3::UnitZ(), 0.5), 0.01);
  CHECK_THROWS_AS(covering_number(C, Vec3(1, 0, 0), 0.5, 0.001), ResolutionError);
  CHECK(covering_number(C, Vec3(1, 0, 0), 0.5, 0.05) > 0);
}

TEST_CASE("generation census") {
  auto E = TargetSet::segment(Vec3::Zero(), Vec3::UnitX());
  auto w = whitney_decompose(E, WhitneyBox::around(E, 0.5), 9);
  auto tiny = generation_census(w, Vec3(0.5, 0, 0), 1e-4);
  for (long c : tiny.counts) CHECK(c == 0);
  long prev = -1;
  for (double R : {0.1, 0.2, 0.4}) {
    auto c = generation_census(w, Vec3(0.5, 0, 0), R);
    long tot = 0;
    for (long v : c.counts) tot += v;
    CHECK(tot >= prev);
    prev = tot;
  }
  auto c = generation_census(w, Vec3(0.5, 0, 0), 0.4);
  CHECK(census_slope(c, 6) == doctest::Approx(1.0).epsilon(0.15));
  auto P = TargetSet::point();
  auto wp = whitney_decompose(P, WhitneyBox::around(P, 1.0), 9);
  CHECK(census_slope(generation_census(wp, Vec3::Zero(), 0.5), 4) <= 0.1);
}

TEST_CASE("Assouad and box dimension estimates") {
  auto a0 = assouad_estimate(TargetSet::point());
  CHECK(std::abs(a0.estimate) <= 0.1);
  auto a1 = assouad_estimate(TargetSet::segment(Vec3::Zero(), Vec3::UnitX()));
  CHECK(std::abs(a1.estimate - 1.0) <= 0.15);
  CHECK_FALSE(a1.low_confidence);
  CHECK_FALSE(a1.policy.empty());
  auto H = TargetSet::harmonic();
  auto ah = assouad_estimate(H);
  CHECK(ah.estimate >= 0.85);
  auto bh = box_dimension_estimate(H);
  CHECK(std::abs(bh.estimate - 0.5) <= 0.15);
  CHECK(ah.estimate >= bh.estimate - 0.1);
  AssouadOptions few;
  few.r_to = 3;
  CHECK(assouad_estimate(H, few).low_confidence);
}
