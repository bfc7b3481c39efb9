#include <doctest.h>

#include <cmath>

#include "lsreg/weighted_norms.hpp"

using namespace lsreg;

namespace {
double one(const QuadNode&) { return 1.0; }
}  // namespace

TEST_CASE("cylinder volume and power weights") {
  Curve c = Curve::segment(1.0, 0.25);
  for (bool ax : {true, false}) {
    QuadOptions o;
    o.axisymmetric = ax;
    o.scale = 1.0 / 32;
    o.min_a = -0.75;
    auto q = region_quadrature(c, RegionSpec::cylinder(0, 1, 0, 0.2), o);
    // graded panels near r = 0 are not polynomial-exact
    CHECK(q.volume() == doctest::Approx(M_PI * 0.04).epsilon(1e-5));
    double g = -0.75;
    double exact = 2 * M_PI * std::pow(0.2, 2 * g + 2) / (2 * g + 2);
    CHECK(weighted_seminorm(one, q, {g, 0.0}) == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("cap with two weights") {
  Curve c = Curve::segment(1.0, 0.25);
  QuadOptions o;
  o.axisymmetric = true;
  o.scale = 1.0 / 32;
  o.min_a = -0.5;
  auto q = region_quadrature(c, RegionSpec::cap(Region::CapStart, 0, 0.2), o);
  CHECK(q.touches_endpoint);
  double gam = -0.5, mu = 0.3;
  double exact = 2 * M_PI * std::pow(0.2, 2 * gam + 2 * mu + 3) / (2 * gam + 2 * mu + 3);
  CHECK(weighted_seminorm(one, q, {gam, mu}) == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("far region volume") {
  Curve c = Curve::segment(1.0, 0.25);
  QuadOptions o;
  o.axisymmetric = true;
  auto q = region_quadrature(c, RegionSpec::far(Vec3(0, 0, 0.5), 1.0, 0.2), o);
  double exact = 4.0 / 3 * M_PI - (M_PI * 0.04 + 4.0 / 3 * M_PI * 0.008);
  CHECK(q.volume() == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("weight integrability") {
  CHECK(weight_integrability({-0.75, 0.0}, 0, 0, Region::Cylinder).finite);
  auto bad = weight_integrability({-1.25, 0.0}, 0, 0, Region::Cylinder);
  CHECK_FALSE(bad.finite);
  CHECK(bad.violated.find("gamma > -1") != std::string::npos);
  CHECK_FALSE(weight_integrability({-0.5, -1.1}, 0, 0, Region::CapStart).finite);
  CHECK(weight_integrability({-5.0, -5.0}, 0, 0, Region::Far).finite);
  CHECK(weight_integrability({-1.25, 0.0}, 0, 0, Region::Cylinder, false, false).finite);

  Curve c = Curve::segment(1.0, 0.25);
  QuadOptions o;
  o.axisymmetric = true;
  auto q = region_quadrature(c, RegionSpec::cylinder(0, 1, 0, 0.2), o);
  CHECK_THROWS_AS(weighted_seminorm(one, q, {-1.25, 0.0}), IntegrabilityError);
}

TEST_CASE("split densities of a quadratic field") {
  // v = x^2 + 3 x z + z^2 / 2 with the tangent along z
  Jet j;
  Vec3 x(0.2, 0.1, 0.3);
  j.u = x.x() * x.x() + 3 * x.x() * x.z() + 0.5 * x.z() * x.z();
  j.g = Vec3(2 * x.x() + 3 * x.z(), 0.0, 3 * x.x() + x.z());
  j.H << 2, 0, 3, 0, 0, 0, 3, 0, 1;
  Vec3 t = Vec3::UnitZ();
  CHECK(split_density(j, t, 0, 0) == doctest::Approx(j.u * j.u));
  CHECK(split_density(j, t, 1, 0) == doctest::Approx(j.g.x() * j.g.x()));
  CHECK(split_density(j, t, 0, 1) == doctest::Approx(j.g.z() * j.g.z()));
  CHECK(split_density(j, t, 2, 0) == doctest::Approx(4.0));
  CHECK(split_density(j, t, 1, 1) == doctest::Approx(18.0));
  CHECK(split_density(j, t, 0, 2) == doctest::Approx(1.0));
  // the splits of order 2 add up to the Frobenius norm
  CHECK(split_density(j, t, 2, 0) + split_density(j, t, 1, 1) + split_density(j, t, 0, 2) ==
        doctest::Approx(j.H.squaredNorm()));
  CHECK_THROWS_AS(split_density(j, t, 2, 1), UnsupportedOrderError);
}

TEST_CASE("tube regions cover B(curve, R0)") {
  Curve c = Curve::segment(1.0, 0.25);
  auto regs = tube_regions(c, 1.0 / 16, 0.2);
  QuadOptions o;
  o.axisymmetric = true;
  double vol = 0.0;
  for (const auto& r : regs) vol += region_quadrature(c, r, o).volume();
  CHECK(vol == doctest::Approx(M_PI * 0.04 + 4.0 / 3 * M_PI * 0.008).epsilon(1e-8));
}
