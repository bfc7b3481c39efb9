#include <doctest.h>

#include <cmath>

#include "lsreg/geometry.hpp"

using namespace lsreg;

TEST_CASE("segment projection and regions") {
  Curve c = Curve::segment(1.0, 0.25);
  auto p = project_and_distance(c, Vec3(0.1, 0.0, 0.5), 0.2);
  CHECK(p.d == doctest::Approx(0.1));
  CHECK(p.s == doctest::Approx(0.5));
  CHECK(p.d_e == doctest::Approx(std::hypot(0.1, 0.5)));
  CHECK(p.region.kind == Region::Cylinder);

  auto q = project_and_distance(c, Vec3(0.0, 0.0, -0.1), 0.2);
  CHECK(q.d == doctest::Approx(0.1));
  CHECK(q.d_e == doctest::Approx(0.1));
  CHECK(q.region.kind == Region::CapStart);

  auto f = project_and_distance(c, Vec3(2.0, 0.0, 0.5), 0.2);
  CHECK(f.region.kind == Region::Far);
}

TEST_CASE("tubular coordinates round trip") {
  Curve c = Curve::circle(Vec3::Zero(), 1.0, Vec3::UnitZ(), 0.3);
  CylCoords cc{0.1, 0.7, 1.3};
  Vec3 x = to_cartesian(c, cc);
  auto p = project_and_distance(c, x, 0.2);
  CHECK(p.d == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(p.s == doctest::Approx(1.3).epsilon(1e-9));
  CHECK(std::isinf(p.d_e));
  CHECK(c.closed());
}

TEST_CASE("frame is orthonormal along a circle") {
  Curve c = Curve::circle(Vec3(1, 2, 3), 2.0, Vec3(0, 1, 1).normalized(), 0.5);
  for (double s : {0.0, 1.0, 5.0, 12.0}) {
    Frame f = c.frame(s);
    CHECK(f.t.norm() == doctest::Approx(1.0));
    CHECK(std::abs(f.t.dot(f.n)) < 1e-12);
    CHECK(std::abs(f.t.dot(f.b)) < 1e-12);
    CHECK(std::abs(f.n.dot(f.b)) < 1e-12);
  }
}

TEST_CASE("tubular jacobian") {
  Curve seg = Curve::segment(1.0, 0.25);
  CHECK(tubular_jacobian(seg, {0.1, 0.3, 0.5}) == doctest::Approx(0.1));
  Curve circ = Curve::circle(Vec3::Zero(), 1.0, Vec3::UnitZ(), 0.5);
  // integrates to the volume of the torus with tube radius a
  double a = 0.2, vol = 0.0;
  int nr = 40, nt = 64;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      double r = a * (i + 0.5) / nr, th = 2 * M_PI * (j + 0.5) / nt;
      vol += tubular_jacobian(circ, {r, th, 0.4}) * (a / nr) * (2 * M_PI / nt) * circ.length();
    }
  CHECK(vol == doctest::Approx(2 * M_PI * M_PI * a * a).epsilon(1e-3));
}

TEST_CASE("dyadic decomposition") {
  Curve c = Curve::segment(1.0, 0.25);
  auto d = dyadic_decomposition(c, 1.0 / 32, 0.2);
  CHECK(d.J == 5);
  CHECK_FALSE(d.snapped);
  CHECK(d.pieces.front().s0 == 0.0);
  CHECK(d.pieces.back().s1 == doctest::Approx(1.0));
  for (std::size_t i = 1; i < d.pieces.size(); ++i) CHECK(d.pieces[i].s0 == doctest::Approx(d.pieces[i - 1].s1));
  auto snapped = dyadic_decomposition(c, 0.03, 0.2);
  CHECK(snapped.snapped);
  CHECK_FALSE(snapped.warning.empty());
  CHECK_THROWS_AS(dyadic_decomposition(c, 0.03, 0.3), TubularError);
}

TEST_CASE("endpoint spherical coordinates") {
  Curve c = Curve::segment(1.0, 0.25);
  Vec3 x(0.05, 0.0, -0.05);
  auto sp = endpoint_spherical(c, x, EndpointSide::Start);
  CHECK(sp.r == doctest::Approx(x.norm()));
  auto p = project_and_distance(c, x, 0.2);
  CHECK(sp.r == doctest::Approx(p.d_e));
}

TEST_CASE("polygonal chain") {
  Curve c = Curve::polygonal({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)}, 0.1);
  CHECK(c.length() == doctest::Approx(2.0));
  CHECK(c.min_interior_angle() == doctest::Approx(M_PI / 2));
  auto p = project_and_distance(c, Vec3(0.5, -0.05, 0.0), 0.1);
  CHECK(p.d == doctest::Approx(0.05));
  CHECK(p.segment == 0);
}
