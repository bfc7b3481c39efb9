#include <doctest.h>

#include <cmath>

#include "lsreg/inequalities.hpp"

using namespace lsreg;

TEST_CASE("Hardy bracket for the radial pair") {
  CHECK(hardy_k(2, 2) == doctest::Approx(2.0));
  for (double g : {0.25, 0.5, 0.75}) {
    auto hp = HardyParams::radial(g, 1.0);
    auto b = hardy_bracket(hp);
    CHECK(b.rel_diff < 5e-3);
    CHECK(b.upper == doctest::Approx(2.0 * b.D));
    auto e = hardy_empirical(hp, hardy_family(hp, 3, 8));
    CHECK(e.max_ratio >= 0.9 * b.D);
    CHECK(e.max_ratio <= 2.0 * b.D * 1.02);
  }
  CHECK(hardy_D_closed(1.0, 1.0) == doctest::Approx(0.25));
}

TEST_CASE("Hardy weights must be integrable") {
  HardyParams hp;
  hp.nu_exp = 1.5;  // nu^{1/(1-p)} = t^{-1.5}
  CHECK_THROWS_AS(hp.validate(), IntegrabilityError);
}

TEST_CASE("duality bound on a few fields") {
  Curve c = Curve::segment(1.0, 0.25);
  auto fields = random_test_fields(c, 0.25, 6, 11);
  auto q = duality_quadrature(c, 0.25, 0.5);
  CHECK(q.volume() == doctest::Approx(M_PI * 0.0625).epsilon(1e-8));
  for (const auto& f : fields) {
    auto r = delta_duality_bound(c, LineDensity::constant(1.0), f, 0.5, 0.25, q);
    CHECK(r.holds());
  }
  auto z = delta_duality_bound(c, LineDensity::constant(1.0), TestField::zero(), 0.5, 0.25, q);
  CHECK(z.lhs == 0.0);
  CHECK(duality_constant(0.01) > duality_constant(0.1));
}

TEST_CASE("Sawyer-Wheeden admissible intervals") {
  SWParams s;
  s.p = 1.1;
  auto a = sw_analytic(s);
  CHECK(a.eta_lo == doctest::Approx(1.5 - 1.0 / 1.1));
  CHECK(a.eta_hi == doctest::Approx(1.0));
  s.dim_A = 0.0;
  s.eta = 1.0;
  auto pt = sw_analytic(s);
  CHECK(pt.admissible);
  CHECK(pt.eta_lo == doctest::Approx(0.5));
  CHECK(pt.eta_hi == doctest::Approx(1.5));
  s.p = 2.5;
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("cube families and A2") {
  auto seg = SingularSet::segment(Vec3::Zero(), Vec3::UnitZ());
  auto fam = CubeFamily::standard(seg, 0.25, 5, 1, 4);
  CHECK(fam.octaves() >= 4);
  fam.validate(seg);
  auto flat = muckenhoupt_a2(seg, 0.0, fam, {3, 4});
  CHECK(flat.sup == doctest::Approx(1.0).epsilon(1e-9));
  Cube q{Vec3(0.3, 0.3, 0.3), 0.1, "off-set"};
  auto avg = cube_power_averages(seg, q, {0.0}, 3);
  CHECK(avg[0] == doctest::Approx(1.0));
}

TEST_CASE("fractional integral of a ball indicator at its center") {
  SWTestFunction f;
  f.radius = 0.5;
  // int_{|y|<a} |y|^{alpha-3} dy = 4 pi a^alpha / alpha
  double alpha = 2.0;
  CHECK(fractional_integral(f, alpha, Vec3::Zero(), 8) == doctest::Approx(4 * M_PI * 0.25 / 2.0).epsilon(1e-6));
}
