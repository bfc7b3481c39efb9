#include <doctest.h>

#include <cmath>

#include "lsreg/mollifier.hpp"
#include "lsreg/quadrature.hpp"

using namespace lsreg;

namespace {

double mass(int n, double rho) {
  if (n == 1) return integrate_adaptive([&](double x) { return scaled_bump_eval(1, rho, {x, 0.0}); }, -rho, rho, 1e-13);
  return integrate_adaptive([&](double r) { return 2 * M_PI * r * scaled_bump_eval(2, rho, {r, 0.0}); }, 0.0, rho,
                            1e-13);
}

double sup_deriv(int n, double rho, std::array<int, 2> beta) {
  double best = 0.0;
  int m = 400;
  for (int i = 0; i < m; ++i) {
    double x = rho * (-1.0 + 2.0 * (i + 0.5) / m);
    if (n == 1) {
      best = std::max(best, std::abs(scaled_bump_deriv(1, rho, beta, {x, 0.0})));
    } else {
      for (int j = 0; j < 40; ++j) {
        double y = rho * (-1.0 + 2.0 * (j + 0.5) / 40);
        if (x * x + y * y < rho * rho) best = std::max(best, std::abs(scaled_bump_deriv(2, rho, beta, {x, y})));
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("bump has unit mass at every scale") {
  for (int n : {1, 2})
    for (double rho : {1.0, 0.1, 0.01}) CHECK(std::abs(mass(n, rho) - 1.0) < 1e-8);
}

TEST_CASE("bump vanishes outside the unit ball") {
  CHECK(bump_eval(1, {1.0, 0.0}) == 0.0);
  CHECK(bump_eval(2, {0.8, 0.7}) == 0.0);
  CHECK(bump_eval(2, {0.1, 0.1}) > 0.0);
}

TEST_CASE("derivative sups scale like rho^{-n-|beta|}") {
  for (int n : {1, 2})
    for (std::array<int, 2> b : {std::array<int, 2>{0, 0}, {1, 0}, {2, 0}, {1, 1}}) {
      if (n == 1 && b[1] > 0) continue;
      int k = b[0] + b[1];
      double ref = sup_deriv(n, 1.0, b);
      for (double rho : {0.1, 0.01}) {
        double v = sup_deriv(n, rho, b) * std::pow(rho, n + k);
        CHECK(v == doctest::Approx(ref).epsilon(1e-6));
      }
    }
}

TEST_CASE("tangential factor derivatives match finite differences") {
  double rho = 0.05, u = 0.013, h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    double fd = (phi1_deriv(rho, k, u + h) - phi1_deriv(rho, k, u - h)) / (2 * h);
    CHECK(phi1_deriv(rho, k + 1, u) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("line densities") {
  auto s = LineDensity::trigonometric(1.0, 0.5, 2.0, 0.3);
  CHECK(s(0.4) == doctest::Approx(1.0 + 0.5 * std::sin(0.8 + 0.3)));
  CHECK(s.deriv(1, 0.4) == doctest::Approx(std::cos(0.8 + 0.3)));
  auto p = LineDensity::polynomial({1.0, 2.0, 3.0});
  CHECK(p.deriv(2, 0.7) == doctest::Approx(6.0));
  CHECK(LineDensity::constant(2.0).l2_norm(4.0) == doctest::Approx(4.0));
  std::vector<double> t, v;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(i / 20.0);
    v.push_back(std::sin(t.back()));
  }
  auto tab = LineDensity::tabulated(t, v);
  CHECK(tab.smoothness() == 2);
  CHECK(tab(0.5) == doctest::Approx(std::sin(0.5)).epsilon(1e-4));
}

TEST_CASE("integration by parts identity for the tangential factor") {
  Curve c = Curve::segment(1.0, 0.25);
  RegularizedSource src(c, LineDensity::trigonometric(1.0, 1.0, M_PI), 1.0 / 32);
  for (int k = 0; k <= 2; ++k)
    for (double s : {0.01, 0.03, 0.05, 0.5, 0.97}) {
      double a = src.tangential(0, k, s), b = src.tangential_direct(0, k, s);
      CHECK(a == doctest::Approx(b).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("open mode loses 2 rho of mass for constant density") {
  Curve c = Curve::segment(1.0, 0.25);
  for (double rho : {1.0 / 16, 1.0 / 64}) {
    RegularizedSource src(c, LineDensity::constant(1.0), rho);
    CHECK(sigma_rho_mass(src) == doctest::Approx(1.0 - 2 * rho).epsilon(1e-6));
  }
}

TEST_CASE("periodic mode keeps the full mass on a circle") {
  Curve c = Curve::circle(Vec3::Zero(), 1.0, Vec3::UnitZ(), 0.5);
  RegularizedSource src(c, LineDensity::constant(1.0), 1.0 / 16);
  CHECK(src.mode() == MollifierMode::Periodic);
  CHECK(sigma_rho_mass(src) == doctest::Approx(2 * M_PI).epsilon(1e-5));
}

TEST_CASE("smoothness of the density bounds k_s") {
  std::vector<double> t, v;
  for (int i = 0; i <= 10; ++i) {
    t.push_back(i / 10.0);
    v.push_back(1.0);
  }
  Curve c = Curve::segment(1.0, 0.25);
  RegularizedSource src(c, LineDensity::tabulated(t, v), 1.0 / 16);
  CHECK_THROWS_AS(src.tangential(0, 3, 0.5), SmoothnessError);
}
