#include <doctest.h>

#include <cmath>

#include "lsreg/potential.hpp"
#include "lsreg/quadrature.hpp"

using namespace lsreg;

TEST_CASE("fundamental solution sign and derivatives") {
  Vec3 x(0.3, -0.2, 0.5), y(0.0, 0.1, 0.2);
  CHECK(gamma_eval(x, y) == doctest::Approx(-1.0 / (4 * M_PI * (x - y).norm())));
  double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Multi3 b{0, 0, 0};
    b[k] = 1;
    Vec3 e = Vec3::Unit(k);
    double fd = (gamma_eval(x + h * e, y) - gamma_eval(x - h * e, y)) / (2 * h);
    CHECK(gamma_deriv(b, x, y) == doctest::Approx(fd).epsilon(1e-6));
  }
  // harmonic away from y
  double lap = 0.0;
  for (int k = 0; k < 3; ++k) {
    Multi3 b{0, 0, 0};
    b[k] = 2;
    lap += gamma_deriv(b, x, y);
  }
  CHECK(std::abs(lap) < 1e-9);
}

TEST_CASE("exact segment potential matches quadrature") {
  Vec3 x(0.3, 0.1, 0.7);
  double num = integrate_adaptive([&](double s) { return gamma_eval(x, Vec3(0, 0, s)); }, 0.2, 0.9, 1e-13);
  CHECK(exact_segment_potential(x, 0.2, 0.9) == doctest::Approx(num).epsilon(1e-10));
}

TEST_CASE("ring integrals against brute force") {
  double r = 0.3, rp = 0.2, z = 0.05;
  auto R = ring_integrals(r, rp, z);
  double i0 = 0, j1 = 0;
  int n = 200000;
  for (int k = 0; k < n; ++k) {
    double t = 2 * M_PI * (k + 0.5) / n;
    double D = r * r + rp * rp + z * z - 2 * r * rp * std::cos(t);
    i0 += 1 / std::sqrt(D);
    j1 += std::cos(t) * std::pow(D, -1.5);
  }
  CHECK(R.I0 == doctest::Approx(i0 * 2 * M_PI / n).epsilon(1e-8));
  CHECK(R.J1 == doctest::Approx(j1 * 2 * M_PI / n).epsilon(1e-6));
}

TEST_CASE("mollified potential far from the segment") {
  Curve c = Curve::segment(1.0, 0.25);
  double rho = 1.0 / 32;
  RegularizedSource src(c, LineDensity::constant(1.0), rho);
  PotentialEvaluator ev(src);
  auto [a, b] = src.window(0);
  for (Vec3 x : {Vec3(0.5, 0.0, 0.5), Vec3(0.0, 0.4, 1.2), Vec3(0.3, 0.3, -0.3)}) {
    double u = ev.eval(x, {});
    CHECK(u == doctest::Approx(exact_segment_potential(x, a, b)).epsilon(1e-4));
  }
  // the fast path agrees with the tensor grid
  Vec3 x(0.2, 0.1, 0.4);
  CHECK(ev.eval(x, {}) == doctest::Approx(ev.eval_tensor(x, {}, Placement::Kernel)).epsilon(1e-6));
}

TEST_CASE("ball corrector cancels the potential on the sphere") {
  Curve c = Curve::segment(1.0, 0.25);
  RegularizedSource src(c, LineDensity::trigonometric(1.0, 0.5, 3.0, 0.2), 1.0 / 32);
  BallDomain dom{Vec3(0, 0, 0.5), 1.0};
  dom.validate(c);
  PotentialEvaluator ev(src);
  for (int i = 0; i < 4; ++i) {
    double th = 0.3 + i, ph = 0.7 * i;
    Vec3 x = dom.center + Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    CHECK(std::abs(ev.eval(x, {}) + ball_green_corrector(dom, ev, x)) < 1e-9);
  }
  BallDomain small{Vec3(0, 0, 0.5), 0.6};
  CHECK_THROWS_AS(small.validate(c), DomainError);
}

TEST_CASE("u_circ derivatives are consistent") {
  Curve c = Curve::segment(1.0, 0.25);
  RegularizedSource src(c, LineDensity::constant(1.0), 1.0 / 16);
  PotentialEvaluator ev(src);
  Vec3 x(0.15, 0.05, 0.4);
  double u;
  Vec3 g;
  Eigen::Matrix3d H;
  ev.eval_jet(x, u, g, H);
  double h = 1e-5;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Unit(k);
    CHECK(g[k] == doctest::Approx((ev.eval(x + h * e, {}) - ev.eval(x - h * e, {})) / (2 * h)).epsilon(1e-5));
  }
  // harmonic outside the support
  CHECK(std::abs(H.trace()) < 1e-6 * H.norm());
}

TEST_CASE("fast path follows the source when rebuilt in place") {
  Curve c = Curve::segment(1.0, 0.25);
  Vec3 x(0.3, 0.0, 0.45);
  for (int i = 0; i < 3; ++i) {
    RegularizedSource src(c, i == 1 ? LineDensity::trigonometric(1.0, 0.5, 3.0) : LineDensity::constant(1.0),
                          1.0 / (16 << i));
    PotentialEvaluator fast(src), slow(src, {}, false);
    CHECK(fast.eval(x, {}) == doctest::Approx(slow.eval(x, {})).epsilon(1e-6));
  }
}
