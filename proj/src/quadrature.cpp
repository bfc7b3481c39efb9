#include "lsreg/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace lsreg {

void Rule::append(const Rule& other) {
  x.insert(x.end(), other.x.begin(), other.x.end());
  w.insert(w.end(), other.w.begin(), other.w.end());
}

double Rule::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
  return s;
}

const Rule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Rule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  auto rule = std::make_unique<Rule>();
  rule->x.resize(n);
  rule->w.resize(n);
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(n);
  for (int i = 0; i < n; ++i)
    gsl_integration_glfixed_point(-1.0, 1.0, i, &rule->x[i], &rule->w[i], t);
  gsl_integration_glfixed_table_free(t);
  // GSL orders nodes symmetric-first; sort ascending for reproducible sums.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return rule->x[a] < rule->x[b]; });
  Rule sorted;
  for (int i : idx) {
    sorted.x.push_back(rule->x[i]);
    sorted.w.push_back(rule->w[i]);
  }
  *rule = sorted;
  auto& ref = *rule;
  cache.emplace(n, std::move(rule));
  return ref;
}

Rule gl_interval(double a, double b, int n) {
  const Rule& g = gauss_legendre(n);
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  double h = 0.5 * (b - a), c = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    r.x[i] = c + h * g.x[i];
    r.w[i] = h * g.w[i];
  }
  return r;
}

Rule composite(std::vector<double> breaks, int n) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  Rule r;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] - breaks[i] <= 0.0) continue;
    r.append(gl_interval(breaks[i], breaks[i + 1], n));
  }
  return r;
}

Rule graded(double a, double b, int n, double g) {
  if (g <= 1.0) return gl_interval(a, b, n);
  Rule t = gl_interval(0.0, 1.0, n);
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = a + (b - a) * std::pow(t.x[i], g);
    r.w[i] = (b - a) * g * std::pow(t.x[i], g - 1.0) * t.w[i];
  }
  return r;
}

Rule geometric_from(double a, double b, double h0, int n, double g) {
  Rule r;
  if (b <= a) return r;
  double lo = a, h = std::min(h0, b - a);
  r.append(graded(lo, lo + h, n, g));
  lo += h;
  while (lo < b) {
    double hi = std::min(b, std::max(a + 2.0 * (lo - a), lo + h0));
    if (b - hi < 0.25 * (hi - lo)) hi = b;
    r.append(gl_interval(lo, hi, n));
    lo = hi;
  }
  return r;
}

Rule geometric_to(double a, double b, double h0, int n, double g) {
  Rule m = geometric_from(0.0, b - a, h0, n, g);
  Rule r;
  for (std::size_t i = m.size(); i-- > 0;) {
    r.x.push_back(b - m.x[i]);
    r.w.push_back(m.w[i]);
  }
  return r;
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, double* error_estimate) {
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 15, rel_tol, &err);
  if (error_estimate) *error_estimate = err;
  return v;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need >= 2 matching points");
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

bool refinement_divergent(const std::vector<double>& values, double growth,
                          int consecutive) {
  int run = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    bool grew = !std::isfinite(values[i]) ||
                (values[i - 1] > 0 && values[i] > (1.0 + growth) * values[i - 1]);
    run = grew ? run + 1 : 0;
    if (run >= consecutive) return true;
  }
  return false;
}

}  // namespace lsreg
