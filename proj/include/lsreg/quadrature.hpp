#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lsreg {

// Nodes and weights of a 1D rule.
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
  void append(const Rule& other);
  double integrate(const std::function<double(double)>& f) const;
};

// Gauss-Legendre on [-1,1]; tables are cached per n.
const Rule& gauss_legendre(int n);

Rule gl_interval(double a, double b, int n);

// One n-point Gauss-Legendre panel per consecutive pair of breakpoints.
// Breakpoints are sorted and deduplicated first.
Rule composite(std::vector<double> breaks, int n);

// Grading x = a + (b-a) t^g with t on Gauss-Legendre nodes in [0,1]:
// clusters nodes at a.
Rule graded(double a, double b, int n, double g);

// Geometric panels [a, a+h0], [a+h0, a+2h0], ... doubling until b.
// Panels are graded toward a; the first one uses 'g'.
Rule geometric_from(double a, double b, double h0, int n, double g = 1.0);

// Mirror of geometric_from clustering toward b.
Rule geometric_to(double a, double b, double h0, int n, double g = 1.0);

// Adaptive Gauss-Kronrod with relative tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double rel_tol = 1e-12,
                          double* error_estimate = nullptr);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Growth by more than 'growth' per refinement step for 'consecutive'
// consecutive steps. Non-finite entries count as growth.
bool refinement_divergent(const std::vector<double>& values,
                          double growth = 0.10, int consecutive = 3);

// Deterministic parallel map: result[i] = f(i), computed by a bounded pool
// of workers, returned in index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f, unsigned max_workers = 0) {
  std::vector<T> out(n);
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned workers = max_workers ? std::min(max_workers, hw) : hw;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) out[i] = f(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace lsreg
