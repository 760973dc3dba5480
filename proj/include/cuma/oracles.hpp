#pragma once

// Independent numerical oracles used by the test suites and the gradcheck
// command. Everything here checks the differentiation path from the
// outside: loss values only (central differences) or exact first-order
// gradients (dense Hessian assembly), never the code under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cuma/param.hpp"

namespace cuma::oracle {

using LossValueFn = std::function<double(const ad::ParamVector&)>;
using GradFn = std::function<std::vector<double>(const ad::ParamVector&)>;  // flat gradient

// Central finite differences of a scalar function, flat layout.
inline std::vector<double> fd_gradient(const LossValueFn& f, const ad::ParamVector& theta,
                                       double step) {
  ad::ParamVector work = theta;
  std::vector<double> flat = theta.flatten();
  std::vector<double> g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + step;
    work.unflatten(flat);
    const double fp = f(work);
    flat[i] = orig - step;
    work.unflatten(flat);
    const double fm = f(work);
    flat[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  work.unflatten(flat);
  return g;
}

// max_i |a_i - b_i| / (1 + |b_i|), the gradcheck error measure.
inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "max_rel_err: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = std::fabs(a[i] - b[i]) / (1.0 + std::fabs(b[i]));
    worst = std::max(worst, e);
  }
  return worst;
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::fabs(b)); }

// Dense Hessian of the loss by central differences of exact gradients,
// symmetrized, then power iteration for the largest singular value.
// Affordable for parameter counts up to a few hundred.
inline double hessian_spectral_norm(const GradFn& grad_fn, const ad::ParamVector& theta,
                                    double fd_step = 1e-4, double tol = 1e-10,
                                    int max_iters = 10000) {
  ad::ParamVector work = theta;
  std::vector<double> flat = theta.flatten();
  const std::size_t n = flat.size();

  std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const double orig = flat[j];
    flat[j] = orig + fd_step;
    work.unflatten(flat);
    const std::vector<double> gp = grad_fn(work);
    flat[j] = orig - fd_step;
    work.unflatten(flat);
    const std::vector<double> gm = grad_fn(work);
    flat[j] = orig;
    for (std::size_t i = 0; i < n; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * fd_step);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (h[i][j] + h[j][i]);
      h[i][j] = s;
      h[j][i] = s;
    }

  // Power iteration on the symmetric matrix; |dominant eigenvalue| is the
  // spectral norm.
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  double prev = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> hv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += h[i][j] * v[j];
      hv[i] = s;
    }
    double norm = 0.0;
    for (double x : hv) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / norm;
    if (it > 0 && std::fabs(norm - prev) <= tol * std::max(1.0, std::fabs(norm))) return norm;
    prev = norm;
  }
  fail("hessian_spectral_norm: power iteration did not converge in ", max_iters, " steps");
}

// Literal triple loop over both indices and the bandwidth set, term by term.
inline double mmd2_naive(std::span<const double> p, std::span<const double> q,
                         std::span<const double> bandwidths) {
  auto k = [&](double x, double y) {
    double s = 0.0;
    for (double bw : bandwidths) s += std::exp(-(x - y) * (x - y) / (2.0 * bw * bw));
    return s;
  };
  const double m = static_cast<double>(p.size());
  const double n = static_cast<double>(q.size());
  double acc = 0.0;
  for (double x : p)
    for (double x2 : p) acc += k(x, x2) / (m * m);
  for (double x : p)
    for (double y : q) acc -= 2.0 * k(x, y) / (m * n);
  for (double y : q)
    for (double y2 : q) acc += k(y, y2) / (n * n);
  return acc;
}

struct SuiteResult {
  std::string name;
  bool pass = false;
  double max_err = 0.0;
  std::string note;
};

}  // namespace cuma::oracle
