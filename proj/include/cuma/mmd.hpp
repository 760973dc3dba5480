#pragma once

// Empirical squared maximum mean discrepancy between two scalar samples,
// mixed RBF kernel k(x,y) = sum_{s in S} exp(-(x-y)^2 / (2 s^2)). The
// estimator is the biased V-statistic: diagonal terms included in all three
// blocks.

#include <span>
#include <vector>

#include "cuma/tape.hpp"

namespace cuma::mmd {

struct KernelSpec {
  std::vector<double> bandwidths = {1.0, 2.0, 4.0, 8.0, 16.0};

  void validate() const {
    require(!bandwidths.empty(), "kernel: bandwidth set must be nonempty");
    for (double s : bandwidths) require(s > 0.0, "kernel: bandwidth must be positive, got ", s);
  }
};

inline double kernel(double x, double y, const KernelSpec& spec = {}) {
  spec.validate();
  const double d2 = (x - y) * (x - y);
  double k = 0.0;
  for (double s : spec.bandwidths) k += std::exp(-d2 / (2.0 * s * s));
  return k;
}

// Plain-value estimator; pair distances computed once, bandwidths inside.
inline double mmd2(std::span<const double> p, std::span<const double> q,
                   const KernelSpec& spec = {}) {
  spec.validate();
  require(!p.empty() && !q.empty(), "mmd2: samples must be nonempty (got ", p.size(), " and ",
          q.size(), ")");
  const std::size_t m = p.size();
  const std::size_t n = q.size();

  auto block = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (double x : a)
      for (double y : b) s += kernel(x, y, spec);
    return s;
  };

  return block(p, p) / (static_cast<double>(m) * m) -
         2.0 * block(p, q) / (static_cast<double>(m) * n) +
         block(q, q) / (static_cast<double>(n) * n);
}

namespace detail {

// sum_ij k(u_i, v_j) as a tape node; u, v are 1xM / 1xN rows of sample values.
inline ad::Var kernel_block_sum(ad::Var u, ad::Var v, const KernelSpec& spec) {
  ad::Tape& t = *u.tape;
  const int m = t.value(u).cols;
  const int n = t.value(v).cols;
  ad::Var diff = ad::sub(ad::repeat_cols(ad::transpose(u), n), ad::repeat_rows(v, m));
  ad::Var d2 = ad::mul(diff, diff);
  ad::Var total{};
  for (double s : spec.bandwidths) {
    ad::Var term = ad::sum(ad::exp(ad::scale(d2, -1.0 / (2.0 * s * s))));
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

}  // namespace detail

// Differentiable estimator over scalar tape nodes.
inline ad::Var mmd2_graph(std::span<const ad::Var> p, std::span<const ad::Var> q,
                          const KernelSpec& spec = {}) {
  spec.validate();
  require(!p.empty() && !q.empty(), "mmd2: samples must be nonempty (got ", p.size(), " and ",
          q.size(), ")");
  ad::Tape& t = *p[0].tape;
  for (ad::Var v : p) require(t.value(v).numel() == 1, "mmd2: sample entries must be scalars");
  for (ad::Var v : q) require(t.value(v).numel() == 1, "mmd2: sample entries must be scalars");

  std::vector<ad::Var> pf(p.begin(), p.end());
  std::vector<ad::Var> qf(q.begin(), q.end());
  for (ad::Var& v : pf) v = ad::reshape(v, 1, 1);
  for (ad::Var& v : qf) v = ad::reshape(v, 1, 1);
  ad::Var pr = pf.size() == 1 ? pf[0] : ad::concat_cols(pf);
  ad::Var qr = qf.size() == 1 ? qf[0] : ad::concat_cols(qf);

  const double m = static_cast<double>(p.size());
  const double n = static_cast<double>(q.size());
  ad::Var pp = ad::scale(detail::kernel_block_sum(pr, pr, spec), 1.0 / (m * m));
  ad::Var pq = ad::scale(detail::kernel_block_sum(pr, qr, spec), -2.0 / (m * n));
  ad::Var qq = ad::scale(detail::kernel_block_sum(qr, qr, spec), 1.0 / (n * n));
  return ad::add(ad::add(pp, pq), qq);
}

}  // namespace cuma::mmd
