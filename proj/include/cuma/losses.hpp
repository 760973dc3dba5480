#pragma once

// Loss assembly on the tape: mean softmax cross-entropy for the utility and
// adversary heads, plus the group-normalized l1 adversary variant.

#include <span>
#include <vector>

#include "cuma/tape.hpp"

namespace cuma::nn {

namespace detail {

// Row-wise log-softmax. The max shift is a constant; the expression stays an
// exact identity for any fixed shift, so gradients of all orders are exact.
inline ad::Var log_softmax(ad::Var logits) {
  ad::Tape& t = *logits.tape;
  const int rows = t.value(logits).rows;
  const int cols = t.value(logits).cols;
  ad::Tensor shift(rows, 1);
  {
    const ad::Tensor& z = t.value(logits);
    for (int i = 0; i < rows; ++i) {
      double m = z.at(i, 0);
      for (int j = 1; j < cols; ++j) m = std::max(m, z.at(i, j));
      shift.v[static_cast<std::size_t>(i)] = m;
    }
  }
  ad::Var centered = ad::sub(logits, ad::repeat_cols(t.constant(std::move(shift)), cols));
  ad::Var lse = ad::log(ad::rowsum(ad::exp(centered)));
  return ad::sub(centered, ad::repeat_cols(lse, cols));
}

inline ad::Tensor one_hot(std::span<const int> labels, int n_classes) {
  ad::Tensor t(static_cast<int>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < n_classes, "one_hot: label ", labels[i],
            " out of range [0,", n_classes, ")");
    t.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return t;
}

}  // namespace detail

// Mean cross-entropy of the utility logits against binary targets.
inline ad::Var loss_clf(ad::Var logits, std::span<const int> y) {
  ad::Tape& t = *logits.tape;
  const int rows = t.value(logits).rows;
  const int cols = t.value(logits).cols;
  require(static_cast<int>(y.size()) == rows, "loss_clf: ", y.size(), " labels for ", rows,
          " rows");
  ad::Var logp = detail::log_softmax(logits);
  ad::Var picked = ad::rowsum(ad::mul(logp, t.constant(detail::one_hot(y, cols))));
  return ad::scale(ad::sum(picked), -1.0 / rows);
}

// Mean cross-entropy of the adversary logits against the sensitive labels.
inline ad::Var loss_adv_ce(ad::Var logits, std::span<const int> a) { return loss_clf(logits, a); }

// Group-normalized l1 adversary loss:
//   0.5 * sum_j mean_{i in group j} | p_a(x_i) - a_i |
// with p_a the adversary's predicted probability of a=1.
inline ad::Var loss_adv_group_l1(ad::Var logits, std::span<const int> a) {
  ad::Tape& t = *logits.tape;
  const int rows = t.value(logits).rows;
  require(t.value(logits).cols == 2, "loss_adv_group_l1: needs binary logits, got ",
          shape_str(t.value(logits)));
  require(static_cast<int>(a.size()) == rows, "loss_adv_group_l1: ", a.size(), " labels for ",
          rows, " rows");

  int n1 = 0;
  for (int ai : a) n1 += ai;
  const int n0 = static_cast<int>(a.size()) - n1;
  require(n0 > 0 && n1 > 0, "loss_adv_group_l1: both sensitive groups must be present");

  ad::Var p1 = ad::exp(ad::rowsum(
      ad::mul(detail::log_softmax(logits),
              t.constant(detail::one_hot(std::vector<int>(a.size(), 1), 2)))));

  ad::Tensor targets(rows, 1);
  ad::Tensor w0(rows, 1);
  ad::Tensor w1(rows, 1);
  for (int i = 0; i < rows; ++i) {
    targets.v[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)];
    (a[static_cast<std::size_t>(i)] == 0 ? w0 : w1).v[static_cast<std::size_t>(i)] = 1.0;
  }
  ad::Var dev = ad::abs(ad::sub(p1, t.constant(std::move(targets))));
  ad::Var mean0 = ad::scale(ad::sum(ad::mul(dev, t.constant(std::move(w0)))), 1.0 / n0);
  ad::Var mean1 = ad::scale(ad::sum(ad::mul(dev, t.constant(std::move(w1)))), 1.0 / n1);
  return ad::scale(ad::add(mean0, mean1), 0.5);
}

}  // namespace cuma::nn
