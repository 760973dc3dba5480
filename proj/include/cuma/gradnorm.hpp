#pragma once

// Differentiable gradient-difference norm: the scalar
//   ||grad L(theta + h*dir) - grad L(theta)|| / |h|
// built as a tape node so a second reverse pass can differentiate it with
// respect to theta. The direction is a constant; no gradient flows into it.

#include <cmath>
#include <functional>

#include "cuma/param.hpp"

namespace cuma::ad {

// Builds the scalar loss for a given parameter binding. Rebuildable at
// shifted parameters, which is what the two-point gradient difference needs.
using LossBuilder = std::function<Var(Tape&, const ParamBinding&)>;

namespace detail {

// Second gradient evaluation at theta + h*direction, then the scaled norm of
// the difference against the precomputed gradient g0.
inline Var gradnorm_tail(Tape& tape, const LossBuilder& loss, const ParamBinding& theta,
                         std::span<const Var> g0, const ParamVector& direction, double h) {
  const bool keep_graph = tape.grad_mode();

  ParamBinding shifted;
  shifted.names = theta.names;
  shifted.vars.reserve(theta.vars.size());
  for (std::size_t i = 0; i < theta.vars.size(); ++i) {
    const Tensor& d = direction.segments[i].value;
    Var step = tape.constant(kernels::map(d, [h](double x) { return h * x; }));
    shifted.vars.push_back(add(theta.vars[i], step));
  }

  // d/d theta of L(theta + h*dir) is the gradient evaluated at the shifted
  // point, so differentiating against the original leaves is exact.
  Var loss_shifted = loss(tape, shifted);
  std::vector<Var> gh = grad(loss_shifted, theta.vars, {.create_graph = keep_graph});

  std::vector<Var> flat_diffs;
  flat_diffs.reserve(theta.vars.size());
  for (std::size_t i = 0; i < theta.vars.size(); ++i) {
    Var d = sub(gh[i], g0[i]);
    flat_diffs.push_back(reshape(d, 1, static_cast<int>(tape.value(d).numel())));
  }
  Var diff = concat_cols(flat_diffs);
  return scale(l2norm(diff), 1.0 / std::fabs(h));
}

}  // namespace detail

inline Var gradnorm_scaled(Tape& tape, const LossBuilder& loss, const ParamBinding& theta,
                           const ParamVector& direction, double h) {
  require(h != 0.0, "gradnorm: difference step h must be nonzero");
  require(direction.segments.size() == theta.vars.size(),
          "gradnorm: direction layout does not match parameters");

  Var loss_at_theta = loss(tape, theta);
  std::vector<Var> g0 = grad(loss_at_theta, theta.vars, {.create_graph = tape.grad_mode()});
  return detail::gradnorm_tail(tape, loss, theta, g0, direction, h);
}

// Gradient of the scaled gradient-difference norm with respect to theta.
// Requires a gradient-mode tape (the inner reverse pass must stay on tape).
inline std::vector<Var> grad_of_gradnorm(Tape& tape, const LossBuilder& loss,
                                         const ParamBinding& theta, const ParamVector& direction,
                                         double h) {
  Var c = gradnorm_scaled(tape, loss, theta, direction, h);
  return grad(c, theta.vars, {.create_graph = false});
}

}  // namespace cuma::ad
