#pragma once

// Per-sample loss-curvature estimation: the dominant Hessian direction is
// approximated in one shot by the normalized gradient sign, and the
// curvature by the scaled finite difference of gradients along it. Values
// are non-negative scalars; on gradient-mode tapes they are live nodes, so
// the curvature-matching loss can be trained through them.

#include <optional>
#include <string>
#include <vector>

#include "cuma/gradnorm.hpp"
#include "cuma/losses.hpp"
#include "cuma/nn.hpp"

namespace cuma::curv {

using ad::ParamBinding;
using ad::ParamVector;
using ad::Tape;
using ad::Tensor;
using ad::Var;

struct CurvatureSample {
  int id = 0;
  int group = 0;
  double value = 0.0;
};

// sign(g) / ||sign(g)||, with sign(0) contributing 0. Returns nothing at an
// exactly flat point; the caller takes the curvature as zero there.
inline std::optional<ParamVector> estimate_direction(const ParamVector& g) {
  ParamVector dir = g.zeros_like();
  long nonzero = 0;
  for (std::size_t s = 0; s < g.segments.size(); ++s) {
    const Tensor& src = g.segments[s].value;
    Tensor& dst = dir.segments[s].value;
    for (std::size_t i = 0; i < src.numel(); ++i) {
      require(std::isfinite(src.v[i]), "estimate_direction: non-finite gradient entry");
      if (src.v[i] > 0.0) {
        dst.v[i] = 1.0;
        ++nonzero;
      } else if (src.v[i] < 0.0) {
        dst.v[i] = -1.0;
        ++nonzero;
      }
    }
  }
  if (nonzero == 0) return std::nullopt;
  const double inv_norm = 1.0 / std::sqrt(static_cast<double>(nonzero));
  for (auto& seg : dir.segments)
    for (double& x : seg.value.v) x *= inv_norm;
  return dir;
}

// Builds the curvature estimate for one sample as a tape node:
//   || grad L(theta + h*v) - grad L(theta) || / |h|,  v = sign dir of grad L.
inline Var curvature_graph(Tape& tape, const ad::LossBuilder& sample_loss,
                           const ParamBinding& theta, double h) {
  require(h != 0.0, "curvature: difference step h must be nonzero");

  Var loss_at_theta = sample_loss(tape, theta);
  std::vector<Var> g0 = grad(loss_at_theta, theta.vars, {.create_graph = tape.grad_mode()});

  std::optional<ParamVector> dir = estimate_direction(ad::materialize(theta, g0));
  if (!dir) return tape.constant(Tensor::scalar(0.0));  // flat point
  return ad::detail::gradnorm_tail(tape, sample_loss, theta, g0, *dir, h);
}

// Eval-mode per-sample classification loss: the utility path only, so the
// adversary parameters never enter the curvature graph.
inline ad::LossBuilder sample_loss_builder(const nn::MlpSpec& spec, Tensor x_row, int y) {
  return [spec, x_row = std::move(x_row), y](Tape& t, const ParamBinding& p) {
    nn::ForwardOut out = nn::forward_graph(t, spec, p, t.constant(x_row), nullptr, false, 0.0);
    const int label[1] = {y};
    return nn::loss_clf(out.utility, label);
  };
}

// Value-only curvature of one sample under the current parameters.
inline double curvature_fd(const nn::FairModel& model, const Tensor& x_row, int y, double h,
                           int sample_id = -1) {
  ParamVector theta_st;
  for (const auto& seg : model.params.segments)
    if (seg.name.rfind(nn::kAdversaryPrefix, 0) != 0) theta_st.segments.push_back(seg);

  Tape tape;
  ParamBinding p = ad::bind(tape, theta_st);
  Var c = curvature_graph(tape, sample_loss_builder(model.spec, x_row, y), p, h);
  const double value = tape.value(c).item();
  require(std::isfinite(value), "curvature: non-finite estimate for sample ", sample_id);
  return value;
}

struct GroupCurvatures {
  std::vector<Var> group0;
  std::vector<Var> group1;
  std::vector<CurvatureSample> samples;  // input order, both groups
};

// Per-sample curvature nodes for a batch, partitioned by the sensitive
// attribute. Assembled in input order so downstream MMD values are
// deterministic. `theta` must bind the backbone and utility head.
inline GroupCurvatures group_curvatures(Tape& tape, const nn::MlpSpec& spec,
                                        const ParamBinding& theta, const Tensor& x,
                                        std::span<const int> y, std::span<const int> a, double h,
                                        std::span<const int> sample_ids = {}) {
  require(x.rows == static_cast<int>(y.size()) && y.size() == a.size(),
          "group_curvatures: batch size mismatch");
  GroupCurvatures out;
  for (int i = 0; i < x.rows; ++i) {
    Tensor row(1, x.cols);
    for (int j = 0; j < x.cols; ++j) row.at(0, j) = x.at(i, j);
    const int id = sample_ids.empty() ? i : sample_ids[static_cast<std::size_t>(i)];
    Var c = curvature_graph(tape, sample_loss_builder(spec, std::move(row), y[i]), theta, h);
    const double value = tape.value(c).item();
    require(std::isfinite(value), "curvature: non-finite estimate for sample ", id);
    (a[i] == 0 ? out.group0 : out.group1).push_back(c);
    out.samples.push_back({id, a[i], value});
  }
  return out;
}

}  // namespace cuma::curv
