#pragma once

// Two-head MLP: shared backbone, utility head, adversarial head behind a
// gradient-reversal node. Backbone d -> 100 -> 64, heads 64 -> 32 -> 2,
// ReLU and dropout between the two fully connected layers of each
// sub-network.

#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "cuma/param.hpp"

namespace cuma::nn {

using ad::ParamBinding;
using ad::ParamVector;
using ad::Tape;
using ad::Tensor;
using ad::Var;

struct MlpSpec {
  int input_dim = 0;
  int backbone_hidden = 100;
  int repr_dim = 64;
  int head_hidden = 32;
  int n_classes = 2;
  double dropout = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    require(input_dim > 0, "mlp spec: input_dim must be positive");
    require(backbone_hidden > 0 && repr_dim > 0 && head_hidden > 0 && n_classes > 1,
            "mlp spec: layer widths must be positive");
    require(dropout >= 0.0 && dropout < 1.0, "mlp spec: dropout must be in [0,1)");
  }

  bool operator==(const MlpSpec& o) const {
    return input_dim == o.input_dim && backbone_hidden == o.backbone_hidden &&
           repr_dim == o.repr_dim && head_hidden == o.head_hidden && n_classes == o.n_classes &&
           dropout == o.dropout;
  }

  std::size_t backbone_param_count() const {
    return static_cast<std::size_t>(input_dim) * backbone_hidden + backbone_hidden +
           static_cast<std::size_t>(backbone_hidden) * repr_dim + repr_dim;
  }
  std::size_t head_param_count() const {
    return static_cast<std::size_t>(repr_dim) * head_hidden + head_hidden +
           static_cast<std::size_t>(head_hidden) * n_classes + n_classes;
  }
};

struct FairModel {
  MlpSpec spec;
  ParamVector params;  // fs.* , ht.* , ha.* segments in fixed order
};

inline const char* kBackbonePrefix = "fs.";
inline const char* kUtilityPrefix = "ht.";
inline const char* kAdversaryPrefix = "ha.";

// Fan-in scaled normal init (variance 2/fan_in), zero biases.
inline FairModel init_model(const MlpSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(substream_seed(spec.seed, "init"));
  std::normal_distribution<double> normal(0.0, 1.0);

  auto linear = [&](ParamVector& p, const std::string& prefix, int layer, int fan_in,
                    int fan_out) {
    Tensor w(fan_in, fan_out);
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (double& x : w.v) x = std_dev * normal(rng);
    p.add(prefix + "w" + std::to_string(layer), std::move(w));
    p.add(prefix + "b" + std::to_string(layer), Tensor(1, fan_out));
  };

  FairModel m;
  m.spec = spec;
  linear(m.params, kBackbonePrefix, 1, spec.input_dim, spec.backbone_hidden);
  linear(m.params, kBackbonePrefix, 2, spec.backbone_hidden, spec.repr_dim);
  linear(m.params, kUtilityPrefix, 1, spec.repr_dim, spec.head_hidden);
  linear(m.params, kUtilityPrefix, 2, spec.head_hidden, spec.n_classes);
  linear(m.params, kAdversaryPrefix, 1, spec.repr_dim, spec.head_hidden);
  linear(m.params, kAdversaryPrefix, 2, spec.head_hidden, spec.n_classes);
  return m;
}

// Inverted-dropout mask source; eval passes no sampler and stays
// deterministic.
class DropoutSampler {
 public:
  DropoutSampler(std::uint64_t seed, double p) : rng_(seed), p_(p) {}

  Tensor mask(int rows, int cols) {
    Tensor m(rows, cols);
    if (p_ == 0.0) {
      for (double& x : m.v) x = 1.0;
      return m;
    }
    const double keep_scale = 1.0 / (1.0 - p_);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : m.v) x = u(rng_) < p_ ? 0.0 : keep_scale;
    return m;
  }

 private:
  std::mt19937_64 rng_;
  double p_;
};

struct ForwardOut {
  Var utility;    // logits, batch x n_classes
  Var adversary;  // logits, valid() only when the adversary path was built
  Var repr;       // shared representation, batch x repr_dim
};

namespace detail {

inline Var two_layer(Tape& t, const ParamBinding& p, const std::string& prefix, Var x,
                     double dropout, DropoutSampler* drop) {
  Var h = ad::relu(ad::add_rowvec(ad::matmul(x, p.at(prefix + "w1")), p.at(prefix + "b1")));
  if (drop != nullptr) {
    const Tensor& hv = t.value(h);
    h = ad::mul(h, t.constant(drop->mask(hv.rows, hv.cols)));
  }
  (void)dropout;
  return ad::add_rowvec(ad::matmul(h, p.at(prefix + "w2")), p.at(prefix + "b2"));
}

}  // namespace detail

// Builds the forward graph for a batch. `drop` null means eval mode.
// The adversary head sees the representation through gradient reversal with
// the given strength, so one descent step drives the min-max coupling.
inline ForwardOut forward_graph(Tape& t, const MlpSpec& spec, const ParamBinding& p, Var x,
                                DropoutSampler* drop, bool build_adversary,
                                double reversal_strength) {
  const Tensor& xv = t.value(x);
  require(xv.cols == spec.input_dim, "forward: input width ", xv.cols, " does not match model d=",
          spec.input_dim);

  ForwardOut out;
  out.repr = detail::two_layer(t, p, kBackbonePrefix, x, spec.dropout, drop);
  out.utility = detail::two_layer(t, p, kUtilityPrefix, out.repr, spec.dropout, drop);
  if (build_adversary) {
    Var reversed = ad::grad_reverse(out.repr, reversal_strength);
    out.adversary = detail::two_layer(t, p, kAdversaryPrefix, reversed, spec.dropout, drop);
  }
  return out;
}

// Deterministic eval-mode utility logits for a batch of rows.
inline Tensor eval_logits(const FairModel& m, const Tensor& x) {
  Tape t;
  ParamBinding p = ad::bind(t, m.params);
  ForwardOut out = forward_graph(t, m.spec, p, t.constant(x), nullptr, false, 0.0);
  return t.value(out.utility);
}

inline std::vector<int> predict(const FairModel& m, const Tensor& x) {
  Tensor logits = eval_logits(m, x);
  std::vector<int> yhat(static_cast<std::size_t>(logits.rows));
  for (int i = 0; i < logits.rows; ++i) {
    int best = 0;
    for (int c = 1; c < logits.cols; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    yhat[static_cast<std::size_t>(i)] = best;
  }
  return yhat;
}

// ---------------------------------------------------------------------------
// Checkpoint io (JSON; doubles round-trip bit-exactly)
// ---------------------------------------------------------------------------

inline nlohmann::json spec_to_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim},
          {"backbone_hidden", s.backbone_hidden},
          {"repr_dim", s.repr_dim},
          {"head_hidden", s.head_hidden},
          {"n_classes", s.n_classes},
          {"dropout", s.dropout},
          {"seed", s.seed}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.backbone_hidden = j.at("backbone_hidden").get<int>();
  s.repr_dim = j.at("repr_dim").get<int>();
  s.head_hidden = j.at("head_hidden").get<int>();
  s.n_classes = j.at("n_classes").get<int>();
  s.dropout = j.at("dropout").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline void save_checkpoint(const FairModel& m, const std::string& path) {
  nlohmann::json j;
  j["format"] = "cuma-checkpoint-v1";
  j["spec"] = spec_to_json(m.spec);
  nlohmann::json params = nlohmann::json::object();
  for (const auto& seg : m.params.segments) {
    params[seg.name] = {{"rows", seg.value.rows}, {"cols", seg.value.cols}, {"data", seg.value.v}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  require(out.good(), "checkpoint: cannot write ", path);
  out << j.dump(2) << "\n";
}

inline FairModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "checkpoint: cannot read ", path);
  nlohmann::json j;
  in >> j;
  require(j.value("format", "") == "cuma-checkpoint-v1", "checkpoint: unknown format in ", path);

  FairModel m = init_model(spec_from_json(j.at("spec")));
  for (auto& seg : m.params.segments) {
    const nlohmann::json& pj = j.at("params").at(seg.name);
    Tensor t(pj.at("rows").get<int>(), pj.at("cols").get<int>(),
             pj.at("data").get<std::vector<double>>());
    require(t.same_shape(seg.value), "checkpoint: segment ", seg.name, " has shape ",
            shape_str(t), ", expected ", shape_str(seg.value));
    seg.value = std::move(t);
  }
  return m;
}

}  // namespace cuma::nn
