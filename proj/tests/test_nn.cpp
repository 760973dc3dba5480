#include <cstdio>
#include <filesystem>
#include <random>

#include "cuma/losses.hpp"
#include "cuma/nn.hpp"
#include "gtest/gtest.h"

using namespace cuma;
using ad::ParamBinding;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

nn::MlpSpec small_spec(int d, std::uint64_t seed) {
  nn::MlpSpec s;
  s.input_dim = d;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(InitModel, SeededDeterminismAndVariation) {
  nn::FairModel a = nn::init_model(small_spec(10, 42));
  nn::FairModel b = nn::init_model(small_spec(10, 42));
  EXPECT_EQ(a.params.flatten(), b.params.flatten());

  nn::FairModel c = nn::init_model(small_spec(10, 43));
  EXPECT_NE(a.params.flatten(), c.params.flatten());
}

TEST(InitModel, BackboneParameterCount) {
  nn::FairModel m = nn::init_model(small_spec(10, 1));
  std::size_t backbone = 0;
  for (const auto& seg : m.params.segments)
    if (seg.name.rfind("fs.", 0) == 0) backbone += seg.value.numel();
  EXPECT_EQ(backbone, 7564u);  // 10*100+100 + 100*64+64
  EXPECT_EQ(backbone, m.spec.backbone_param_count());
}

TEST(InitModel, CountFormulaHoldsForArbitraryD) {
  for (int d : {1, 3, 17, 41}) {
    nn::FairModel m = nn::init_model(small_spec(d, 5));
    std::size_t backbone = 0, per_head[2] = {0, 0};
    for (const auto& seg : m.params.segments) {
      if (seg.name.rfind("fs.", 0) == 0) backbone += seg.value.numel();
      if (seg.name.rfind("ht.", 0) == 0) per_head[0] += seg.value.numel();
      if (seg.name.rfind("ha.", 0) == 0) per_head[1] += seg.value.numel();
    }
    EXPECT_EQ(backbone, static_cast<std::size_t>(d) * 100 + 100 + 100 * 64 + 64);
    EXPECT_EQ(per_head[0], m.spec.head_param_count());
    EXPECT_EQ(per_head[1], per_head[0]);  // identical adversary structure
  }
}

TEST(InitModel, BiasesZeroWeightsNot) {
  nn::FairModel m = nn::init_model(small_spec(6, 9));
  for (const auto& seg : m.params.segments) {
    const bool is_bias = seg.name.find(".b") != std::string::npos;
    double norm = 0.0;
    for (double x : seg.value.v) norm += x * x;
    if (is_bias) {
      EXPECT_EQ(norm, 0.0) << seg.name;
    } else {
      EXPECT_GT(norm, 0.0) << seg.name;
    }
  }
}

TEST(Forward, EvalModeIsDeterministic) {
  nn::FairModel m = nn::init_model(small_spec(8, 3));
  Tensor x(3, 8);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.v) v = normal(rng);

  Tensor l1 = nn::eval_logits(m, x);
  Tensor l2 = nn::eval_logits(m, x);
  EXPECT_EQ(l1.v, l2.v);
}

TEST(Forward, ZeroWeightModelGivesZeroLogits) {
  nn::FairModel m = nn::init_model(small_spec(5, 1));
  for (auto& seg : m.params.segments)
    for (double& v : seg.value.v) v = 0.0;
  Tensor x = Tensor::filled(2, 5, 1.3);
  Tensor logits = nn::eval_logits(m, x);
  for (double v : logits.v) EXPECT_EQ(v, 0.0);
}

TEST(Forward, WidthMismatchRejected) {
  nn::FairModel m = nn::init_model(small_spec(5, 1));
  EXPECT_THROW(nn::eval_logits(m, Tensor(2, 4)), Error);
}

// Inverted dropout: the mask average compensates the drop rate, so the mean
// train-mode activation approaches the eval activation.
TEST(Forward, DropoutMeanMatchesEvalWithinTwoPercent) {
  nn::MlpSpec spec = small_spec(5, 21);
  nn::FairModel m = nn::init_model(spec);
  Tensor x(1, 5);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.v) v = normal(rng);

  Tensor eval_repr;
  {
    Tape t;
    ParamBinding p = ad::bind(t, m.params);
    nn::ForwardOut out = nn::forward_graph(t, spec, p, t.constant(x), nullptr, false, 0.0);
    eval_repr = t.value(out.repr);
  }

  const int trials = 40000;
  nn::DropoutSampler drop(99, spec.dropout);
  Tensor mean(1, spec.repr_dim);
  for (int i = 0; i < trials; ++i) {
    Tape t;
    ParamBinding p = ad::bind(t, m.params);
    nn::ForwardOut out = nn::forward_graph(t, spec, p, t.constant(x), &drop, false, 0.0);
    const Tensor& r = t.value(out.repr);
    for (std::size_t k = 0; k < r.numel(); ++k) mean.v[k] += r.v[k] / trials;
  }
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t k = 0; k < mean.numel(); ++k) {
    err2 += (mean.v[k] - eval_repr.v[k]) * (mean.v[k] - eval_repr.v[k]);
    ref2 += eval_repr.v[k] * eval_repr.v[k];
  }
  EXPECT_LT(std::sqrt(err2 / ref2), 0.02);
}

TEST(GradReverse, ForwardIdentity) {
  Tape t;
  Var x = t.leaf(Tensor::row({1.5, -2.0}));
  Var y = ad::grad_reverse(x, 1.0);
  EXPECT_EQ(t.value(y).v, (std::vector<double>{1.5, -2.0}));
}

TEST(GradReverse, BackwardFlipsSign) {
  Tape t;
  Var x = t.leaf(Tensor::row({0.5, 2.0}));
  Var c = t.constant(Tensor::row({3.0, -1.0}));
  Var loss = ad::sum(ad::mul(ad::grad_reverse(x, 1.0), c));
  std::vector<Var> g = ad::grad(loss, {x});
  EXPECT_EQ(t.value(g[0]).v, (std::vector<double>{-3.0, 1.0}));
}

TEST(GradReverse, ZeroStrengthBlocksBackbone) {
  Tape t;
  Var x = t.leaf(Tensor::row({0.5, 2.0}));
  Var c = t.constant(Tensor::row({3.0, -1.0}));
  Var loss = ad::sum(ad::mul(ad::grad_reverse(x, 0.0), c));
  std::vector<Var> g = ad::grad(loss, {x});
  EXPECT_EQ(t.value(g[0]).v, (std::vector<double>{0.0, 0.0}));
}

// Two-parameter min-max toy: one descent step through the reversal moves the
// adversary parameter downhill on its loss while the backbone parameter
// moves uphill.
TEST(GradReverse, MinMaxUpdateDirections) {
  const double w0 = 1.0, v0 = 0.5;
  Tape t;
  Var w = t.leaf(Tensor::scalar(w0));  // backbone
  Var v = t.leaf(Tensor::scalar(v0));  // adversary head
  Var xin = t.constant(Tensor::scalar(1.0));
  Var repr = ad::mul(w, xin);
  Var pred = ad::mul(v, ad::grad_reverse(repr, 1.0));
  Var target = t.constant(Tensor::scalar(1.0));
  Var err = ad::sub(pred, target);
  Var l_adv = ad::mul(err, err);  // (v*w - 1)^2

  std::vector<Var> g = ad::grad(l_adv, {w, v});
  const double gw = t.value(g[0]).item();
  const double gv = t.value(g[1]).item();

  // True partials of l_adv: d/dv = 2(vw-1)w = -1, d/dw = 2(vw-1)v = -0.5.
  EXPECT_DOUBLE_EQ(gv, -1.0);      // descent step decreases l_adv for v
  EXPECT_DOUBLE_EQ(gw, 0.5);       // reversed: descent step increases l_adv via w
}

TEST(Losses, GroupL1HalfDeviation) {
  // Adversary emitting probability 0.5 everywhere: equal logits.
  Tape t;
  Var logits = t.leaf(Tensor(4, 2));
  std::vector<int> a{0, 0, 1, 1};
  Var l = nn::loss_adv_group_l1(logits, a);
  EXPECT_NEAR(t.value(l).item(), 0.5, 1e-12);

  Var lce = nn::loss_adv_ce(logits, a);
  EXPECT_NEAR(t.value(lce).item(), std::log(2.0), 1e-12);
}

TEST(Losses, PerfectAdversaryGivesZero) {
  Tape t;
  Tensor z(4, 2);
  std::vector<int> a{0, 1, 0, 1};
  for (int i = 0; i < 4; ++i) {
    z.at(i, a[static_cast<std::size_t>(i)]) = 40.0;
    z.at(i, 1 - a[static_cast<std::size_t>(i)]) = -40.0;
  }
  Var logits = t.leaf(z);
  EXPECT_NEAR(t.value(nn::loss_adv_ce(logits, a)).item(), 0.0, 1e-12);
  EXPECT_NEAR(t.value(nn::loss_adv_group_l1(logits, a)).item(), 0.0, 1e-12);
}

TEST(Losses, GroupL1NeedsBothGroups) {
  Tape t;
  Var logits = t.leaf(Tensor(3, 2));
  std::vector<int> a{0, 0, 0};
  EXPECT_THROW(nn::loss_adv_group_l1(logits, a), Error);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  nn::FairModel m = nn::init_model(small_spec(7, 123));
  const std::string path = std::filesystem::temp_directory_path() / "cuma_ckpt_test.json";
  nn::save_checkpoint(m, path);
  nn::FairModel r = nn::load_checkpoint(path);
  EXPECT_EQ(m.params.flatten(), r.params.flatten());
  EXPECT_TRUE(m.spec == r.spec);
  std::remove(path.c_str());
}

TEST(ParamVector, FlattenUnflattenIdentity) {
  nn::FairModel m = nn::init_model(small_spec(4, 6));
  std::vector<double> flat = m.params.flatten();
  ad::ParamVector copy = m.params.zeros_like();
  copy.unflatten(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_THROW(m.params.add("fs.w1", Tensor(1, 1)), Error);  // duplicate name
}
