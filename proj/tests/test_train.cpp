#include <cmath>
#include <map>

#include "cuma/train.hpp"
#include "gtest/gtest.h"

using namespace cuma;
using ad::ParamBinding;
using ad::ParamVector;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// Small synthetic problem reused across the loop tests.
data::SynthResult small_problem(std::uint64_t seed, int n = 320) {
  data::SynthSpec spec;
  spec.n = n;
  spec.d = 12;
  spec.seed = seed;
  return data::synth_biased(spec);
}

train::TrainConfig small_config(train::Method method, std::uint64_t seed) {
  train::TrainConfig c;
  c.method = method;
  c.seed = seed;
  c.epochs = 2;
  c.batch_size = 32;
  c.mlp.backbone_hidden = 24;
  c.mlp.repr_dim = 16;
  c.mlp.head_hidden = 8;
  return c;
}

// Eval-mode classification loss of a model on a dataset.
double clf_loss(const nn::FairModel& m, const data::EncodedDataset& ds) {
  Tape t;
  ParamBinding p = ad::bind(t, m.params);
  nn::ForwardOut out = nn::forward_graph(t, m.spec, p, t.constant(ds.x), nullptr, false, 0.0);
  return t.value(nn::loss_clf(out.utility, ds.y)).item();
}

double initial_clf_loss(const train::TrainConfig& cfg, const data::EncodedDataset& ds) {
  train::TrainConfig c = cfg;
  c.mlp.input_dim = ds.dim();
  c.mlp.seed = c.seed;
  return clf_loss(nn::init_model(c.mlp), ds);
}

}  // namespace

TEST(LossClf, PerfectAndUniform) {
  Tape t;
  std::vector<int> y{1, 0, 1};
  Tensor confident(3, 2);
  for (int i = 0; i < 3; ++i) {
    confident.at(i, y[static_cast<std::size_t>(i)]) = 50.0;
    confident.at(i, 1 - y[static_cast<std::size_t>(i)]) = -50.0;
  }
  EXPECT_NEAR(t.value(nn::loss_clf(t.leaf(confident), y)).item(), 0.0, 1e-12);

  Var uniform = t.leaf(Tensor(4, 2));
  std::vector<int> y4{0, 1, 0, 1};
  EXPECT_NEAR(t.value(nn::loss_clf(uniform, y4)).item(), std::log(2.0), 1e-12);
}

TEST(LossClf, BatchMeanEqualsMeanOfPerSampleLosses) {
  Tape t;
  Tensor z(3, 2, {1.0, -0.5, 0.2, 0.9, -2.0, 1.5});
  std::vector<int> y{0, 1, 1};
  const double batch = t.value(nn::loss_clf(t.leaf(z), y)).item();
  double mean = 0.0;
  for (int i = 0; i < 3; ++i) {
    Tensor row(1, 2, {z.at(i, 0), z.at(i, 1)});
    const int label[1] = {y[static_cast<std::size_t>(i)]};
    mean += t.value(nn::loss_clf(t.leaf(row), label)).item() / 3.0;
  }
  EXPECT_NEAR(batch, mean, 1e-14);
}

TEST(CosineSchedule, Endpoints) {
  EXPECT_DOUBLE_EQ(train::cosine_lr(0, 100, 1e-3), 1e-3);
  EXPECT_NEAR(train::cosine_lr(100, 100, 1e-3), 0.0, 1e-18);
  EXPECT_NEAR(train::cosine_lr(50, 100, 1e-3), 5e-4, 1e-18);
}

TEST(Adam, FirstStepHandValue) {
  ParamVector p;
  p.add("w", Tensor::scalar(1.0));
  ParamVector g;
  g.add("w", Tensor::scalar(0.5));
  train::AdamState s = train::AdamState::like(p);
  train::adam_step(s, p, g, 1e-3, 0.0);
  // m_hat = g, v_hat = g^2 at t=1: delta = -lr * g / (|g| + eps)
  EXPECT_NEAR(p.at("w").item() - 1.0, -9.99998e-4, 1e-8);
  EXPECT_NEAR(p.at("w").item() - 1.0, -1e-3 * 0.5 / (0.5 + 1e-8), 1e-15);
}

TEST(Adam, WeightDecayEntersGradient) {
  ParamVector p;
  p.add("w", Tensor::scalar(2.0));
  ParamVector g;
  g.add("w", Tensor::scalar(0.0));
  train::AdamState s = train::AdamState::like(p);
  train::adam_step(s, p, g, 1e-3, 0.1);
  // Effective gradient 0.1*2 = 0.2; first step moves by about -lr.
  EXPECT_NEAR(p.at("w").item() - 2.0, -1e-3 * 0.2 / (0.2 + 1e-8), 1e-15);
}

TEST(TrainLoop, NormalObjectiveIsPureClassifierLoss) {
  data::SynthResult prob = small_problem(3);
  train::TrainConfig cfg = small_config(train::Method::kNormal, 3);
  train::TrainResult r = train::train(cfg, prob.train, {});
  ASSERT_FALSE(r.epochs.empty());
  for (const auto& rec : r.epochs)
    for (const auto& b : rec.batches) {
      EXPECT_EQ(b.total, b.clf);  // bitwise: alpha = gamma = 0
      EXPECT_EQ(b.adv, 0.0);
      EXPECT_EQ(b.cm, 0.0);
    }
}

TEST(TrainLoop, BreakdownIdentityPerBatch) {
  data::SynthResult prob = small_problem(5);
  train::TrainConfig cfg = small_config(train::Method::kCuma, 5);
  cfg.epochs = 1;
  cfg.alpha = 0.7;
  cfg.gamma = 1.3;
  train::TrainResult r = train::train(cfg, prob.train, {});
  ASSERT_TRUE(r.cm_active);
  bool saw_cm = false;
  for (const auto& b : r.epochs[0].batches) {
    EXPECT_EQ(b.total, b.clf - cfg.alpha * b.adv + cfg.gamma * b.cm);
    saw_cm = saw_cm || b.cm != 0.0;
  }
  EXPECT_TRUE(saw_cm);
}

TEST(TrainLoop, CumaGammaZeroIsBitIdenticalToAdvDebias) {
  data::SynthResult prob = small_problem(7);
  train::TrainConfig cuma_cfg = small_config(train::Method::kCuma, 7);
  cuma_cfg.gamma = 0.0;
  train::TrainConfig adv_cfg = small_config(train::Method::kAdvDebias, 7);

  train::TrainResult a = train::train(cuma_cfg, prob.train, {});
  train::TrainResult b = train::train(adv_cfg, prob.train, {});
  EXPECT_EQ(a.model.params.flatten(), b.model.params.flatten());
}

TEST(TrainLoop, DeterministicCheckpoints) {
  data::SynthResult prob = small_problem(9);
  train::TrainConfig cfg = small_config(train::Method::kCuma, 9);
  cfg.epochs = 1;
  train::TrainResult a = train::train(cfg, prob.train, {});
  train::TrainResult b = train::train(cfg, prob.train, {});
  EXPECT_EQ(a.model.params.flatten(), b.model.params.flatten());
}

TEST(TrainLoop, CurvatureLossHasZeroAdversaryGradient) {
  data::SynthResult prob = small_problem(11, 160);
  nn::MlpSpec spec;
  spec.input_dim = prob.train.dim();
  spec.backbone_hidden = 16;
  spec.repr_dim = 12;
  spec.head_hidden = 6;
  spec.seed = 2;
  nn::FairModel model = nn::init_model(spec);

  Tape tape(true);
  ParamBinding binding = ad::bind(tape, model.params);
  ParamBinding theta_st;
  for (std::size_t s = 0; s < binding.names.size(); ++s)
    if (binding.names[s].rfind("ha.", 0) != 0) {
      theta_st.names.push_back(binding.names[s]);
      theta_st.vars.push_back(binding.vars[s]);
    }

  Tensor bx = ad::Tensor(8, prob.train.dim());
  std::vector<int> by, ba;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < bx.cols; ++j) bx.at(i, j) = prob.train.x.at(i, j);
    by.push_back(prob.train.y[static_cast<std::size_t>(i)]);
    ba.push_back(i % 2);
  }
  curv::GroupCurvatures gc = curv::group_curvatures(tape, spec, theta_st, bx, by, ba, 1.0);
  Var l_cm = mmd::mmd2_graph(gc.group0, gc.group1, {});
  std::vector<Var> g = ad::grad(l_cm, binding.vars);

  for (std::size_t s = 0; s < binding.names.size(); ++s) {
    const bool is_adversary = binding.names[s].rfind("ha.", 0) == 0;
    double norm = 0.0;
    for (double x : tape.value(g[s]).v) norm += x * x;
    if (is_adversary) {
      EXPECT_EQ(norm, 0.0) << binding.names[s];
    }
  }
}

TEST(TrainLoop, FirstEpochDecreasesTrainingLoss) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    data::SynthResult prob = small_problem(seed, 512);
    for (auto method : {train::Method::kNormal, train::Method::kAdvDebias,
                        train::Method::kLaftrGnl1, train::Method::kCuma}) {
      train::TrainConfig cfg = small_config(method, seed);
      cfg.epochs = 1;
      cfg.batch_size = 16;
      const double before = initial_clf_loss(cfg, prob.train);
      train::TrainResult r = train::train(cfg, prob.train, {});
      EXPECT_LT(clf_loss(r.model, prob.train), before)
          << train::method_to_string(method) << " seed " << seed;
    }
  }
}

TEST(TrainLoop, CumaRequiresBothGroups) {
  data::SynthResult prob = small_problem(13, 200);
  data::EncodedDataset single = prob.train;
  for (int& a : single.a) a = 0;
  train::TrainConfig cfg = small_config(train::Method::kCuma, 13);
  EXPECT_THROW(train::train(cfg, single, {}), Error);
}

TEST(Finetune, ZeroEpochsKeepsParameters) {
  data::SynthResult prob = small_problem(15);
  train::TrainConfig cfg = small_config(train::Method::kNormal, 15);
  train::TrainResult base = train::train(cfg, prob.train, {});

  train::TrainConfig ft = cfg;
  ft.epochs = 0;
  train::TrainResult same = train::finetune(base.model, ft, prob.train, {});
  EXPECT_EQ(same.model.params.flatten(), base.model.params.flatten());
}

TEST(Finetune, FreshOptimizerStateAndSchedule) {
  data::SynthResult prob = small_problem(17);
  train::TrainConfig cfg = small_config(train::Method::kAdvDebias, 17);
  train::TrainResult base = train::train(cfg, prob.train, {});

  // Finetuning from the checkpoint equals training a model whose initial
  // parameters are the checkpoint: no moments carry over.
  train::TrainConfig ft = cfg;
  ft.epochs = 1;
  train::TrainResult a = train::finetune(base.model, ft, prob.train, {});
  train::TrainResult b = train::train(ft, prob.train, {}, base.model);
  EXPECT_EQ(a.model.params.flatten(), b.model.params.flatten());
  EXPECT_NE(a.model.params.flatten(), base.model.params.flatten());
}

TEST(Finetune, SpecMismatchRejected) {
  data::SynthResult prob = small_problem(19);
  train::TrainConfig cfg = small_config(train::Method::kNormal, 19);
  train::TrainResult base = train::train(cfg, prob.train, {});

  train::TrainConfig other = cfg;
  other.mlp.repr_dim = 20;
  EXPECT_THROW(train::finetune(base.model, other, prob.train, {}), Error);
}

// With noise_gap = 0 the two groups are geometrically identical, so normal
// training shows no systematic group accuracy gap.
TEST(SynthGenerator, ZeroNoiseGapGivesBalancedAccuracy) {
  double gap_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    data::SynthSpec sp;
    sp.n = 1200;
    sp.d = 12;
    sp.noise_gap = 0.0;
    sp.seed = seed;
    data::SynthResult prob = data::synth_biased(sp);

    train::TrainConfig cfg = small_config(train::Method::kNormal, seed);
    cfg.epochs = 8;
    train::TrainResult r = train::train(cfg, prob.train, {});

    std::vector<int> yhat = nn::predict(r.model, prob.test.x);
    double acc[2] = {0.0, 0.0};
    long n[2] = {0, 0};
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      const int g = prob.test.a[i];
      acc[g] += yhat[i] == prob.test.y[i];
      n[g] += 1;
    }
    gap_sum += acc[0] / n[0] - acc[1] / n[1];
  }
  EXPECT_LT(std::fabs(gap_sum / 5.0), 0.03);
}

TEST(TrainLoop, EvalMetricsRecordedPerEpochAndSet) {
  data::SynthResult prob = small_problem(21);
  train::TrainConfig cfg = small_config(train::Method::kNormal, 21);
  std::map<std::string, data::EncodedDataset> evals{{"in_dist", prob.test}};
  train::TrainResult r = train::train(cfg, prob.train, evals);
  for (const auto& rec : r.epochs) {
    ASSERT_EQ(rec.eval.size(), 1u);
    const auto& m = rec.eval.at("in_dist");
    EXPECT_GE(m.accuracy, 0.0);
    EXPECT_LE(m.accuracy, 1.0);
    EXPECT_GE(m.delta_eo, 0.0);
    EXPECT_LE(m.delta_eo, 2.0);
  }
}
