#pragma once

// Training engine: the joint objective L_clf - alpha*L_adv + gamma*L_cm
// minimized with a single Adam optimizer. The adversary head sits behind
// gradient reversal, so one descent step performs the min-max update; the
// curvature-matching term is the squared MMD between per-sample curvature
// distributions of the two sensitive groups.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cuma/curvature.hpp"
#include "cuma/data.hpp"
#include "cuma/fairness.hpp"
#include "cuma/losses.hpp"
#include "cuma/mmd.hpp"
#include "cuma/nn.hpp"

namespace cuma::train {

using ad::ParamBinding;
using ad::ParamVector;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Method { kNormal, kAdvDebias, kLaftrGnl1, kCuma };

inline Method method_from_string(const std::string& s) {
  if (s == "normal") return Method::kNormal;
  if (s == "advdebias") return Method::kAdvDebias;
  if (s == "laftr-gnl1") return Method::kLaftrGnl1;
  if (s == "cuma") return Method::kCuma;
  fail("train: unknown method '", s, "' (expected normal|advdebias|laftr-gnl1|cuma)");
}

inline std::string method_to_string(Method m) {
  switch (m) {
    case Method::kNormal: return "normal";
    case Method::kAdvDebias: return "advdebias";
    case Method::kLaftrGnl1: return "laftr-gnl1";
    case Method::kCuma: return "cuma";
  }
  return "?";
}

struct TrainConfig {
  Method method = Method::kCuma;
  double alpha = 1.0;
  double gamma = 1.0;
  double h = 1.0;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  int epochs = 50;
  int batch_size = 128;
  std::uint64_t seed = 1;
  nn::MlpSpec mlp;  // input_dim filled from the dataset when 0
  mmd::KernelSpec kernel;

  void validate() const {
    require(alpha >= 0.0 && gamma >= 0.0, "train: alpha and gamma must be non-negative");
    require(epochs >= 0, "train: epochs must be non-negative");
    require(batch_size >= 4, "train: batch size must be at least 4");
    require(lr > 0.0, "train: learning rate must be positive");
    require(h != 0.0, "train: curvature step h must be nonzero");
  }
};

// Cosine annealing over T optimizer steps: lr(0) = lr0, lr(T) = 0.
inline double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps <= 0) return lr0;
  const double t = std::min<double>(static_cast<double>(step), static_cast<double>(total_steps));
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * t / static_cast<double>(total_steps)));
}

struct AdamState {
  ParamVector m;
  ParamVector v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const ParamVector& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

// One Adam update. Weight decay enters as an additive lambda*theta gradient
// term. `mask` selects the segments to update (empty = all).
inline void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads, double lr,
                      double weight_decay, const std::vector<bool>& mask = {}) {
  require(params.same_layout(grads) && params.same_layout(state.m),
          "adam: parameter/gradient layout mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t s = 0; s < params.segments.size(); ++s) {
    if (!mask.empty() && !mask[s]) continue;
    auto& p = params.segments[s].value.v;
    const auto& g = grads.segments[s].value.v;
    auto& m = state.m.segments[s].value.v;
    auto& v = state.v.segments[s].value.v;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + weight_decay * p[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

struct LossBreakdown {
  double clf = 0.0;
  double adv = 0.0;
  double cm = 0.0;
  double total = 0.0;  // clf - alpha*adv + gamma*cm, per batch

  static LossBreakdown assemble(double clf, double adv, double cm, double alpha, double gamma) {
    return {clf, adv, cm, clf - alpha * adv + gamma * cm};
  }
};

struct EvalMetrics {
  double accuracy = 0.0;
  double delta_eo = 0.0;
  double delta_dp = 0.0;
};

inline EvalMetrics evaluate(const nn::FairModel& model, const data::EncodedDataset& d) {
  std::vector<int> yhat = nn::predict(model, d.x);
  EvalMetrics m;
  m.accuracy = fair::accuracy(yhat, d.y);
  m.delta_eo = fair::delta_eo(yhat, d.y, d.a);
  m.delta_dp = fair::delta_dp(yhat, d.a);
  return m;
}

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // value used for the last step of the epoch
  LossBreakdown loss;                  // epoch means
  std::vector<LossBreakdown> batches;  // per-batch identity: total = clf - a*adv + g*cm
  std::map<std::string, EvalMetrics> eval;
};

struct TrainResult {
  nn::FairModel model;
  std::vector<EpochRecord> epochs;
  std::vector<curv::CurvatureSample> last_curvatures;  // train-set dump, cuma only
  bool cm_active = false;
};

namespace detail {

inline Tensor rows_subset(const Tensor& x, const std::vector<std::size_t>& idx) {
  Tensor out(static_cast<int>(idx.size()), x.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < x.cols; ++j) out.at(static_cast<int>(i), j) = x.at(static_cast<int>(idx[i]), j);
  return out;
}

template <typename T>
std::vector<T> subset(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace detail

// Trains a model on the encoded training set, evaluating on each named set
// after every epoch. Deterministic given the config seed. `init_from`
// resumes from existing parameters (finetuning) with fresh optimizer state
// and a fresh learning-rate schedule.
inline TrainResult train(const TrainConfig& config_in, const data::EncodedDataset& train_set,
                         const std::map<std::string, data::EncodedDataset>& eval_sets,
                         const std::optional<nn::FairModel>& init_from = std::nullopt) {
  TrainConfig config = config_in;
  config.validate();
  if (config.mlp.input_dim == 0) config.mlp.input_dim = train_set.dim();
  require(config.mlp.input_dim == train_set.dim(), "train: model input width ",
          config.mlp.input_dim, " does not match data width ", train_set.dim());
  config.mlp.seed = config.seed;

  // normal training is the degenerate objective alpha = gamma = 0.
  const bool build_adversary = config.method != Method::kNormal;
  const double alpha = build_adversary ? config.alpha : 0.0;
  const bool want_cm = config.method == Method::kCuma && config.gamma > 0.0;
  const double gamma = config.method == Method::kCuma ? config.gamma : 0.0;

  TrainResult result;
  if (init_from) {
    require(init_from->spec == config.mlp, "finetune: checkpoint spec does not match config");
    result.model = *init_from;
  } else {
    result.model = nn::init_model(config.mlp);
  }
  nn::FairModel& model = result.model;

  // Adversary parameters stay frozen under normal training.
  std::vector<bool> update_mask;
  for (const auto& seg : model.params.segments)
    update_mask.push_back(build_adversary || seg.name.rfind(nn::kAdversaryPrefix, 0) != 0);

  // Group availability decides whether curvature matching can run at all.
  int group_counts[2] = {0, 0};
  for (int a : train_set.a) group_counts[a]++;
  if (config.method == Method::kCuma) {
    require(group_counts[0] > 0 && group_counts[1] > 0,
            "train: cuma needs both sensitive groups in the training set");
  }
  const bool cm_possible = group_counts[0] >= 2 && group_counts[1] >= 2;
  result.cm_active = want_cm && cm_possible;

  AdamState adam = AdamState::like(model.params);
  nn::DropoutSampler dropout(substream_seed(config.seed, "dropout"), config.mlp.dropout);

  const long batches_per_epoch = static_cast<long>(
      (train_set.n() + config.batch_size - 1) / config.batch_size);
  const long total_steps = static_cast<long>(config.epochs) * batches_per_epoch;
  long step = 0;

  // Indices of the utility-path segments, bound per batch for curvature.
  ParamVector theta_st_layout;
  for (const auto& seg : model.params.segments)
    if (seg.name.rfind(nn::kAdversaryPrefix, 0) != 0)
      theta_st_layout.segments.push_back({seg.name, Tensor(seg.value.rows, seg.value.cols)});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    data::BatchPlan plan = data::stratified_batches(
        train_set.a, config.batch_size,
        substream_seed(config.seed, "batch.epoch" + std::to_string(epoch)));

    double sum_clf = 0.0, sum_adv = 0.0, sum_cm = 0.0, sum_total = 0.0;
    double last_lr = cosine_lr(step, total_steps, config.lr);
    std::vector<curv::CurvatureSample> epoch_curvatures;
    std::vector<LossBreakdown> batch_records;

    for (const auto& batch : plan.batches) {
      Tensor bx = detail::rows_subset(train_set.x, batch);
      std::vector<int> by = detail::subset(train_set.y, batch);
      std::vector<int> ba = detail::subset(train_set.a, batch);

      int batch_groups[2] = {0, 0};
      for (int a : ba) batch_groups[a]++;
      const bool cm_this_batch =
          result.cm_active && batch_groups[0] >= 2 && batch_groups[1] >= 2;

      Tape tape(cm_this_batch);
      ParamBinding binding = ad::bind(tape, model.params);
      nn::ForwardOut out = nn::forward_graph(tape, config.mlp, binding, tape.constant(bx),
                                             &dropout, build_adversary, alpha);

      Var l_clf = nn::loss_clf(out.utility, by);
      Var objective = l_clf;
      double adv_value = 0.0;
      if (build_adversary) {
        Var l_adv = config.method == Method::kLaftrGnl1
                        ? nn::loss_adv_group_l1(out.adversary, ba)
                        : nn::loss_adv_ce(out.adversary, ba);
        adv_value = tape.value(l_adv).item();
        // Reversal already carries -alpha into the backbone; the head itself
        // descends the raw adversary loss.
        objective = ad::add(objective, l_adv);
      }

      double cm_value = 0.0;
      if (cm_this_batch) {
        ParamBinding theta_st;
        for (std::size_t s = 0; s < binding.names.size(); ++s) {
          if (binding.names[s].rfind(nn::kAdversaryPrefix, 0) != 0) {
            theta_st.names.push_back(binding.names[s]);
            theta_st.vars.push_back(binding.vars[s]);
          }
        }
        std::vector<int> ids;
        for (std::size_t i : batch) ids.push_back(static_cast<int>(i));
        curv::GroupCurvatures gc =
            curv::group_curvatures(tape, config.mlp, theta_st, bx, by, ba, config.h, ids);
        Var l_cm = mmd::mmd2_graph(gc.group0, gc.group1, config.kernel);
        cm_value = tape.value(l_cm).item();
        objective = ad::add(objective, ad::scale(l_cm, gamma));
        if (epoch == config.epochs)
          epoch_curvatures.insert(epoch_curvatures.end(), gc.samples.begin(), gc.samples.end());
      }

      const double clf_value = tape.value(l_clf).item();
      LossBreakdown lb = LossBreakdown::assemble(clf_value, adv_value, cm_value, alpha, gamma);
      require(std::isfinite(tape.value(objective).item()),
              "train: non-finite loss at epoch ", epoch, " (clf=", lb.clf, ", adv=", lb.adv,
              ", cm=", lb.cm, ", batch of ", batch.size(), ")");

      std::vector<Var> grads = ad::grad(objective, binding.vars);
      ParamVector grad_values = ad::materialize(binding, grads);

      last_lr = cosine_lr(step, total_steps, config.lr);
      adam_step(adam, model.params, grad_values, last_lr, config.weight_decay, update_mask);
      ++step;

      sum_clf += lb.clf;
      sum_adv += lb.adv;
      sum_cm += lb.cm;
      sum_total += lb.total;
      batch_records.push_back(lb);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = last_lr;
    const double nb = static_cast<double>(plan.batches.size());
    rec.loss = {sum_clf / nb, sum_adv / nb, sum_cm / nb, sum_total / nb};
    rec.batches = std::move(batch_records);
    for (const auto& [name, ds] : eval_sets) rec.eval[name] = evaluate(model, ds);
    result.epochs.push_back(std::move(rec));
    if (!epoch_curvatures.empty()) result.last_curvatures = std::move(epoch_curvatures);
  }

  return result;
}

// Resumes from a checkpoint with fresh optimizer state and schedule.
inline TrainResult finetune(const nn::FairModel& checkpoint, const TrainConfig& config,
                            const data::EncodedDataset& train_set,
                            const std::map<std::string, data::EncodedDataset>& eval_sets) {
  return train(config, train_set, eval_sets, checkpoint);
}

}  // namespace cuma::train
