#pragma once

// Release-gate numerical suites: first-order gradients, second-order
// curvature-matching gradients, the curvature estimator against the dense
// Hessian oracle, and the MMD estimator against the literal triple loop.
// Tolerances are fixed here; the gradcheck command and the acceptance suite
// both run these.

#include <random>
#include <vector>

#include "cuma/curvature.hpp"
#include "cuma/mmd.hpp"
#include "cuma/oracles.hpp"
#include "cuma/train.hpp"

namespace cuma::gradcheck {

using ad::LossBuilder;
using ad::ParamBinding;
using ad::ParamVector;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using oracle::SuiteResult;

namespace detail {

struct RandomNet {
  ParamVector theta;
  Tensor input;
  std::size_t layers = 0;

  static RandomNet make(std::uint64_t seed, const std::vector<int>& dims, double weight_std) {
    RandomNet net;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, weight_std);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Tensor w(dims[l], dims[l + 1]);
      for (double& x : w.v) x = normal(rng);
      Tensor b(1, dims[l + 1]);
      for (double& x : b.v) x = normal(rng);
      net.theta.add("w" + std::to_string(l), std::move(w));
      net.theta.add("b" + std::to_string(l), std::move(b));
    }
    net.input = Tensor(1, dims.front());
    for (double& x : net.input.v) x = normal(rng);
    net.layers = dims.size() - 1;
    return net;
  }

  LossBuilder loss_builder() const {
    Tensor x = input;
    const std::size_t layers_n = layers;
    return [x, layers_n](Tape& t, const ParamBinding& p) {
      Var h = t.constant(x);
      for (std::size_t l = 0; l < layers_n; ++l)
        h = ad::tanh(ad::add_rowvec(ad::matmul(h, p.at("w" + std::to_string(l))),
                                    p.at("b" + std::to_string(l))));
      return ad::sum(h);
    };
  }

  double loss_value(const ParamVector& p) const {
    Tape t;
    ParamBinding b = ad::bind(t, p);
    return t.value(loss_builder()(t, b)).item();
  }

  std::vector<double> grad_flat(const ParamVector& p) const {
    Tape t;
    ParamBinding b = ad::bind(t, p);
    std::vector<Var> g = ad::grad(loss_builder()(t, b), b.vars);
    return ad::materialize(b, g).flatten();
  }
};

}  // namespace detail

// Reverse-mode gradients of 10 random MLPs (<= 200 parameters) against
// central finite differences, double precision, tolerance 1e-6.
inline SuiteResult first_order_suite() {
  SuiteResult r{"first-order gradcheck", true, 0.0, "10 nets <=200 params, FD step 1e-5"};
  const std::vector<std::vector<int>> shapes = {{4, 8, 4, 1}, {6, 10, 5, 1}, {8, 12, 4, 2}};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    detail::RandomNet net = detail::RandomNet::make(seed, shapes[seed % shapes.size()], 0.6);
    std::vector<double> auto_g = net.grad_flat(net.theta);
    std::vector<double> fd_g = oracle::fd_gradient(
        [&](const ParamVector& p) { return net.loss_value(p); }, net.theta, 1e-5);
    r.max_err = std::max(r.max_err, oracle::max_rel_err(auto_g, fd_g));
  }
  r.pass = r.max_err < 1e-6;
  return r;
}

// Gradient of the curvature-matching loss (squared MMD over per-sample
// curvature nodes) against central finite differences of its value,
// tolerance 1e-4.
inline SuiteResult second_order_suite() {
  SuiteResult r{"second-order gradcheck (grad of L_cm)", true, 0.0, "FD step 1e-4"};

  nn::MlpSpec spec;
  spec.input_dim = 4;
  spec.backbone_hidden = 6;
  spec.repr_dim = 4;
  spec.head_hidden = 3;
  spec.seed = 5;
  const double h = 1.0;

  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor bx(8, spec.input_dim);
  for (double& v : bx.v) v = normal(rng);
  std::vector<int> by, ba;
  for (int i = 0; i < 8; ++i) {
    by.push_back(i % 2);
    ba.push_back(i < 4 ? 0 : 1);
  }

  nn::FairModel model = nn::init_model(spec);
  ParamVector theta_st;
  for (const auto& seg : model.params.segments)
    if (seg.name.rfind(nn::kAdversaryPrefix, 0) != 0) theta_st.segments.push_back(seg);

  auto lcm_value = [&](const ParamVector& p) {
    Tape t;
    ParamBinding b = ad::bind(t, p);
    curv::GroupCurvatures gc = curv::group_curvatures(t, spec, b, bx, by, ba, h);
    return t.value(mmd::mmd2_graph(gc.group0, gc.group1, {})).item();
  };

  Tape tape(true);
  ParamBinding binding = ad::bind(tape, theta_st);
  curv::GroupCurvatures gc = curv::group_curvatures(tape, spec, binding, bx, by, ba, h);
  Var l_cm = mmd::mmd2_graph(gc.group0, gc.group1, {});
  std::vector<Var> g = ad::grad(l_cm, binding.vars);
  std::vector<double> auto_g = ad::materialize(binding, g).flatten();
  std::vector<double> fd_g = oracle::fd_gradient(lcm_value, theta_st, 1e-4);

  r.max_err = oracle::max_rel_err(auto_g, fd_g);
  r.pass = r.max_err < 1e-4;
  return r;
}

// One-shot curvature estimate against the dense-Hessian spectral norm on 10
// random tanh networks (<= 50 parameters): relative agreement at h = 1e-3
// within 1e-2, dominance by the spectral norm, and exactness on quadratics.
inline SuiteResult curvature_oracle_suite() {
  SuiteResult r{"curvature oracle", true, 0.0, "10 tanh nets <=50 params, h=1e-3"};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    detail::RandomNet net = detail::RandomNet::make(seed + 100, {3, 5, 1}, 0.8);  // 26 params
    LossBuilder loss = net.loss_builder();

    std::vector<double> g0 = net.grad_flat(net.theta);
    ParamVector g0_pv = net.theta.zeros_like();
    g0_pv.unflatten(g0);
    auto dir = curv::estimate_direction(g0_pv);
    if (!dir) continue;

    // ||H v|| by differentiating the directional gradient; the spectral norm
    // by dense assembly + power iteration. Both from exact first-order
    // gradients only.
    const std::size_t n = g0.size();
    std::vector<double> hv(n, 0.0);
    std::vector<double> v = dir->flatten();
    {
      const double step = 1e-5;
      std::vector<double> flat = net.theta.flatten();
      ParamVector work = net.theta;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] == 0.0) continue;
        const double orig = flat[j];
        flat[j] = orig + step;
        work.unflatten(flat);
        std::vector<double> gp = net.grad_flat(work);
        flat[j] = orig - step;
        work.unflatten(flat);
        std::vector<double> gm = net.grad_flat(work);
        flat[j] = orig;
        for (std::size_t i = 0; i < n; ++i) hv[i] += v[j] * (gp[i] - gm[i]) / (2.0 * step);
      }
    }
    double hv_norm = 0.0;
    for (double x : hv) hv_norm += x * x;
    hv_norm = std::sqrt(hv_norm);

    Tape t;
    ParamBinding b = ad::bind(t, net.theta);
    const double c = t.value(curv::curvature_graph(t, loss, b, 1e-3)).item();
    r.max_err = std::max(r.max_err, std::fabs(c - hv_norm) / hv_norm);
    const double sn = oracle::hessian_spectral_norm(
        [&](const ParamVector& p) { return net.grad_flat(p); }, net.theta);
    if (c > sn + 1e-2) {
      r.pass = false;
      r.note = "estimate exceeded spectral norm";
    }
  }
  if (r.max_err >= 1e-2) r.pass = false;

  // Quadratic: curvature lambda, exactly, at every step size.
  const double lambda = 3.0;
  LossBuilder quad = [lambda](Tape&, const ParamBinding& p) {
    Var w = p.at("w");
    return ad::scale(ad::sum(ad::mul(w, w)), 0.5 * lambda);
  };
  ParamVector theta;
  theta.add("w", Tensor::row({0.3, -0.8, 1.7}));
  for (double h : {1e-3, 1.0, 10.0}) {
    Tape t;
    ParamBinding b = ad::bind(t, theta);
    const double c = t.value(curv::curvature_graph(t, quad, b, h)).item();
    if (std::fabs(c - lambda) > 1e-10) {
      r.pass = false;
      r.note = "quadratic curvature not exact";
    }
  }
  return r;
}

// Vectorized MMD against the naive triple loop (1e3 pairs, 1e-12),
// non-negativity (1e4 pairs), identical-multiset zero and the singleton
// closed form.
inline SuiteResult mmd_oracle_suite() {
  SuiteResult r{"mmd oracle", true, 0.0, "1e3 oracle pairs, 1e4 non-negativity trials"};
  mmd::KernelSpec spec;
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal(0.5, 3.0);
  std::uniform_int_distribution<int> len(1, 12);

  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    std::vector<double> q(static_cast<std::size_t>(len(rng)));
    for (double& x : p) x = normal(rng);
    for (double& x : q) x = normal(rng);
    const double naive = oracle::mmd2_naive(p, q, spec.bandwidths);
    r.max_err = std::max(r.max_err, std::fabs(mmd::mmd2(p, q, spec) - naive));

    Tape t;
    std::vector<Var> pv, qv;
    for (double x : p) pv.push_back(t.leaf(Tensor::scalar(x)));
    for (double x : q) qv.push_back(t.leaf(Tensor::scalar(x)));
    r.max_err =
        std::max(r.max_err, std::fabs(t.value(mmd::mmd2_graph(pv, qv, spec)).item() - naive));
  }
  if (r.max_err >= 1e-12) r.pass = false;

  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    std::vector<double> q(static_cast<std::size_t>(len(rng)));
    for (double& x : p) x = normal(rng);
    for (double& x : q) x = normal(rng);
    if (mmd::mmd2(p, q, spec) < -1e-12) {
      r.pass = false;
      r.note = "negative estimate";
    }
  }

  const std::vector<double> s0 = {1.2, -0.4, 9.0};
  if (mmd::mmd2(s0, s0, spec) != 0.0) {
    r.pass = false;
    r.note = "identical multisets nonzero";
  }
  const std::vector<double> a = {0.0}, b = {2.0};
  if (std::fabs(mmd::mmd2(a, b, spec) - 2.828372) > 1e-5) {
    r.pass = false;
    r.note = "singleton closed form off";
  }
  return r;
}

inline std::vector<SuiteResult> run_all() {
  return {first_order_suite(), second_order_suite(), curvature_oracle_suite(),
          mmd_oracle_suite()};
}

}  // namespace cuma::gradcheck
