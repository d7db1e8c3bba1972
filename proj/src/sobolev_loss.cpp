#include "sobolev_td/diff/sobolev_loss.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include <omp.h>

namespace sobolev_td {

namespace {

std::vector<double> concat_input(std::span<const double> s, std::span<const double> a) {
  std::vector<double> x(s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

void check_batch(const CriticModel& model, std::span<const double> params, std::span<const SobolevSample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  for (const auto& smp : batch) {
    model.check_dims({smp.s.data(), static_cast<std::size_t>(smp.s.size())},
                     {smp.a.data(), static_cast<std::size_t>(smp.a.size())});
  }
  (void)params;
}

// Returns false when the model has no batched kernel.
bool try_batched(const CriticModel& model, std::span<const double> params, std::span<const SobolevSample> batch,
                 double lambda_s, double lambda_a, bool tangents, LossAndGrad& out) {
  const std::size_t n = batch.size();
  const std::size_t ds = model.state_dim();
  const std::size_t d = model.input_dim();
  std::vector<double> inputs(d * n);
  std::vector<double> y(n);
  std::vector<double> dy(tangents ? d * n : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const SobolevSample& smp = batch[i];
    std::copy_n(smp.s.data(), ds, inputs.data() + i * d);
    std::copy_n(smp.a.data(), d - ds, inputs.data() + i * d + ds);
    y[i] = smp.target.y;
    if (tangents) {
      std::copy_n(smp.target.dy_ds.data(), ds, dy.data() + i * d);
      std::copy_n(smp.target.dy_da.data(), d - ds, dy.data() + i * d + ds);
    }
  }
  std::vector<double> terms(n, 0.0);
  out.grad.assign(params.size(), 0.0);
  if (!model.batched_loss(params, inputs, y, dy, lambda_s, lambda_a, tangents, terms, out.grad)) return false;
  double total = 0.0;
  for (double t : terms) total += t;
  out.loss = total / static_cast<double>(n);
  return true;
}

template <typename PerSample>
LossAndGrad reduce_batch(std::size_t num_params, std::size_t n, Exec exec, PerSample&& per_sample) {
  std::vector<double> terms(n, 0.0);
  std::vector<std::vector<double>> grads(n);
  auto run = [&](auto& scratch, std::size_t i) {
    grads[i].assign(num_params, 0.0);
    terms[i] = per_sample(scratch, i, std::span<double>(grads[i]));
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel
    {
      typename std::decay_t<PerSample>::Scratch scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) run(scratch, static_cast<std::size_t>(i));
    }
  } else {
    typename std::decay_t<PerSample>::Scratch scratch;
    for (std::size_t i = 0; i < n; ++i) run(scratch, i);
  }
  LossAndGrad out;
  out.grad.assign(num_params, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += terms[i];
    for (std::size_t p = 0; p < num_params; ++p) out.grad[p] += grads[i][p];
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

struct SobolevPerSample {
  struct Scratch {
    std::unique_ptr<ParamTape> tape;
  };
  const CriticModel& model;
  std::span<const double> params;
  std::span<const SobolevSample> batch;
  double lambda_s;
  double lambda_a;

  double operator()(Scratch& scratch, std::size_t i, std::span<double> grad) const {
    const std::size_t ds = model.state_dim();
    const std::size_t da = model.action_dim();
    const std::size_t d = ds + da;
    if (!scratch.tape) scratch.tape = std::make_unique<ParamTape>(params, d);
    ParamTape& tape = *scratch.tape;
    tape.clear();
    tape.rebind(params);

    const SobolevSample& smp = batch[i];
    const auto x = concat_input({smp.s.data(), ds}, {smp.a.data(), da});
    const auto out = model.record(tape, tape.seeded_input(x));
    const double q = tape.value(out)[0];
    const auto t = tape.tangents(out);

    const double err = q - smp.target.y;
    const std::size_t n = batch.size();
    std::vector<double> tangent_seed(d, 0.0);
    double grad_s = 0.0;
    for (std::size_t j = 0; j < ds; ++j) {
      const double e = t[j] - smp.target.dy_ds[static_cast<Eigen::Index>(j)];
      grad_s += e * e;
      tangent_seed[j] = 2.0 * lambda_s * e / static_cast<double>(n);
    }
    double grad_a = 0.0;
    for (std::size_t j = 0; j < da; ++j) {
      const double e = t[ds + j] - smp.target.dy_da[static_cast<Eigen::Index>(j)];
      grad_a += e * e;
      tangent_seed[ds + j] = 2.0 * lambda_a * e / static_cast<double>(n);
    }
    const double seed = value_seed(err, n);
    tape.backward(out, {&seed, 1}, tangent_seed, grad);
    return err * err + lambda_s * grad_s + lambda_a * grad_a;
  }
};

struct ValuePerSample {
  struct Scratch {
    PlainCache cache;
  };
  const CriticModel& model;
  std::span<const double> params;
  std::span<const SobolevSample> batch;

  double operator()(Scratch& scratch, std::size_t i, std::span<double> grad) const {
    const SobolevSample& smp = batch[i];
    const auto x = concat_input({smp.s.data(), model.state_dim()}, {smp.a.data(), model.action_dim()});
    model.forward_plain(params, x, scratch.cache);
    const double err = scratch.cache.q - smp.target.y;
    model.backprop_plain(params, x, scratch.cache, value_seed(err, batch.size()), grad);
    return err * err;
  }
};

}  // namespace

CriticEval eval_with_input_grads(const CriticModel& model, std::span<const double> params,
                                 std::span<const double> s, std::span<const double> a) {
  model.check_dims(s, a);
  const std::size_t ds = s.size();
  const std::size_t da = a.size();
  ParamTape tape(params, ds + da);
  const auto x = concat_input(s, a);
  const auto out = model.record(tape, tape.seeded_input(x));
  const auto t = tape.tangents(out);
  CriticEval e;
  e.q = tape.value(out)[0];
  e.gs = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(ds));
  e.ga = Eigen::Map<const Eigen::VectorXd>(t.data() + ds, static_cast<Eigen::Index>(da));
  return e;
}

LossAndGrad sobolev_loss_and_param_grads(const CriticModel& model, std::span<const double> params,
                                         std::span<const SobolevSample> batch, double lambda_s, double lambda_a,
                                         Exec exec) {
  if (lambda_s < 0.0 || lambda_a < 0.0) throw std::invalid_argument("sobolev loss: negative lambda");
  check_batch(model, params, batch);
  for (const auto& smp : batch) {
    if (static_cast<std::size_t>(smp.target.dy_ds.size()) != model.state_dim() ||
        static_cast<std::size_t>(smp.target.dy_da.size()) != model.action_dim()) {
      throw std::invalid_argument("sobolev loss: target gradient dimension mismatch");
    }
  }
  LossAndGrad out;
  if (exec == Exec::Parallel && try_batched(model, params, batch, lambda_s, lambda_a, true, out)) return out;
  return reduce_batch(params.size(), batch.size(), exec,
                      SobolevPerSample{model, params, batch, lambda_s, lambda_a});
}

LossAndGrad value_loss_and_param_grads(const CriticModel& model, std::span<const double> params,
                                       std::span<const SobolevSample> batch, Exec exec) {
  check_batch(model, params, batch);
  LossAndGrad out;
  if (exec == Exec::Parallel && try_batched(model, params, batch, 0.0, 0.0, false, out)) return out;
  return reduce_batch(params.size(), batch.size(), exec, ValuePerSample{model, params, batch});
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace sobolev_td
