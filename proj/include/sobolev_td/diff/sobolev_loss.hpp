#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/diff/critic_model.hpp"
#include "sobolev_td/targets/first_order_target.hpp"

namespace sobolev_td {

/// Serial: one tape (or plain pass) per sample, in order. This is the
/// reference. Parallel: the model's fused batched kernel when it has one,
/// otherwise the per-sample path spread over OpenMP threads.
enum class Exec { Serial, Parallel };

/// Q and its input gradients, obtained by seeding one tangent per input
/// coordinate on a fresh tape.
CriticEval eval_with_input_grads(const CriticModel& model, std::span<const double> params,
                                 std::span<const double> s, std::span<const double> a);

struct SobolevSample {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  FirstOrderTarget target;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Batch mean of (Q - y)^2 + lambda_s |dQ/ds - dy/ds|^2 + lambda_a |dQ/da - dy/da|^2
/// and its exact gradient in the parameters (through the input gradients).
///
/// On the per-sample path gradients are reduced in sample order, so thread
/// count does not change the result. A batched kernel agrees with it to
/// rounding. With both lambdas zero either path reproduces
/// value_loss_and_param_grads (same exec) exactly.
LossAndGrad sobolev_loss_and_param_grads(const CriticModel& model, std::span<const double> params,
                                         std::span<const SobolevSample> batch, double lambda_s, double lambda_a,
                                         Exec exec = Exec::Parallel);

/// Batch mean of (Q - y)^2 by plain backprop, no tangents anywhere.
LossAndGrad value_loss_and_param_grads(const CriticModel& model, std::span<const double> params,
                                       std::span<const SobolevSample> batch, Exec exec = Exec::Parallel);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double h);

}  // namespace sobolev_td
