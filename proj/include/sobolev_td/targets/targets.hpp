#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/critics/critic.hpp"
#include "sobolev_td/envs/env.hpp"
#include "sobolev_td/targets/first_order_target.hpp"

namespace sobolev_td {

/// Max-target with the bootstrap action taken as the argmax of the target
/// critic over a scalar action grid (ties go to the smallest action). a' is
/// treated as a constant: no d a'/d s' term enters the gradients.
FirstOrderTarget max_target(const CriticModel& q_model, std::span<const double> q_targ_params,
                            const TransitionRecord& trans, double gamma, std::span<const double> a_grid);

/// Batched form; one dense evaluation of the target critic over all
/// (s'_i, a_j) pairs.
std::vector<FirstOrderTarget> max_targets(const CriticModel& q_model, std::span<const double> q_targ_params,
                                          std::span<const TransitionRecord> batch, double gamma,
                                          std::span<const double> a_grid);

/// Actor-critic target a' = mu_targ(s'), differentiated through the target
/// policy: bracket = dQ/ds' + (dmu/ds')^T dQ/da', then pulled back through
/// df/ds and df/da.
FirstOrderTarget actor_target(const CriticModel& q_model, std::span<const double> q_targ_params,
                              const LinearActor& mu_targ, const TransitionRecord& trans, double gamma);

using TargetFn = std::function<FirstOrderTarget(const Eigen::VectorXd& s, const Eigen::VectorXd& a)>;

struct ConsistencyReport {
  double max_error = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
};

/// Compares (dy/ds, dy/da) from `target` against central differences of y.
/// With `danskin_scoping`, a point is scored only if its bootstrap action is
/// an interior unique argmax that stays put under every perturbation. Points
/// whose perturbations leave the environment's domain are skipped.
ConsistencyReport target_gradient_consistency_check(const TargetFn& target,
                                                    std::span<const std::pair<Eigen::VectorXd, Eigen::VectorXd>> points,
                                                    double h, bool danskin_scoping);

}  // namespace sobolev_td
