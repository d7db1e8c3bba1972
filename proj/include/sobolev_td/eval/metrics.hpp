#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/critics/critic.hpp"
#include "sobolev_td/diff/critic_model.hpp"
#include "sobolev_td/envs/env.hpp"
#include "sobolev_td/oracle/oracle.hpp"

namespace sobolev_td {

constexpr std::size_t kEvalGridPoints = 51;
constexpr std::size_t kPolicyGridPoints = 1001;
constexpr std::size_t kMcHorizon = 200;
constexpr std::size_t kMcStarts = 21;

/// Evaluation points (s_i, a_i), stored as parallel columns.
struct EvalPoints {
  Eigen::MatrixXd s;  // state_dim x n
  Eigen::MatrixXd a;  // action_dim x n
  std::size_t size() const { return static_cast<std::size_t>(s.cols()); }
};

/// Tensor grid over [-1, 1]^2 for scalar state and action.
EvalPoints scalar_eval_grid(std::size_t n_s = kEvalGridPoints, std::size_t n_a = kEvalGridPoints);
/// Scalar dims: the tensor grid. Otherwise n_s * n_a seeded uniform points in
/// the unit box.
EvalPoints lqr_eval_points(std::size_t state_dim, std::size_t action_dim, std::size_t n_s = kEvalGridPoints,
                           std::size_t n_a = kEvalGridPoints);

struct MetricsRow {
  std::size_t step = 0;
  std::uint64_t seed = 0;
  double q_mse = 0.0;
  double grad_a_mse = 0.0;
  double policy_err = 0.0;
  double mc_return = 0.0;
};

// ---- Toy1D --------------------------------------------------------------

double q_mse(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
             const EvalPoints& grid);
double grad_a_mse(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                  const EvalPoints& grid);

/// argmax_a Q(s, a) over a_grid for each s; ties go to the smallest a.
std::vector<double> greedy_actions(const CriticModel& model, std::span<const double> params,
                                   std::span<const double> states, std::span<const double> a_grid);

/// Mean over s_grid of (greedy(s) - pi*(s))^2.
double policy_error(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                    std::span<const double> s_grid, std::span<const double> a_grid);

using Policy = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Mean over starts of sum_{t < horizon} gamma^t r_t under a deterministic policy.
double mc_return(const Policy& policy, const Environment& env, std::span<const Eigen::VectorXd> starts,
                 std::size_t horizon, double gamma);

/// Deterministic policy that caches greedy actions per state. On Toy1D every
/// state after the first step is a grid action, so the cache stays small.
Policy memoized_greedy_policy(const CriticModel& model, std::span<const double> params, std::vector<double> a_grid);

/// Uniform scalar start states on [-1, 1].
std::vector<Eigen::VectorXd> scalar_starts(std::size_t n = kMcStarts);

struct ToyEvalSpec {
  EvalPoints grid = scalar_eval_grid();
  std::vector<double> policy_states = uniform_grid(kEvalGridPoints);
  std::vector<double> policy_actions = uniform_grid(kPolicyGridPoints);
  std::vector<Eigen::VectorXd> starts = scalar_starts();
  std::size_t horizon = kMcHorizon;
};

MetricsRow toy_metrics(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                       const Toy1DEnv& env, const ToyEvalSpec& spec = {});

// ---- LQR ----------------------------------------------------------------

double lqr_q_mse(const CriticModel& model, std::span<const double> params, const LqrEnv& env,
                 const RiccatiSolution& sol, const EvalPoints& pts);
double lqr_grad_a_mse(const CriticModel& model, std::span<const double> params, const LqrEnv& env,
                      const RiccatiSolution& sol, const EvalPoints& pts);
/// Mean over the state columns of |K s + K* s|^2 (the optimal action is -K* s).
double lqr_policy_error(const LinearActor& actor, const RiccatiSolution& sol, const Eigen::MatrixXd& states);

struct LqrEvalSpec {
  EvalPoints points;
  Eigen::MatrixXd policy_states;
  std::vector<Eigen::VectorXd> starts;
  std::size_t horizon = kMcHorizon;
};

LqrEvalSpec default_lqr_eval_spec(const LqrEnv& env);

MetricsRow lqr_metrics(const CriticModel& model, std::span<const double> params, const LinearActor& actor,
                       const LqrEnv& env, const RiccatiSolution& sol, const LqrEvalSpec& spec);

// ---- aggregation ----------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct AggregateRow {
  std::size_t step = 0;
  std::size_t n_seeds = 0;
  MeanStd q_mse;
  MeanStd grad_a_mse;
  MeanStd policy_err;
  MeanStd mc_return;
};

/// Per-step mean and sample standard deviation over seeds. Every seed must
/// report the same set of steps.
std::vector<AggregateRow> aggregate_seeds(std::span<const MetricsRow> rows);

}  // namespace sobolev_td
