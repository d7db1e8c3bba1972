#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sobolev_td/critics/critic.hpp"
#include "sobolev_td/envs/env.hpp"
#include "sobolev_td/training/optim.hpp"

namespace sobolev_td {

using Rng = std::mt19937_64;

enum class Method { Baseline, Sobolev };
enum class Algo { QLearning, ActorCritic };
/// Which critic loss implementation runs the update. ValueOnly is the plain
/// TD regression without any tangent machinery and requires zero lambdas.
enum class LossPath { Sobolev, ValueOnly };

struct TrainerConfig {
  double gamma = 0.9;
  double lambda_s = 1.0;
  double lambda_a = 1.0;
  double lr = 1e-4;
  double actor_lr = 1e-4;
  std::size_t batch_size = 50;
  std::size_t total_steps = 20000;
  double polyak_rho = 0.995;
  std::size_t warmup_steps = 0;
  std::uint64_t seed = 0;
  std::size_t grid_points = 100;
  Method method = Method::Sobolev;
  Algo algo = Algo::QLearning;
  std::size_t eval_every = 1000;
  LossPath loss_path = LossPath::Sobolev;

  // Actor-critic data collection.
  std::size_t replay_capacity = 100000;
  std::size_t episode_length = 20;
  double explore_sigma = 0.3;
  double init_state_sigma = 1.0;

  /// Zeroes the lambdas for the baseline method.
  void apply_method();
  /// Throws std::invalid_argument naming the offending key.
  void validate() const;

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

/// lambda * min(1, step / warmup_steps); full lambda when warmup_steps == 0.
double effective_lambda(double lambda, std::size_t step, std::size_t warmup_steps);

/// Online and target parameters of a critic plus its optimizer.
struct CriticState {
  FlatParams online;
  FlatParams target;
  AdamState adam;

  CriticState() = default;
  CriticState(FlatParams init, double lr);
};

struct ActorState {
  LinearActor online;
  LinearActor target;
  AdamState adam;

  ActorState(LinearActor init, double lr);
};

/// Bounded FIFO of transitions with their simulator Jacobians.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(TransitionRecord rec);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const TransitionRecord& at(std::size_t i) const { return data_.at(i); }

  /// Uniform sampling with replacement.
  std::vector<TransitionRecord> sample(Rng& rng, std::size_t n) const;

 private:
  std::size_t capacity_;
  std::deque<TransitionRecord> data_;
};

struct StepDiagnostics {
  std::size_t step = 0;
  double critic_loss = 0.0;
  double lambda_s = 0.0;
  double lambda_a = 0.0;
  double actor_objective = 0.0;
};

/// One Q-learning update on a fresh uniform batch from [-1, 1]^2 with
/// max-targets over cfg.grid_points actions. `step` is 1-based.
StepDiagnostics train_step_q_learning(const TrainerConfig& cfg, const CriticModel& model, CriticState& critic,
                                      const Environment& env, Rng& rng, std::size_t step);

/// Behavior policy mu(s) + noise with periodic resets; feeds the replay buffer.
class Collector {
 public:
  Collector(const TrainerConfig& cfg, const Environment& env, Rng& rng);
  /// Takes one environment step and stores the transition.
  void collect(const LinearActor& actor, ReplayBuffer& buffer, Rng& rng);

 private:
  void reset(Rng& rng);

  const Environment& env_;
  std::size_t episode_length_;
  double explore_sigma_;
  double init_state_sigma_;
  Eigen::VectorXd state_;
  std::size_t t_ = 0;
};

/// One actor-critic update from the replay buffer: Sobolev critic step with
/// policy targets, then deterministic policy-gradient ascent on the actor.
StepDiagnostics train_step_actor_critic(const TrainerConfig& cfg, const CriticModel& model, CriticState& critic,
                                        ActorState& actor, const ReplayBuffer& buffer, const Environment& env,
                                        Rng& rng, std::size_t step);

/// (1/B) sum_i dQ/da(s_i, K s_i) s_i^T, flattened column-major like K.
std::vector<double> deterministic_policy_gradient(const CriticModel& model, std::span<const double> critic_params,
                                                  const LinearActor& actor,
                                                  std::span<const TransitionRecord> batch);

}  // namespace sobolev_td
