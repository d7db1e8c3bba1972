#include "sobolev_td/training/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sobolev_td {

namespace {

// Separate streams for parameter init (seeded by the model) and training.
Rng training_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  return Rng(seq);
}

void check_gamma(double cfg_gamma, double oracle_gamma) {
  if (cfg_gamma != oracle_gamma) throw std::invalid_argument("gamma: config and oracle discount differ");
}

bool contains(const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

std::vector<std::size_t> eval_schedule(std::size_t total_steps, std::size_t eval_every) {
  if (eval_every == 0) throw std::invalid_argument("eval-every: must be positive");
  std::vector<std::size_t> steps;
  for (std::size_t s = 0; s < total_steps; s += eval_every) steps.push_back(s);
  steps.push_back(total_steps);
  return steps;
}

RunResult run_experiment(const TrainerConfig& cfg, const CriticModel& model, const Toy1DEnv& env,
                         const GridSolution& oracle, const RunOptions& opts) {
  cfg.validate();
  if (cfg.algo != Algo::QLearning) throw std::invalid_argument("algo: toy1d runs use q_learning");
  check_gamma(cfg.gamma, oracle.gamma);
  check_gamma(cfg.gamma, env.gamma());

  const auto evals = eval_schedule(cfg.total_steps, cfg.eval_every);
  const ToyEvalSpec spec;
  CriticState critic(model.init_params(cfg.seed), cfg.lr);
  Rng rng = training_rng(cfg.seed);
  RunResult res;

  auto observe = [&](std::size_t step) {
    if (!opts.skip_metrics && contains(evals, step)) {
      MetricsRow row = toy_metrics(model, critic.online.values(), oracle, env, spec);
      row.step = step;
      row.seed = cfg.seed;
      res.metrics.push_back(row);
    }
    if (contains(opts.snapshot_steps, step)) res.snapshots.push_back({step, critic.online, std::nullopt});
  };

  observe(0);
  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    train_step_q_learning(cfg, model, critic, env, rng, step);
    observe(step);
  }
  res.final_critic = critic.online;
  return res;
}

RunResult run_experiment(const TrainerConfig& cfg, const CriticModel& model, const LqrEnv& env,
                         const RiccatiSolution& oracle, const RunOptions& opts) {
  cfg.validate();
  if (cfg.algo != Algo::ActorCritic) throw std::invalid_argument("algo: lqr runs use actor_critic");
  check_gamma(cfg.gamma, env.gamma());
  if (oracle.K.rows() != static_cast<Eigen::Index>(env.action_dim()) ||
      oracle.K.cols() != static_cast<Eigen::Index>(env.state_dim())) {
    throw std::invalid_argument("run_experiment: Riccati gain shape does not match the environment");
  }

  const auto evals = eval_schedule(cfg.total_steps, cfg.eval_every);
  const LqrEvalSpec spec = default_lqr_eval_spec(env);
  CriticState critic(model.init_params(cfg.seed), cfg.lr);
  ActorState actor(LinearActor(env.state_dim(), env.action_dim()), cfg.actor_lr);
  Rng rng = training_rng(cfg.seed);
  ReplayBuffer buffer(cfg.replay_capacity);
  Collector collector(cfg, env, rng);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) collector.collect(actor.online, buffer, rng);
  RunResult res;

  auto observe = [&](std::size_t step) {
    if (!opts.skip_metrics && contains(evals, step)) {
      MetricsRow row = lqr_metrics(model, critic.online.values(), actor.online, env, oracle, spec);
      row.step = step;
      row.seed = cfg.seed;
      res.metrics.push_back(row);
    }
    if (contains(opts.snapshot_steps, step)) res.snapshots.push_back({step, critic.online, actor.online});
  };

  observe(0);
  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    collector.collect(actor.online, buffer, rng);
    train_step_actor_critic(cfg, model, critic, actor, buffer, env, rng, step);
    observe(step);
  }
  res.final_critic = critic.online;
  res.final_actor = actor.online;
  return res;
}

}  // namespace sobolev_td
