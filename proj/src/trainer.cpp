#include "sobolev_td/training/trainer.hpp"

#include <algorithm>
#include <stdexcept>

#include "sobolev_td/diff/sobolev_loss.hpp"
#include "sobolev_td/oracle/oracle.hpp"
#include "sobolev_td/targets/targets.hpp"

namespace sobolev_td {

namespace {

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw std::invalid_argument(key + ": " + why);
}

LossAndGrad critic_loss(const TrainerConfig& cfg, const CriticModel& model, const CriticState& critic,
                        std::span<const SobolevSample> batch, double ls, double la) {
  if (cfg.loss_path == LossPath::ValueOnly) {
    if (ls != 0.0 || la != 0.0) throw std::invalid_argument("loss_path: value-only trainer needs zero lambdas");
    return value_loss_and_param_grads(model, critic.online.values(), batch);
  }
  return sobolev_loss_and_param_grads(model, critic.online.values(), batch, ls, la);
}

StepDiagnostics critic_update(const TrainerConfig& cfg, const CriticModel& model, CriticState& critic,
                              std::span<const TransitionRecord> trans, std::vector<FirstOrderTarget> targets,
                              std::size_t step) {
  std::vector<SobolevSample> batch;
  batch.reserve(trans.size());
  for (std::size_t i = 0; i < trans.size(); ++i) batch.push_back({trans[i].s, trans[i].a, std::move(targets[i])});

  StepDiagnostics diag;
  diag.step = step;
  diag.lambda_s = effective_lambda(cfg.lambda_s, step, cfg.warmup_steps);
  diag.lambda_a = effective_lambda(cfg.lambda_a, step, cfg.warmup_steps);
  const LossAndGrad lg = critic_loss(cfg, model, critic, batch, diag.lambda_s, diag.lambda_a);
  adam_step(critic.adam, critic.online.values(), lg.grad);
  diag.critic_loss = lg.loss;
  return diag;
}

}  // namespace

void TrainerConfig::apply_method() {
  if (method == Method::Baseline) {
    lambda_s = 0.0;
    lambda_a = 0.0;
  }
}

void TrainerConfig::validate() const {
  require(gamma >= 0.0 && gamma < 1.0, "gamma", "must lie in [0, 1)");
  require(lambda_s >= 0.0, "lambda-s", "must be non-negative");
  require(lambda_a >= 0.0, "lambda-a", "must be non-negative");
  require(method == Method::Sobolev || (lambda_s == 0.0 && lambda_a == 0.0), "method",
          "baseline requires lambda-s = lambda-a = 0");
  require(lr > 0.0, "lr", "must be positive");
  require(actor_lr > 0.0, "actor-lr", "must be positive");
  require(batch_size > 0, "batch", "must be positive");
  require(polyak_rho >= 0.0 && polyak_rho <= 1.0, "polyak-rho", "must lie in [0, 1]");
  require(grid_points >= 2, "grid-points", "must be at least 2");
  require(eval_every > 0, "eval-every", "must be positive");
  require(replay_capacity > 0, "replay-capacity", "must be positive");
  require(episode_length > 0, "episode-length", "must be positive");
  require(explore_sigma >= 0.0, "explore-sigma", "must be non-negative");
  require(init_state_sigma >= 0.0, "init-state-sigma", "must be non-negative");
  require(loss_path == LossPath::Sobolev || (lambda_s == 0.0 && lambda_a == 0.0), "loss-path",
          "value-only requires zero lambdas");
}

double effective_lambda(double lambda, std::size_t step, std::size_t warmup_steps) {
  if (warmup_steps == 0 || step >= warmup_steps) return lambda;
  return lambda * (static_cast<double>(step) / static_cast<double>(warmup_steps));
}

CriticState::CriticState(FlatParams init, double lr) : online(init), target(std::move(init)), adam(online.size(), lr) {}

ActorState::ActorState(LinearActor init, double lr)
    : online(init), target(init), adam(static_cast<std::size_t>(init.gain().size()), lr) {}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(TransitionRecord rec) {
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(rec));
}

std::vector<TransitionRecord> ReplayBuffer::sample(Rng& rng, std::size_t n) const {
  if (data_.empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<TransitionRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data_[pick(rng)]);
  return out;
}

StepDiagnostics train_step_q_learning(const TrainerConfig& cfg, const CriticModel& model, CriticState& critic,
                                      const Environment& env, Rng& rng, std::size_t step) {
  if (cfg.algo != Algo::QLearning) throw std::invalid_argument("train_step_q_learning: algo must be q_learning");
  if (env.state_dim() != 1 || env.action_dim() != 1) {
    throw std::invalid_argument("train_step_q_learning: needs scalar state and action");
  }
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<TransitionRecord> trans;
  trans.reserve(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    const double s = unif(rng);
    const double a = unif(rng);
    trans.push_back(env.transition(Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Constant(1, a)));
  }
  const std::vector<double> grid = uniform_grid(cfg.grid_points);
  auto targets = max_targets(model, critic.target.values(), trans, cfg.gamma, grid);
  StepDiagnostics diag = critic_update(cfg, model, critic, trans, std::move(targets), step);
  polyak_update(critic.target.values(), critic.online.values(), cfg.polyak_rho);
  return diag;
}

Collector::Collector(const TrainerConfig& cfg, const Environment& env, Rng& rng)
    : env_(env),
      episode_length_(cfg.episode_length),
      explore_sigma_(cfg.explore_sigma),
      init_state_sigma_(cfg.init_state_sigma) {
  reset(rng);
}

void Collector::reset(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  state_.resize(static_cast<Eigen::Index>(env_.state_dim()));
  for (Eigen::Index i = 0; i < state_.size(); ++i) state_[i] = init_state_sigma_ * n01(rng);
  t_ = 0;
}

void Collector::collect(const LinearActor& actor, ReplayBuffer& buffer, Rng& rng) {
  if (t_ >= episode_length_) reset(rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd a = actor.eval(state_).a;
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += explore_sigma_ * n01(rng);
  TransitionRecord rec = env_.transition(state_, a);
  state_ = rec.s_next;
  ++t_;
  buffer.push(std::move(rec));
}

std::vector<double> deterministic_policy_gradient(const CriticModel& model, std::span<const double> critic_params,
                                                  const LinearActor& actor,
                                                  std::span<const TransitionRecord> batch) {
  if (batch.empty()) throw std::invalid_argument("deterministic_policy_gradient: empty batch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(actor.gain().rows(), actor.gain().cols());
  for (const auto& tr : batch) {
    const Eigen::VectorXd a = actor.eval(tr.s).a;
    const CriticEval e = model.eval(critic_params, {tr.s.data(), static_cast<std::size_t>(tr.s.size())},
                                    {a.data(), static_cast<std::size_t>(a.size())});
    // d mu / dK for mu = K s: dQ/dK = (dQ/da) s^T.
    g += e.ga * tr.s.transpose();
  }
  g /= static_cast<double>(batch.size());
  return {g.data(), g.data() + g.size()};
}

StepDiagnostics train_step_actor_critic(const TrainerConfig& cfg, const CriticModel& model, CriticState& critic,
                                        ActorState& actor, const ReplayBuffer& buffer, const Environment& env,
                                        Rng& rng, std::size_t step) {
  if (cfg.algo != Algo::ActorCritic) throw std::invalid_argument("train_step_actor_critic: algo must be actor_critic");
  if (buffer.empty()) throw std::logic_error("train_step_actor_critic: replay buffer is empty");
  if (env.state_dim() != model.state_dim() || env.action_dim() != model.action_dim()) {
    throw std::invalid_argument("train_step_actor_critic: critic and environment dimensions differ");
  }
  const std::vector<TransitionRecord> trans = buffer.sample(rng, cfg.batch_size);
  std::vector<FirstOrderTarget> targets;
  targets.reserve(trans.size());
  for (const auto& tr : trans) targets.push_back(actor_target(model, critic.target.values(), actor.target, tr, cfg.gamma));
  StepDiagnostics diag = critic_update(cfg, model, critic, trans, std::move(targets), step);

  // Gradient ascent on J is Adam descent on -J.
  std::vector<double> grad = deterministic_policy_gradient(model, critic.online.values(), actor.online, trans);
  for (double& g : grad) g = -g;
  FlatParams kp = actor.online.params();
  adam_step(actor.adam, kp.values(), grad);
  actor.online.set_params(kp);

  double j = 0.0;
  for (const auto& tr : trans) {
    const Eigen::VectorXd a = actor.online.eval(tr.s).a;
    j += model.eval(critic.online.values(), {tr.s.data(), static_cast<std::size_t>(tr.s.size())},
                    {a.data(), static_cast<std::size_t>(a.size())})
             .q;
  }
  diag.actor_objective = j / static_cast<double>(trans.size());

  polyak_update(critic.target.values(), critic.online.values(), cfg.polyak_rho);
  FlatParams kt = actor.target.params();
  polyak_update(kt.values(), actor.online.params().values(), cfg.polyak_rho);
  actor.target.set_params(kt);
  return diag;
}

}  // namespace sobolev_td
