#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "sobolev_td/diff/sobolev_loss.hpp"
#include "sobolev_td/eval/metrics.hpp"
#include "sobolev_td/oracle/oracle.hpp"
#include "sobolev_td/targets/targets.hpp"
#include "sobolev_td/training/experiment.hpp"
#include "sobolev_td/training/trainer.hpp"
#include "support/function_critic.hpp"
#include "support/random.hpp"

namespace sobolev_td {
namespace {

using testing::uniform_vector;

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  AdamState st(3, 1e-3);
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g(3, 0.0);
  adam_step(st, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepIsAboutLrTimesSign) {
  for (double g : {-3.0, 1e-3, 250.0}) {
    AdamState st(1, 1e-4);
    std::vector<double> p{0.0};
    adam_step(st, p, std::vector<double>{g});
    EXPECT_LE(std::abs(p[0]), 1e-4);
    EXPECT_NEAR(p[0], -1e-4 * (g > 0 ? 1 : -1), 1e-4 * 1e-4);
  }
}

TEST(Adam, MatchesIndependentRecomputation) {
  AdamState st(1, 1e-4);
  std::vector<double> p{0.3};
  // Reference recursion written out in full.
  double m = 0.0, v = 0.0, x = 0.3;
  double prev = p[0];
  for (int t = 1; t <= 100; ++t) {
    adam_step(st, p, std::vector<double>{1.0});
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= 1e-4 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_LT(p[0], prev);
    prev = p[0];
  }
  EXPECT_NEAR(p[0], x, 1e-9);
  EXPECT_EQ(st.t, 100u);
}

TEST(Adam, RejectsShapeMismatch) {
  AdamState st(2, 1e-3);
  std::vector<double> p(3, 0.0);
  EXPECT_THROW(adam_step(st, p, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(Polyak, Examples) {
  std::vector<double> t{0.0, 5.0};
  polyak_update(t, std::vector<double>{2.0, 1.0}, 0.0);
  EXPECT_EQ(t, (std::vector<double>{2.0, 1.0}));
  polyak_update(t, std::vector<double>{7.0, 7.0}, 1.0);
  EXPECT_EQ(t, (std::vector<double>{2.0, 1.0}));
  std::vector<double> z{0.0};
  polyak_update(z, std::vector<double>{2.0}, 0.5);
  EXPECT_EQ(z[0], 1.0);
  EXPECT_THROW(polyak_update(z, std::vector<double>{2.0}, 1.5), std::invalid_argument);
}

TEST(Warmup, MonotoneAndReachesTarget) {
  EXPECT_EQ(effective_lambda(2.0, 0, 0), 2.0);
  EXPECT_EQ(effective_lambda(2.0, 1, 0), 2.0);
  double prev = -1.0;
  for (std::size_t step = 0; step <= 150; ++step) {
    const double l = effective_lambda(2.0, step, 100);
    EXPECT_GE(l, prev);
    EXPECT_LE(l, 2.0);
    prev = l;
  }
  EXPECT_EQ(effective_lambda(2.0, 0, 100), 0.0);
  EXPECT_EQ(effective_lambda(2.0, 100, 100), 2.0);
  EXPECT_EQ(effective_lambda(2.0, 50, 100), 1.0);
}

TEST(Config, ValidateNamesTheKey) {
  TrainerConfig cfg;
  cfg.validate();
  auto expect_key = [](TrainerConfig c, const std::string& key) {
    try {
      c.validate();
      FAIL() << "expected failure for " << key;
    } catch (const std::invalid_argument& e) {
      EXPECT_EQ(std::string(e.what()).rfind(key, 0), 0u) << e.what();
    }
  };
  TrainerConfig c = cfg;
  c.lambda_s = -1;
  expect_key(c, "lambda-s");
  c = cfg;
  c.polyak_rho = 1.5;
  expect_key(c, "polyak-rho");
  c = cfg;
  c.batch_size = 0;
  expect_key(c, "batch");
  c = cfg;
  c.method = Method::Baseline;
  expect_key(c, "method");  // nonzero lambdas with the baseline
  c.apply_method();
  c.validate();
  EXPECT_EQ(c.lambda_s, 0.0);
  EXPECT_EQ(c.lambda_a, 0.0);
}

TEST(ReplayBuffer, FifoAndSampling) {
  ReplayBuffer buf(3);
  Toy1DEnv env;
  Rng rng(1);
  EXPECT_THROW(buf.sample(rng, 1), std::logic_error);
  for (int i = 0; i < 5; ++i) {
    buf.push(env.transition(Eigen::VectorXd::Constant(1, 0.1 * i), Eigen::VectorXd::Zero(1)));
  }
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_DOUBLE_EQ(buf.at(0).s[0], 0.2);
  EXPECT_DOUBLE_EQ(buf.at(2).s[0], 0.4);
  const auto batch = buf.sample(rng, 50);
  ASSERT_EQ(batch.size(), 50u);
  for (const auto& rec : batch) {
    bool found = false;
    for (std::size_t i = 0; i < buf.size(); ++i) found = found || buf.at(i).s == rec.s;
    EXPECT_TRUE(found);
  }
}

TEST(ReplayBuffer, CachedJacobiansEqualFreshOnes) {
  TrainerConfig cfg;
  cfg.algo = Algo::ActorCritic;
  Eigen::MatrixXd A(2, 2);
  A << 0.9, 0.2, 0.0, 1.0;
  Eigen::MatrixXd B(2, 1);
  B << 0.0, 1.0;
  const LqrEnv env(A, B, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1), 0.9);
  Rng rng(2);
  ReplayBuffer buf(1000);
  Collector col(cfg, env, rng);
  LinearActor actor(Eigen::MatrixXd::Constant(1, 2, -0.3));
  for (int i = 0; i < 200; ++i) col.collect(actor, buf, rng);
  for (const auto& rec : buf.sample(rng, 100)) {
    const auto fresh = env.jacobians(rec.s, rec.a);
    EXPECT_EQ(rec.jac.df_ds, fresh.df_ds);
    EXPECT_EQ(rec.jac.df_da, fresh.df_da);
    EXPECT_EQ(rec.jac.dr_ds, fresh.dr_ds);
    EXPECT_EQ(rec.jac.dr_da, fresh.dr_da);
    const auto st = env.step(rec.s, rec.a);
    EXPECT_EQ(st.s_next, rec.s_next);
    EXPECT_EQ(st.r, rec.r);
  }
}

TEST(Collector, ResetsEveryEpisode) {
  TrainerConfig cfg;
  cfg.episode_length = 4;
  cfg.explore_sigma = 0.0;
  const LqrEnv env = LqrEnv::scalar_default();
  Rng rng(3);
  ReplayBuffer buf(100);
  Collector col(cfg, env, rng);
  LinearActor actor(Eigen::MatrixXd::Constant(1, 1, -0.5));
  for (int i = 0; i < 12; ++i) col.collect(actor, buf, rng);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    // Within an episode states chain; across the boundary they do not.
    if (i % 4 != 0) EXPECT_EQ(buf.at(i).s, buf.at(i - 1).s_next);
    EXPECT_DOUBLE_EQ(buf.at(i).a[0], -0.5 * buf.at(i).s[0]);
  }
  EXPECT_NE(buf.at(4).s, buf.at(3).s_next);
}

TEST(QLearning, BaselineEqualsSobolevWithZeroLambdas) {
  Toy1DEnv env;
  for (CriticKind kind : {CriticKind::Quadratic, CriticKind::Mlp}) {
    auto model = make_critic(kind, 1, 1, kind == CriticKind::Mlp ? 2 : 3);
    TrainerConfig base;
    base.method = Method::Baseline;
    base.apply_method();
    TrainerConfig sob;
    sob.lambda_s = 0.0;
    sob.lambda_a = 0.0;
    TrainerConfig value_only = base;
    value_only.loss_path = LossPath::ValueOnly;
    std::vector<CriticState> states;
    for (int i = 0; i < 3; ++i) states.emplace_back(model->init_params(7), 1e-3);
    std::vector<Rng> rngs(3, Rng(11));
    const TrainerConfig* cfgs[3] = {&base, &sob, &value_only};
    for (std::size_t step = 1; step <= 20; ++step) {
      for (int i = 0; i < 3; ++i) train_step_q_learning(*cfgs[i], *model, states[i], env, rngs[i], step);
    }
    EXPECT_EQ(states[0].online, states[1].online) << model->kind();
    EXPECT_EQ(states[0].target, states[1].target) << model->kind();
    EXPECT_EQ(states[0].online, states[2].online) << model->kind();
    EXPECT_EQ(states[0].adam.m, states[2].adam.m) << model->kind();
  }
}

TEST(QLearning, ValueOnlyPathRejectsLambdas) {
  TrainerConfig cfg;
  cfg.loss_path = LossPath::ValueOnly;
  Toy1DEnv env;
  QuadraticCritic m;
  CriticState st(m.init_params(0), 1e-3);
  Rng rng(1);
  EXPECT_THROW(train_step_q_learning(cfg, m, st, env, rng, 1), std::invalid_argument);
}

TEST(QLearning, OneStepDescendsTheBatchLoss) {
  Toy1DEnv env;
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.lr = 1e-4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CriticState st(m.init_params(0), cfg.lr);
    Rng rng(seed);
    Rng replay = rng;
    // Rebuild the batch the step will draw.
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<TransitionRecord> trans;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const double s = unif(replay);
      const double a = unif(replay);
      trans.push_back(env.transition(Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Constant(1, a)));
    }
    const auto targets = max_targets(m, st.target.values(), trans, cfg.gamma, uniform_grid(cfg.grid_points));
    std::vector<SobolevSample> batch;
    for (std::size_t i = 0; i < trans.size(); ++i) batch.push_back({trans[i].s, trans[i].a, targets[i]});
    const double before = sobolev_loss_and_param_grads(m, st.online.values(), batch, 1.0, 1.0).loss;
    const auto diag = train_step_q_learning(cfg, m, st, env, rng, 1);
    const double after = sobolev_loss_and_param_grads(m, st.online.values(), batch, 1.0, 1.0).loss;
    EXPECT_DOUBLE_EQ(diag.critic_loss, before);
    EXPECT_LT(after, before) << "seed " << seed;
  }
}

TEST(QLearning, TargetIsPolyakAverageOfOnline) {
  Toy1DEnv env;
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.lr = 1e-2;
  CriticState st(m.init_params(0), cfg.lr);
  Rng rng(4);
  train_step_q_learning(cfg, m, st, env, rng, 1);
  const FlatParams target_before = st.target;
  train_step_q_learning(cfg, m, st, env, rng, 2);
  for (std::size_t i = 0; i < st.online.size(); ++i) {
    EXPECT_EQ(st.target[i], cfg.polyak_rho * target_before[i] + (1 - cfg.polyak_rho) * st.online[i]);
  }
}

TEST(QLearning, WarmupScalesLambdas) {
  Toy1DEnv env;
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.warmup_steps = 10;
  CriticState st(m.init_params(0), cfg.lr);
  Rng rng(5);
  EXPECT_DOUBLE_EQ(train_step_q_learning(cfg, m, st, env, rng, 5).lambda_s, 0.5);
  EXPECT_DOUBLE_EQ(train_step_q_learning(cfg, m, st, env, rng, 10).lambda_a, 1.0);
  TrainerConfig ac = cfg;
  ac.algo = Algo::ActorCritic;
  EXPECT_THROW(train_step_q_learning(ac, m, st, env, rng, 1), std::invalid_argument);
}

// Critic and target both equal to the tabulated Q*: the max target
// reproduces Q up to action-grid quantization.
TEST(QLearning, BellmanFixedPointOfOracle) {
  const GridSolution sol = value_iteration_toy(1001, 0.9, 1e-12, 100000);
  const auto critic = testing::oracle_critic(sol);
  Toy1DEnv env(0.9);
  const auto grid = uniform_grid(100);
  const EvalPoints pts = scalar_eval_grid();
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto rec = env.transition(pts.s.col(static_cast<Eigen::Index>(i)), pts.a.col(static_cast<Eigen::Index>(i)));
    const auto t = max_target(critic, {}, rec, 0.9, grid);
    total += std::abs(q_star_eval(sol, rec.s[0], rec.a[0]) - t.y);
  }
  EXPECT_LE(total / static_cast<double>(pts.size()), 5e-3);
}

LinearActor scalar_actor(double k) { return LinearActor(Eigen::MatrixXd::Constant(1, 1, k)); }

TEST(ActorCritic, ConstantCriticLeavesActorUnchanged) {
  TrainerConfig cfg;
  cfg.algo = Algo::ActorCritic;
  cfg.lr = 0.0;  // keep the critic constant through the critic step
  const LqrEnv env = LqrEnv::scalar_default();
  QuadraticCritic m;
  FlatParams p = m.init_params(0);
  p[0] = 3.0;
  CriticState critic(p, cfg.lr);
  ActorState actor(scalar_actor(-0.2), 1e-2);
  ReplayBuffer buf(100);
  Rng rng(6);
  Collector col(cfg, env, rng);
  for (int i = 0; i < 60; ++i) col.collect(actor.online, buf, rng);
  train_step_actor_critic(cfg, m, critic, actor, buf, env, rng, 1);
  EXPECT_EQ(actor.online.gain()(0, 0), -0.2);
}

TEST(ActorCritic, PolicyGradientMatchesAnalyticLqr) {
  const LqrEnv env = LqrEnv::scalar_default();
  const auto sol = riccati_solve(env, 1e-13, 100000);
  const auto c = lqr_q_star_quadratic_coeffs(env, sol);
  QuadraticCritic m;
  FlatParams p = m.init_params(0);
  for (std::size_t i = 0; i < 6; ++i) p[i] = c[i];
  Rng rng(7);
  std::vector<TransitionRecord> batch;
  std::normal_distribution<double> n01;
  for (int i = 0; i < 64; ++i) {
    batch.push_back(env.transition(Eigen::VectorXd::Constant(1, n01(rng)), Eigen::VectorXd::Constant(1, n01(rng))));
  }
  for (double k : {0.0, -0.3}) {
    // d/dK mean Q*(s, K s) = mean (c4 s + 2 c5 K s) s
    double analytic = 0.0;
    for (const auto& rec : batch) analytic += (c[4] * rec.s[0] + 2 * c[5] * k * rec.s[0]) * rec.s[0];
    analytic /= static_cast<double>(batch.size());
    const auto g = deterministic_policy_gradient(m, p.values(), scalar_actor(k), batch);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_NEAR(g[0], analytic, 1e-8);
  }

  // One full step from K = 0 moves the gain toward -K*.
  TrainerConfig cfg;
  cfg.algo = Algo::ActorCritic;
  cfg.lr = 1e-6;
  CriticState critic(p, cfg.lr);
  ActorState actor(scalar_actor(0.0), 1e-3);
  ReplayBuffer buf(1000);
  for (const auto& rec : batch) buf.push(rec);
  train_step_actor_critic(cfg, m, critic, actor, buf, env, rng, 1);
  EXPECT_LT(actor.online.gain()(0, 0), 0.0);
  EXPECT_NEAR(actor.online.gain()(0, 0), -1e-3, 1e-6);
}

TEST(ActorCritic, Errors) {
  TrainerConfig cfg;
  cfg.algo = Algo::ActorCritic;
  const LqrEnv env = LqrEnv::scalar_default();
  QuadraticCritic m;
  CriticState critic(m.init_params(0), cfg.lr);
  ActorState actor(scalar_actor(0.0), cfg.lr);
  ReplayBuffer empty(10);
  Rng rng(8);
  EXPECT_THROW(train_step_actor_critic(cfg, m, critic, actor, empty, env, rng, 1), std::logic_error);
  ReplayBuffer buf(10);
  buf.push(env.transition(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)));
  TrainerConfig ql;
  EXPECT_THROW(train_step_actor_critic(ql, m, critic, actor, buf, env, rng, 1), std::invalid_argument);
  ActorState wide(LinearActor(1, 2), cfg.lr);
  EXPECT_THROW(train_step_actor_critic(cfg, m, critic, wide, buf, env, rng, 1), std::invalid_argument);
}

TEST(ActorCritic, BaselineEqualsValueOnlyPath) {
  const LqrEnv env = LqrEnv::scalar_default();
  const auto sol = riccati_solve(env, 1e-12, 100000);
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.algo = Algo::ActorCritic;
  cfg.method = Method::Baseline;
  cfg.apply_method();
  cfg.total_steps = 300;
  cfg.eval_every = 100;
  cfg.lr = cfg.actor_lr = 1e-3;
  TrainerConfig vo = cfg;
  vo.loss_path = LossPath::ValueOnly;
  const auto a = run_experiment(cfg, m, env, sol);
  const auto b = run_experiment(vo, m, env, sol);
  EXPECT_EQ(a.final_critic, b.final_critic);
  EXPECT_EQ(a.final_actor->gain(), b.final_actor->gain());
}

bool same_rows(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].q_mse != b[i].q_mse || a[i].grad_a_mse != b[i].grad_a_mse ||
        a[i].policy_err != b[i].policy_err || a[i].mc_return != b[i].mc_return) {
      return false;
    }
  }
  return true;
}

TEST(Experiment, ZeroStepsGivesUntrainedMetrics) {
  const GridSolution sol = value_iteration_toy(201, 0.9, 1e-12, 100000);
  Toy1DEnv env;
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.total_steps = 0;
  const auto res = run_experiment(cfg, m, env, sol);
  ASSERT_EQ(res.metrics.size(), 1u);
  EXPECT_EQ(res.metrics[0].step, 0u);
  const auto ref = toy_metrics(m, m.init_params(cfg.seed).values(), sol, env);
  EXPECT_EQ(res.metrics[0].q_mse, ref.q_mse);
  EXPECT_EQ(res.final_critic, m.init_params(cfg.seed));
}

TEST(Experiment, DeterministicPerSeed) {
  const GridSolution sol = value_iteration_toy(201, 0.9, 1e-12, 100000);
  Toy1DEnv env;
  MlpCritic mlp(1, 1, 2, 32);
  TrainerConfig cfg;
  cfg.total_steps = 40;
  cfg.eval_every = 20;
  cfg.seed = 3;
  const auto a = run_experiment(cfg, mlp, env, sol);
  const auto b = run_experiment(cfg, mlp, env, sol);
  EXPECT_TRUE(same_rows(a.metrics, b.metrics));
  EXPECT_EQ(a.final_critic, b.final_critic);
  cfg.seed = 4;
  const auto c = run_experiment(cfg, mlp, env, sol);
  EXPECT_NE(a.final_critic, c.final_critic);

  const LqrEnv lqr = LqrEnv::scalar_default();
  const auto rsol = riccati_solve(lqr, 1e-12, 100000);
  QuadraticCritic quad;
  TrainerConfig ac;
  ac.algo = Algo::ActorCritic;
  ac.total_steps = 200;
  ac.eval_every = 100;
  const auto x = run_experiment(ac, quad, lqr, rsol);
  const auto y = run_experiment(ac, quad, lqr, rsol);
  EXPECT_TRUE(same_rows(x.metrics, y.metrics));
  EXPECT_EQ(x.final_actor->gain(), y.final_actor->gain());
}

TEST(Experiment, ScheduleAndSnapshots) {
  EXPECT_EQ(eval_schedule(0, 10), (std::vector<std::size_t>{0}));
  EXPECT_EQ(eval_schedule(25, 10), (std::vector<std::size_t>{0, 10, 20, 25}));
  EXPECT_EQ(eval_schedule(20, 10), (std::vector<std::size_t>{0, 10, 20}));
  const GridSolution sol = value_iteration_toy(101, 0.9, 1e-12, 100000);
  Toy1DEnv env;
  QuadraticCritic m;
  TrainerConfig cfg;
  cfg.total_steps = 30;
  RunOptions opts;
  opts.snapshot_steps = {0, 10, 30};
  opts.skip_metrics = true;
  const auto res = run_experiment(cfg, m, env, sol, opts);
  EXPECT_TRUE(res.metrics.empty());
  ASSERT_EQ(res.snapshots.size(), 3u);
  EXPECT_EQ(res.snapshots[0].critic, m.init_params(0));
  EXPECT_EQ(res.snapshots[2].critic, res.final_critic);
  TrainerConfig wrong = cfg;
  wrong.gamma = 0.8;
  EXPECT_THROW(run_experiment(wrong, m, env, sol), std::invalid_argument);
}

}  // namespace
}  // namespace sobolev_td
