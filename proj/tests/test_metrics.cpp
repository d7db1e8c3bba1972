#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "sobolev_td/eval/metrics.hpp"
#include "support/function_critic.hpp"
#include "support/random.hpp"

namespace sobolev_td {
namespace {

using testing::FunctionCritic;
using testing::oracle_critic;

const GridSolution& oracle() {
  static const GridSolution sol = value_iteration_toy(1001, 0.9, 1e-12, 100000);
  return sol;
}

FlatParams quad(std::initializer_list<double> theta) {
  FlatParams p = QuadraticCritic().init_params(0);
  std::size_t i = 0;
  for (double t : theta) p[i++] = t;
  return p;
}

TEST(QMse, OracleCriticIsZero) {
  const auto critic = oracle_critic(oracle());
  EXPECT_LE(q_mse(critic, {}, oracle(), scalar_eval_grid()), 1e-6);
  EXPECT_LE(grad_a_mse(critic, {}, oracle(), scalar_eval_grid()), 1e-6);
}

TEST(QMse, ConstantOffset) {
  const double c = 0.37;
  const auto shifted = oracle_critic(oracle(), c);
  EXPECT_NEAR(q_mse(shifted, {}, oracle(), scalar_eval_grid()), c * c, 1e-14);
  EXPECT_EQ(grad_a_mse(shifted, {}, oracle(), scalar_eval_grid()),
            grad_a_mse(oracle_critic(oracle()), {}, oracle(), scalar_eval_grid()));
}

TEST(QMse, ZeroCriticMatchesTwoLoopSum) {
  QuadraticCritic m;
  const FlatParams p = m.init_params(0);
  const auto g = uniform_grid(51);
  double sq = 0.0;
  double sg = 0.0;
  for (double s : g) {
    for (double a : g) {
      sq += q_star_eval(oracle(), s, a) * q_star_eval(oracle(), s, a);
      sg += q_star_grad_a(oracle(), s, a) * q_star_grad_a(oracle(), s, a);
    }
  }
  const double n = 51.0 * 51.0;
  const double qm = q_mse(m, p.values(), oracle(), scalar_eval_grid());
  EXPECT_GT(qm, 0.0);
  EXPECT_NEAR(qm, sq / n, 1e-12);
  EXPECT_NEAR(grad_a_mse(m, p.values(), oracle(), scalar_eval_grid()), sg / n, 1e-12);
}

TEST(QMse, PermutationInvariant) {
  QuadraticCritic m;
  const FlatParams p = quad({0.1, 0.2, -0.3, 0.4, -0.5, 0.6});
  const EvalPoints grid = scalar_eval_grid();
  std::vector<Eigen::Index> perm(grid.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  EvalPoints shuffled = grid;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.s.col(static_cast<Eigen::Index>(i)) = grid.s.col(perm[i]);
    shuffled.a.col(static_cast<Eigen::Index>(i)) = grid.a.col(perm[i]);
  }
  // Equal up to summation order.
  const double q = q_mse(m, p.values(), oracle(), grid);
  const double g = grad_a_mse(m, p.values(), oracle(), grid);
  EXPECT_NEAR(q_mse(m, p.values(), oracle(), shuffled), q, 1e-13 * q);
  EXPECT_NEAR(grad_a_mse(m, p.values(), oracle(), shuffled), g, 1e-13 * g);
}

TEST(GradAMse, InvariantToStateOnlyTerms) {
  QuadraticCritic m;
  const FlatParams p = quad({0.1, 0.2, -0.3, 0.4, -0.5, 0.6});
  const FlatParams q = quad({5.0, -2.0, -0.3, 1.7, -0.5, 0.6});  // adds g(s) = 4.9 - 2.2 s + 1.3 s^2
  EXPECT_EQ(grad_a_mse(m, p.values(), oracle(), scalar_eval_grid()),
            grad_a_mse(m, q.values(), oracle(), scalar_eval_grid()));
}

TEST(PolicyError, ExactOptimalPolicyIsZero) {
  const GridSolution& sol = oracle();
  const FunctionCritic peaked([&sol](double s, double a) { return -(a - pi_star_eval(sol, s)) * (a - pi_star_eval(sol, s)); },
                              [](double, double) { return 0.0; },
                              [&sol](double s, double a) { return -2.0 * (a - pi_star_eval(sol, s)); });
  const auto states = uniform_grid(51);
  const auto actions = uniform_grid(kPolicyGridPoints);
  EXPECT_LE(policy_error(peaked, {}, sol, states, actions), 1e-20);
  // Off-node states: bounded by the squared action spacing.
  const auto off = uniform_grid(37, -0.99, 0.99);
  EXPECT_LE(policy_error(peaked, {}, sol, off, actions), 0.002 * 0.002);
  // The oracle critic itself.
  EXPECT_LE(policy_error(oracle_critic(sol), {}, sol, states, actions), 0.002 * 0.002);
}

TEST(PolicyError, ZeroCriticPicksSmallestAction) {
  QuadraticCritic m;
  const FlatParams p = m.init_params(0);
  const auto states = uniform_grid(51);
  const auto actions = uniform_grid(kPolicyGridPoints);
  const auto greedy = greedy_actions(m, p.values(), states, actions);
  for (double a : greedy) EXPECT_EQ(a, -1.0);
  double sum = 0.0;
  for (double s : states) sum += (-1.0 - pi_star_eval(oracle(), s)) * (-1.0 - pi_star_eval(oracle(), s));
  EXPECT_NEAR(policy_error(m, p.values(), oracle(), states, actions), sum / 51.0, 1e-12);
}

TEST(McReturn, UndiscountedIsFirstReward) {
  Toy1DEnv env;
  const Policy half = [](const Eigen::VectorXd& s) { return Eigen::VectorXd::Constant(1, 0.5 * s[0]); };
  const auto starts = scalar_starts();
  double sum = 0.0;
  for (const auto& s0 : starts) sum += Toy1DEnv::reward(s0[0], 0.5 * s0[0]);
  EXPECT_NEAR(mc_return(half, env, starts, kMcHorizon, 0.0), sum / static_cast<double>(starts.size()), 1e-15);
}

TEST(McReturn, StationaryPolicyGeometricSeries) {
  Toy1DEnv env;
  const Policy stay = [](const Eigen::VectorXd& s) { return s; };
  for (double s0 : {-0.6, 0.0, 0.8}) {
    const std::vector<Eigen::VectorXd> starts{Eigen::VectorXd::Constant(1, s0)};
    const double expected = 0.2 * s0 * (1 - std::pow(0.9, 200)) / (1 - 0.9);
    EXPECT_NEAR(mc_return(stay, env, starts, 200, 0.9), expected, 1e-12);
  }
}

TEST(McReturn, OracleGreedyReachesValue) {
  Toy1DEnv env;
  const GridSolution& sol = oracle();
  const auto actions = uniform_grid(kPolicyGridPoints);
  const auto starts = scalar_starts();
  const Policy greedy = memoized_greedy_policy(oracle_critic(sol), {}, actions);
  const double ret = mc_return(greedy, env, starts, kMcHorizon, 0.9);
  double v = 0.0;
  for (const auto& s0 : starts) v += v_star_eval(sol, s0[0]);
  v /= static_cast<double>(starts.size());
  EXPECT_NEAR(ret, v, 0.01 * std::abs(v));

  QuadraticCritic m;
  const FlatParams zero = m.init_params(0);
  const Policy zero_greedy = memoized_greedy_policy(m, zero.values(), actions);
  EXPECT_GE(ret, mc_return(zero_greedy, env, starts, kMcHorizon, 0.9));
}

TEST(ToyMetrics, OracleCriticRow) {
  Toy1DEnv env;
  const auto row = toy_metrics(oracle_critic(oracle()), {}, oracle(), env);
  EXPECT_LE(row.q_mse, 1e-6);
  EXPECT_LE(row.grad_a_mse, 1e-6);
  EXPECT_LE(row.policy_err, 0.002 * 0.002);
  EXPECT_GE(row.q_mse, 0.0);
}

TEST(LqrMetrics, OracleCoefficientsAreExact) {
  const LqrEnv env = LqrEnv::scalar_default();
  const auto sol = riccati_solve(env, 1e-13, 100000);
  const auto c = lqr_q_star_quadratic_coeffs(env, sol);
  QuadraticCritic m;
  FlatParams p = m.init_params(0);
  for (std::size_t i = 0; i < 6; ++i) p[i] = c[i];
  const auto spec = default_lqr_eval_spec(env);
  EXPECT_LE(lqr_q_mse(m, p.values(), env, sol, spec.points), 1e-24);
  EXPECT_LE(lqr_grad_a_mse(m, p.values(), env, sol, spec.points), 1e-24);
  EXPECT_EQ(lqr_policy_error(LinearActor(-sol.K), sol, spec.policy_states), 0.0);
  const double k = sol.K(0, 0);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < spec.policy_states.cols(); ++i) {
    expected += (k * spec.policy_states(0, i)) * (k * spec.policy_states(0, i));
  }
  expected /= static_cast<double>(spec.policy_states.cols());
  EXPECT_NEAR(lqr_policy_error(LinearActor(1, 1), sol, spec.policy_states), expected, 1e-14);
}

MetricsRow row(std::size_t step, std::uint64_t seed, double v) {
  MetricsRow r;
  r.step = step;
  r.seed = seed;
  r.q_mse = v;
  r.grad_a_mse = 2 * v;
  r.policy_err = v * v;
  r.mc_return = -v;
  return r;
}

TEST(Aggregate, SingleSeed) {
  const std::vector<MetricsRow> rows{row(0, 0, 1.5), row(10, 0, 0.5)};
  const auto agg = aggregate_seeds(rows);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].n_seeds, 1u);
  EXPECT_EQ(agg[0].q_mse.mean, 1.5);
  EXPECT_EQ(agg[0].q_mse.std, 0.0);
  EXPECT_EQ(agg[1].step, 10u);
}

TEST(Aggregate, TwoSeeds) {
  const std::vector<MetricsRow> rows{row(0, 0, 1.0), row(0, 1, 3.0)};
  const auto agg = aggregate_seeds(rows);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].q_mse.mean, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].q_mse.std, std::sqrt(2.0));
  EXPECT_EQ(agg[0].mc_return.mean, -2.0);
}

TEST(Aggregate, MatchesStreamingRecomputation) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MetricsRow> rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t step : {0u, 100u, 200u}) rows.push_back(row(step, seed, u(rng)));
  }
  const auto agg = aggregate_seeds(rows);
  ASSERT_EQ(agg.size(), 3u);
  for (const auto& a : agg) {
    // Welford's streaming update.
    double mean = 0.0;
    double m2 = 0.0;
    double lo = INFINITY;
    double hi = -INFINITY;
    int n = 0;
    for (const auto& r : rows) {
      if (r.step != a.step) continue;
      ++n;
      const double d = r.q_mse - mean;
      mean += d / n;
      m2 += d * (r.q_mse - mean);
      lo = std::min(lo, r.q_mse);
      hi = std::max(hi, r.q_mse);
    }
    EXPECT_EQ(a.n_seeds, 5u);
    EXPECT_NEAR(a.q_mse.mean, mean, 1e-12);
    EXPECT_NEAR(a.q_mse.std, std::sqrt(m2 / (n - 1)), 1e-12);
    EXPECT_GE(a.q_mse.mean, lo);
    EXPECT_LE(a.q_mse.mean, hi);
  }
}

TEST(Aggregate, MeanStaysInsideRangeForEqualValues) {
  const double v = 0.1 + 0.2;
  std::vector<MetricsRow> rows;
  for (std::uint64_t seed = 0; seed < 7; ++seed) rows.push_back(row(0, seed, v));
  const auto agg = aggregate_seeds(rows);
  EXPECT_EQ(agg[0].q_mse.mean, v);
  EXPECT_EQ(agg[0].q_mse.std, 0.0);
}

TEST(Aggregate, RejectsMismatchedSteps) {
  const std::vector<MetricsRow> rows{row(0, 0, 1), row(10, 0, 1), row(0, 1, 1)};
  EXPECT_THROW(aggregate_seeds(rows), std::invalid_argument);
  const std::vector<MetricsRow> dup{row(0, 0, 1), row(0, 0, 2)};
  EXPECT_THROW(aggregate_seeds(dup), std::invalid_argument);
}

}  // namespace
}  // namespace sobolev_td
