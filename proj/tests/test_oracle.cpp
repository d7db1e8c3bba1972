#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sobolev_td/diff/sobolev_loss.hpp"
#include "sobolev_td/kernels/bellman_sweep.hpp"
#include "sobolev_td/oracle/oracle.hpp"
#include "support/random.hpp"

namespace sobolev_td {
namespace {

using testing::uniform_vector;

Eigen::MatrixXd scalar(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

const GridSolution& oracle_1001() {
  static const GridSolution sol = value_iteration_toy(1001, 0.9, 1e-12, 100000);
  return sol;
}

TEST(ValueIteration, UndiscountedExamples) {
  const GridSolution sol = value_iteration_toy(1001, 0.0, 1e-12, 10);
  EXPECT_NEAR(sol.v_star.back(), 0.2, 1e-12);
  EXPECT_EQ(sol.pi_star.back(), 1.0);
  const auto mid = static_cast<std::size_t>(std::find_if(sol.s_grid.begin(), sol.s_grid.end(),
                                                         [](double s) { return std::abs(s) < 1e-12; }) -
                                            sol.s_grid.begin());
  ASSERT_LT(mid, sol.size());
  EXPECT_NEAR(sol.v_star[mid], 0.2 * 0.1 - 0.01, 1e-12);
  EXPECT_NEAR(sol.pi_star[mid], 0.1, 1e-12);
  // Single-step argmax is clip(s + 0.1) up to the grid spacing.
  for (std::size_t i = 0; i < sol.size(); i += 37) {
    EXPECT_NEAR(sol.pi_star[i], std::min(1.0, sol.s_grid[i] + 0.1), 0.002 + 1e-12);
  }
}

TEST(ValueIteration, ResidualHoldsAtEveryNode) {
  const GridSolution& sol = oracle_1001();
  EXPECT_LE(sol.residual, 1e-12);
  // Brute-force Bellman backup, independent of the library sweep.
  const auto& g = sol.s_grid;
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double best = -INFINITY;
    for (std::size_t j = 0; j < g.size(); ++j) {
      best = std::max(best, 0.2 * g[j] - (g[j] - g[i]) * (g[j] - g[i]) + 0.9 * sol.v_star[j]);
    }
    worst = std::max(worst, std::abs(best - sol.v_star[i]));
  }
  EXPECT_LE(worst, 1e-11);
}

TEST(ValueIteration, GridRefinementIsStable) {
  const GridSolution& coarse = oracle_1001();
  const GridSolution fine = value_iteration_toy(2001, 0.9, 1e-12, 100000);
  double worst = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    ASSERT_NEAR(coarse.s_grid[i], fine.s_grid[2 * i], 1e-15);
    worst = std::max(worst, std::abs(coarse.v_star[i] - fine.v_star[2 * i]));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(ValueIteration, NonConvergenceCarriesResidual) {
  try {
    value_iteration_toy(101, 0.9, 1e-12, 3);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 1e-12);
    EXPECT_EQ(e.iterations(), 3u);
  }
  EXPECT_THROW(value_iteration_toy(1, 0.9, 1e-6, 10), std::invalid_argument);
  EXPECT_THROW(value_iteration_toy(11, 1.0, 1e-6, 10), std::invalid_argument);
}

TEST(QStar, UndiscountedIsReward) {
  const GridSolution sol = value_iteration_toy(201, 0.0, 1e-12, 10);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto x = uniform_vector(rng, 2);
    EXPECT_EQ(q_star_eval(sol, x[0], x[1]), 0.2 * x[1] - (x[1] - x[0]) * (x[1] - x[0]));
  }
}

TEST(QStar, OnGridActionIsExact) {
  const GridSolution& sol = oracle_1001();
  for (std::size_t j = 0; j < sol.size(); j += 50) {
    const double s = 0.37;
    const double a = sol.s_grid[j];
    EXPECT_EQ(q_star_eval(sol, s, a), (0.2 * a - (a - s) * (a - s)) + 0.9 * sol.v_star[j]);
  }
  EXPECT_THROW(q_star_eval(sol, 0.0, 1.5), std::invalid_argument);
  EXPECT_THROW(q_star_eval(sol, -1.1, 0.0), std::invalid_argument);
}

TEST(QStar, GradientsDecompose) {
  const GridSolution& sol = oracle_1001();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto x = uniform_vector(rng, 2);
    EXPECT_DOUBLE_EQ(q_star_grad_s(sol, x[0], x[1]), 2.0 * (x[1] - x[0]));
    EXPECT_NEAR(q_star_grad_a(sol, x[0], x[1]), 0.2 - 2.0 * (x[1] - x[0]) + 0.9 * v_star_grad(sol, x[1]), 1e-12);
  }
}

TEST(QStar, ValueGradientTracksSecantSlope) {
  const GridSolution& sol = oracle_1001();
  // V* is smooth away from the kink of the clipped policy; compare with a
  // secant over a few cells.
  for (double a : {-0.6, -0.2, 0.3}) {
    const double h = 0.01;
    const double secant = (v_star_eval(sol, a + h) - v_star_eval(sol, a - h)) / (2 * h);
    EXPECT_NEAR(v_star_grad(sol, a), secant, 1e-3);
  }
}

TEST(BellmanSweep, ParallelIsBitIdenticalToSerial) {
  const auto grid = uniform_grid(513);
  std::mt19937_64 rng(3);
  const auto v = uniform_vector(rng, 513);
  std::vector<double> vs(513);
  std::vector<double> vp(513);
  std::vector<std::size_t> as(513);
  std::vector<std::size_t> ap(513);
  const double rs = kernels::toy_bellman_sweep_serial(grid, {v.data(), 513}, 0.9, vs, as);
  const double rp = kernels::toy_bellman_sweep_omp(grid, {v.data(), 513}, 0.9, vp, ap);
  EXPECT_EQ(rs, rp);
  EXPECT_EQ(vs, vp);
  EXPECT_EQ(as, ap);
}

TEST(GridSolution, SaveLoadRoundTrip) {
  const GridSolution sol = value_iteration_toy(101, 0.9, 1e-12, 100000);
  std::stringstream ss;
  save_grid_solution(ss, sol);
  const GridSolution back = load_grid_solution(ss);
  EXPECT_EQ(back.s_grid, sol.s_grid);
  EXPECT_EQ(back.v_star, sol.v_star);
  EXPECT_EQ(back.pi_star, sol.pi_star);
  EXPECT_EQ(back.dv_star, sol.dv_star);
  EXPECT_EQ(back.gamma, sol.gamma);
  EXPECT_EQ(back.residual, sol.residual);
  std::stringstream bad("garbage\n");
  EXPECT_THROW(load_grid_solution(bad), std::runtime_error);
}

// Scalar discounted Riccati: P = q + g a^2 P - (g a b P)^2 / (r + g b^2 P)
// reduces for a = b = q = r = 1 to g P^2 + (1 - 2 g) P - 1 = 0.
double scalar_riccati_closed_form(double g) { return ((2 * g - 1) + std::sqrt((1 - 2 * g) * (1 - 2 * g) + 4 * g)) / (2 * g); }

TEST(Riccati, GoldenRatioWhenUndiscounted) {
  LqrEnv env(scalar(1), scalar(1), scalar(1), scalar(1), 1.0);
  const auto sol = riccati_solve(env, 1e-13, 10000);
  EXPECT_NEAR(sol.P(0, 0), (1 + std::sqrt(5.0)) / 2, 1e-9);
  EXPECT_NEAR(sol.P(0, 0) * sol.P(0, 0), sol.P(0, 0) + 1, 1e-9);
}

TEST(Riccati, DiscountedScalarMatchesQuadraticFormula) {
  for (double g : {0.5, 0.9, 0.99}) {
    LqrEnv env(scalar(1), scalar(1), scalar(1), scalar(1), g);
    const auto sol = riccati_solve(env, 1e-14, 100000);
    const double p = scalar_riccati_closed_form(g);
    EXPECT_NEAR(sol.P(0, 0), p, 1e-10);
    // a* = -K s with K = g b a P / (r + g b^2 P).
    EXPECT_NEAR(sol.K(0, 0), g * p / (1 + g * p), 1e-10);
  }
}

TEST(Riccati, UncontrolledGeometricSeries) {
  LqrEnv env(scalar(0.5), scalar(0), scalar(1), scalar(1), 1.0);
  const auto sol = riccati_solve(env, 1e-14, 10000);
  EXPECT_NEAR(sol.P(0, 0), 4.0 / 3.0, 1e-12);
}

TEST(Riccati, ZeroCost) {
  Eigen::MatrixXd A(2, 2);
  A << 0.5, 0.1, 0.0, 0.8;
  LqrEnv env(A, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), 3.0 * Eigen::MatrixXd::Identity(2, 2),
             0.9);
  const auto sol = riccati_solve(env, 1e-12, 100);
  EXPECT_EQ(sol.P, Eigen::MatrixXd::Zero(2, 2));
  EXPECT_EQ(sol.K, Eigen::MatrixXd::Zero(2, 2));
}

TEST(Riccati, FixedPointAndDivergence) {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.2, 0.0, 1.1;
  Eigen::MatrixXd B(2, 1);
  B << 0.0, 1.0;
  LqrEnv env(A, B, Eigen::MatrixXd::Identity(2, 2), scalar(0.5), 0.95);
  const auto sol = riccati_solve(env, 1e-12, 100000);
  EXPECT_LE((riccati_update(env, sol.P) - sol.P).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((sol.P - sol.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);

  LqrEnv unstable(scalar(2), scalar(0), scalar(1), scalar(1), 1.0);
  EXPECT_THROW(riccati_solve(unstable, 1e-10, 1000), ConvergenceError);
}

TEST(Riccati, SaveLoadRoundTrip) {
  const auto sol = riccati_solve(LqrEnv::scalar_default(), 1e-12, 10000);
  std::stringstream ss;
  save_riccati_solution(ss, sol);
  const auto back = load_riccati_solution(ss);
  EXPECT_EQ(back.P, sol.P);
  EXPECT_EQ(back.K, sol.K);
  EXPECT_EQ(back.iterations, sol.iterations);
}

LqrEnv vector_env() {
  Eigen::MatrixXd A(2, 2);
  A << 0.9, 0.3, -0.1, 1.0;
  Eigen::MatrixXd B(2, 1);
  B << 0.2, 1.0;
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.2, 0.2, 0.5;
  return LqrEnv(A, B, Q, scalar(0.4), 0.9);
}

TEST(LqrQStar, OriginIsZero) {
  const LqrEnv env = vector_env();
  const auto sol = riccati_solve(env, 1e-12, 100000);
  const auto q = lqr_q_star_eval(env, sol, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1));
  EXPECT_EQ(q.q, 0.0);
  EXPECT_EQ(q.gs, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(q.ga, Eigen::VectorXd::Zero(1));
}

TEST(LqrQStar, GradientsMatchFiniteDifferences) {
  const LqrEnv env = vector_env();
  const auto sol = riccati_solve(env, 1e-12, 100000);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto s = uniform_vector(rng, 2, -2, 2);
    const auto a = uniform_vector(rng, 1, -2, 2);
    const auto q = lqr_q_star_eval(env, sol, s, a);
    Eigen::VectorXd x(3);
    x << s, a;
    const auto fd = finite_difference_gradient(
        [&](const Eigen::VectorXd& v) { return lqr_q_star_eval(env, sol, v.head(2), v.tail(1)).q; }, x, 1e-5);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(q.gs[j], fd[j], 1e-8);
    EXPECT_NEAR(q.ga[0], fd[2], 1e-8);
  }
}

TEST(LqrQStar, GreedyActionIsMinusKs) {
  const LqrEnv env = vector_env();
  const auto sol = riccati_solve(env, 1e-13, 100000);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = uniform_vector(rng, 2, -2, 2);
    const Eigen::VectorXd a = -sol.K * s;
    const auto q = lqr_q_star_eval(env, sol, s, a);
    EXPECT_NEAR(q.ga[0], 0.0, 1e-8);
    for (double d : {-1e-3, 1e-3}) {
      EXPECT_LT(lqr_q_star_eval(env, sol, s, a + Eigen::VectorXd::Constant(1, d)).q, q.q);
    }
  }
}

TEST(LqrQStar, SatisfiesBellmanEquation) {
  const LqrEnv env = vector_env();
  const auto sol = riccati_solve(env, 1e-13, 100000);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto s = uniform_vector(rng, 2, -2, 2);
    const auto a = uniform_vector(rng, 1, -2, 2);
    const auto step = env.step(s, a);
    const Eigen::VectorXd a_next = -sol.K * step.s_next;
    const double target = step.r + env.gamma() * lqr_q_star_eval(env, sol, step.s_next, a_next).q;
    EXPECT_NEAR(lqr_q_star_eval(env, sol, s, a).q, target, 1e-10);
  }
}

TEST(LqrQStar, QuadraticCoefficientsReproduceQStar) {
  const LqrEnv env = LqrEnv::scalar_default();
  const auto sol = riccati_solve(env, 1e-13, 100000);
  const auto c = lqr_q_star_quadratic_coeffs(env, sol);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 0.0);
  EXPECT_EQ(c[2], 0.0);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto x = uniform_vector(rng, 2, -2, 2);
    const double q = c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
    EXPECT_NEAR(q, lqr_q_star_eval(env, sol, x.head(1), x.tail(1)).q, 1e-12);
  }
  EXPECT_THROW(lqr_q_star_quadratic_coeffs(vector_env(), riccati_solve(vector_env(), 1e-12, 100000)),
               std::invalid_argument);
}

}  // namespace
}  // namespace sobolev_td
