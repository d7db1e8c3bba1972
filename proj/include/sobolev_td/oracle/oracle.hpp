#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/envs/env.hpp"

namespace sobolev_td {

/// Raised when an iterative solver fails to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual, std::size_t iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}
  double last_residual() const { return last_residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double last_residual_;
  std::size_t iterations_;
};

/// Converged value iteration for the toy problem. The action grid equals the
/// state grid, so s' = a always lands on a node.
struct GridSolution {
  std::vector<double> s_grid;
  std::vector<double> v_star;
  std::vector<double> pi_star;
  /// Centered-difference slopes of v_star at the nodes (derived, not stored
  /// on disk).
  std::vector<double> dv_star;
  double gamma = 0.0;
  /// Sup-norm Bellman residual |T v - v| of the stored values.
  double residual = 0.0;
  std::size_t iterations = 0;

  std::size_t size() const { return s_grid.size(); }
};

/// Uniform grid of n points on [-1, 1] with exact endpoints.
std::vector<double> uniform_grid(std::size_t n, double lo = -1.0, double hi = 1.0);

GridSolution value_iteration_toy(std::size_t n_grid, double gamma, double tol, std::size_t max_iter);

/// Linear interpolation of V* at a in [-1, 1].
double v_star_eval(const GridSolution& sol, double a);
/// dV*/da from centered differences at the nodes, interpolated linearly.
double v_star_grad(const GridSolution& sol, double a);
/// Linear interpolation of the tabulated optimal policy.
double pi_star_eval(const GridSolution& sol, double s);

/// Q*(s, a) = r(s, a) + gamma V*(a).
double q_star_eval(const GridSolution& sol, double s, double a);
/// dQ*/ds and dQ*/da.
double q_star_grad_s(const GridSolution& sol, double s, double a);
double q_star_grad_a(const GridSolution& sol, double s, double a);

/// Discounted Riccati fixed point. P is the positive cost-to-go, so
/// V*(s) = -s' P s and the optimal action is a* = -K s.
struct RiccatiSolution {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  std::size_t iterations = 0;
  double residual = 0.0;
};

RiccatiSolution riccati_solve(const LqrEnv& env, double tol, std::size_t max_iter);

/// One application of the Riccati map to P.
Eigen::MatrixXd riccati_update(const LqrEnv& env, const Eigen::MatrixXd& P);

struct LqrQ {
  double q = 0.0;
  Eigen::VectorXd gs;
  Eigen::VectorXd ga;
};

LqrQ lqr_q_star_eval(const LqrEnv& env, const RiccatiSolution& sol, const Eigen::VectorXd& s,
                     const Eigen::VectorXd& a);

/// Coefficients of scalar-LQR Q* in the quadratic-critic basis
/// (1, s, a, s^2, s a, a^2).
std::vector<double> lqr_q_star_quadratic_coeffs(const LqrEnv& env, const RiccatiSolution& sol);

// Versioned flat-text serialization.
void save_grid_solution(std::ostream& os, const GridSolution& sol);
GridSolution load_grid_solution(std::istream& is);
void save_riccati_solution(std::ostream& os, const RiccatiSolution& sol);
RiccatiSolution load_riccati_solution(std::istream& is);

}  // namespace sobolev_td
