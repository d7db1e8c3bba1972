#include "sobolev_td/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "sobolev_td/kernels/bellman_sweep.hpp"

namespace sobolev_td {

namespace {

constexpr const char* kGridHeader = "# sobolev_td grid_solution v1";
constexpr const char* kRiccatiHeader = "# sobolev_td riccati_solution v1";

void check_in_box(double x, const char* what) {
  if (!(x >= -1.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + ": argument outside [-1, 1]");
}

// Index j with grid[j] <= x <= grid[j + 1].
std::size_t bracket(const std::vector<double>& grid, double x) {
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t j = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  return std::min(j, grid.size() - 2);
}

double interp(const std::vector<double>& grid, const std::vector<double>& v, double x) {
  const std::size_t j = bracket(grid, x);
  const double w = (x - grid[j]) / (grid[j + 1] - grid[j]);
  if (w == 0.0) return v[j];
  if (w == 1.0) return v[j + 1];
  return (1.0 - w) * v[j] + w * v[j + 1];
}

std::vector<double> centered_slopes(const std::vector<double>& grid, const std::vector<double>& v) {
  const std::size_t n = grid.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    d[i] = (v[hi] - v[lo]) / (grid[hi] - grid[lo]);
  }
  return d;
}

void expect_line(std::istream& is, const std::string& expected) {
  std::string line;
  std::getline(is, line);
  if (line != expected) throw std::runtime_error("unexpected header: '" + line + "', want '" + expected + "'");
}

template <typename T>
T read_keyed(std::istream& is, const std::string& key) {
  std::string k;
  T v{};
  if (!(is >> k >> v) || k != key) throw std::runtime_error("expected key '" + key + "'");
  return v;
}

void write_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& is, const std::string& name) {
  std::string k;
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  if (!(is >> k >> r >> c) || k != name) throw std::runtime_error("expected matrix '" + name + "'");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!(is >> m(i, j))) throw std::runtime_error("truncated matrix '" + name + "'");
    }
  }
  return m;
}

}  // namespace

std::vector<double> uniform_grid(std::size_t n, double lo, double hi) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

GridSolution value_iteration_toy(std::size_t n_grid, double gamma, double tol, std::size_t max_iter) {
  if (n_grid < 2) throw std::invalid_argument("value_iteration_toy: n_grid must be >= 2");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("value_iteration_toy: gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration_toy: tol must be positive");

  GridSolution sol;
  sol.s_grid = uniform_grid(n_grid);
  sol.gamma = gamma;
  std::vector<double> v(n_grid, 0.0);
  std::vector<double> next(n_grid, 0.0);
  std::vector<std::size_t> arg(n_grid, 0);

  double change = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < max_iter) {
    change = kernels::toy_bellman_sweep_omp(sol.s_grid, v, gamma, next, arg);
    v.swap(next);
    ++it;
    if (change <= tol) break;
  }
  if (change > tol) {
    throw ConvergenceError("value_iteration_toy: no convergence within max_iter", change, it);
  }
  // One more backup for the greedy policy and the residual of the stored values.
  sol.residual = kernels::toy_bellman_sweep_omp(sol.s_grid, v, gamma, next, arg);
  sol.v_star = std::move(v);
  sol.pi_star.resize(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) sol.pi_star[i] = sol.s_grid[arg[i]];
  sol.iterations = it;
  sol.dv_star = centered_slopes(sol.s_grid, sol.v_star);
  return sol;
}

double v_star_eval(const GridSolution& sol, double a) {
  check_in_box(a, "v_star_eval");
  return interp(sol.s_grid, sol.v_star, a);
}

double v_star_grad(const GridSolution& sol, double a) {
  check_in_box(a, "v_star_grad");
  return interp(sol.s_grid, sol.dv_star, a);
}

double pi_star_eval(const GridSolution& sol, double s) {
  check_in_box(s, "pi_star_eval");
  return interp(sol.s_grid, sol.pi_star, s);
}

double q_star_eval(const GridSolution& sol, double s, double a) {
  check_in_box(s, "q_star_eval");
  check_in_box(a, "q_star_eval");
  return Toy1DEnv::reward(s, a) + sol.gamma * interp(sol.s_grid, sol.v_star, a);
}

double q_star_grad_s(const GridSolution& /*sol*/, double s, double a) { return Toy1DEnv::reward_ds(s, a); }

double q_star_grad_a(const GridSolution& sol, double s, double a) {
  return Toy1DEnv::reward_da(s, a) + sol.gamma * v_star_grad(sol, a);
}

Eigen::MatrixXd riccati_update(const LqrEnv& env, const Eigen::MatrixXd& P) {
  const double g = env.gamma();
  const Eigen::MatrixXd& A = env.A();
  const Eigen::MatrixXd& B = env.B();
  const Eigen::MatrixXd S = env.r_cost() + g * B.transpose() * P * B;
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  Eigen::MatrixXd next = env.q_cost() + g * A.transpose() * P * A - g * g * BtPA.transpose() * S.ldlt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

RiccatiSolution riccati_solve(const LqrEnv& env, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("riccati_solve: tol must be positive");
  const auto n = static_cast<Eigen::Index>(env.state_dim());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  double change = std::numeric_limits<double>::infinity();
  double prev = change;
  std::size_t increases = 0;
  std::size_t it = 0;
  while (it < max_iter) {
    Eigen::MatrixXd next = riccati_update(env, P);
    change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    ++it;
    if (!std::isfinite(change)) throw ConvergenceError("riccati_solve: non-finite iterate", change, it);
    if (change <= tol) break;
    increases = change > prev ? increases + 1 : 0;
    if (increases >= 10) throw ConvergenceError("riccati_solve: diverging", change, it);
    prev = change;
  }
  if (change > tol) throw ConvergenceError("riccati_solve: no convergence within max_iter", change, it);

  RiccatiSolution sol;
  const double g = env.gamma();
  const Eigen::MatrixXd& B = env.B();
  const Eigen::MatrixXd S = env.r_cost() + g * B.transpose() * P * B;
  sol.K = g * S.ldlt().solve(B.transpose() * P * env.A());
  sol.P = std::move(P);
  sol.iterations = it;
  sol.residual = (riccati_update(env, sol.P) - sol.P).cwiseAbs().maxCoeff();
  return sol;
}

LqrQ lqr_q_star_eval(const LqrEnv& env, const RiccatiSolution& sol, const Eigen::VectorXd& s,
                     const Eigen::VectorXd& a) {
  if (s.size() != static_cast<Eigen::Index>(env.state_dim()) ||
      a.size() != static_cast<Eigen::Index>(env.action_dim())) {
    throw std::invalid_argument("lqr_q_star_eval: dimension mismatch");
  }
  const double g = env.gamma();
  const Eigen::VectorXd sn = env.A() * s + env.B() * a;
  const Eigen::VectorXd Psn = sol.P * sn;
  LqrQ out;
  out.q = -s.dot(env.q_cost() * s) - a.dot(env.r_cost() * a) - g * sn.dot(Psn);
  out.gs = -2.0 * (env.q_cost() * s) - 2.0 * g * (env.A().transpose() * Psn);
  out.ga = -2.0 * (env.r_cost() * a) - 2.0 * g * (env.B().transpose() * Psn);
  return out;
}

std::vector<double> lqr_q_star_quadratic_coeffs(const LqrEnv& env, const RiccatiSolution& sol) {
  if (env.state_dim() != 1 || env.action_dim() != 1) {
    throw std::invalid_argument("lqr_q_star_quadratic_coeffs: scalar LQR only");
  }
  const double A = env.A()(0, 0);
  const double B = env.B()(0, 0);
  const double gp = env.gamma() * sol.P(0, 0);
  return {0.0, 0.0, 0.0, -env.q_cost()(0, 0) - gp * A * A, -2.0 * gp * A * B, -env.r_cost()(0, 0) - gp * B * B};
}

void save_grid_solution(std::ostream& os, const GridSolution& sol) {
  os << kGridHeader << '\n' << std::setprecision(17);
  os << "gamma " << sol.gamma << '\n';
  os << "residual " << sol.residual << '\n';
  os << "iterations " << sol.iterations << '\n';
  os << "rows " << sol.size() << '\n';
  for (std::size_t i = 0; i < sol.size(); ++i) {
    os << sol.s_grid[i] << ' ' << sol.v_star[i] << ' ' << sol.pi_star[i] << '\n';
  }
}

GridSolution load_grid_solution(std::istream& is) {
  expect_line(is, kGridHeader);
  GridSolution sol;
  sol.gamma = read_keyed<double>(is, "gamma");
  sol.residual = read_keyed<double>(is, "residual");
  sol.iterations = read_keyed<std::size_t>(is, "iterations");
  const auto rows = read_keyed<std::size_t>(is, "rows");
  sol.s_grid.resize(rows);
  sol.v_star.resize(rows);
  sol.pi_star.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!(is >> sol.s_grid[i] >> sol.v_star[i] >> sol.pi_star[i])) throw std::runtime_error("truncated grid rows");
  }
  if (rows < 2) throw std::runtime_error("grid solution needs at least two rows");
  sol.dv_star = centered_slopes(sol.s_grid, sol.v_star);
  return sol;
}

void save_riccati_solution(std::ostream& os, const RiccatiSolution& sol) {
  os << kRiccatiHeader << '\n' << std::setprecision(17);
  os << "iterations " << sol.iterations << '\n';
  os << "residual " << sol.residual << '\n';
  write_matrix(os, "P", sol.P);
  write_matrix(os, "K", sol.K);
}

RiccatiSolution load_riccati_solution(std::istream& is) {
  expect_line(is, kRiccatiHeader);
  RiccatiSolution sol;
  sol.iterations = read_keyed<std::size_t>(is, "iterations");
  sol.residual = read_keyed<double>(is, "residual");
  sol.P = read_matrix(is, "P");
  sol.K = read_matrix(is, "K");
  return sol;
}

}  // namespace sobolev_td
