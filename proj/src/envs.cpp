#include "sobolev_td/envs/env.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace sobolev_td {

namespace {

void check_box(double s, double a) {
  if (!(s >= Toy1DEnv::kLow && s <= Toy1DEnv::kHigh && a >= Toy1DEnv::kLow && a <= Toy1DEnv::kHigh)) {
    throw std::invalid_argument("toy1d: (s, a) outside [-1, 1]^2");
  }
}

bool symmetric(const Eigen::MatrixXd& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TransitionRecord Environment::transition(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  StepResult st = step(s, a);
  return {s, a, st.r, std::move(st.s_next), jacobians(s, a)};
}

Toy1DEnv::Toy1DEnv(double gamma) : gamma_(gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("toy1d: gamma must lie in [0, 1)");
}

StepResult Toy1DEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (s.size() != 1 || a.size() != 1) throw std::invalid_argument("toy1d: expected scalar s and a");
  const auto [sn, r] = toy1d_step(s[0], a[0]);
  return {Eigen::VectorXd::Constant(1, sn), r};
}

EnvJacobians Toy1DEnv::jacobians(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (s.size() != 1 || a.size() != 1) throw std::invalid_argument("toy1d: expected scalar s and a");
  return toy1d_jacobians(s[0], a[0]);
}

std::pair<double, double> toy1d_step(double s, double a) {
  check_box(s, a);
  return {a, Toy1DEnv::reward(s, a)};
}

EnvJacobians toy1d_jacobians(double s, double a) {
  check_box(s, a);
  EnvJacobians j;
  j.df_ds = Eigen::MatrixXd::Zero(1, 1);
  j.df_da = Eigen::MatrixXd::Ones(1, 1);
  j.dr_ds = Eigen::VectorXd::Constant(1, Toy1DEnv::reward_ds(s, a));
  j.dr_da = Eigen::VectorXd::Constant(1, Toy1DEnv::reward_da(s, a));
  return j;
}

LqrEnv::LqrEnv(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd q_cost, Eigen::MatrixXd r_cost, double gamma)
    : A_(std::move(A)), B_(std::move(B)), q_cost_(std::move(q_cost)), r_cost_(std::move(r_cost)), gamma_(gamma) {
  const auto n = A_.rows();
  const auto m = B_.cols();
  if (A_.cols() != n || B_.rows() != n || q_cost_.rows() != n || r_cost_.rows() != m) {
    throw std::invalid_argument("lqr: inconsistent matrix shapes");
  }
  if (!symmetric(q_cost_) || min_eigenvalue(q_cost_) < -1e-12) {
    throw std::invalid_argument("lqr: state cost must be symmetric positive semidefinite");
  }
  if (!symmetric(r_cost_) || min_eigenvalue(r_cost_) <= 0.0) {
    throw std::invalid_argument("lqr: action cost must be symmetric positive definite");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("lqr: gamma must lie in (0, 1]");
}

LqrEnv LqrEnv::scalar_default() {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  return LqrEnv(one, one, one, one, 0.9);
}

void LqrEnv::check(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (s.size() != A_.rows() || a.size() != B_.cols()) throw std::invalid_argument("lqr: dimension mismatch");
}

StepResult LqrEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  check(s, a);
  const double cost = s.dot(q_cost_ * s) + a.dot(r_cost_ * a);
  return {A_ * s + B_ * a, -cost};
}

EnvJacobians LqrEnv::jacobians(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  check(s, a);
  return {A_, B_, -2.0 * (q_cost_ * s), -2.0 * (r_cost_ * a)};
}

StepResult lqr_step(const LqrEnv& env, const Eigen::VectorXd& s, const Eigen::VectorXd& a) { return env.step(s, a); }

EnvJacobians lqr_jacobians(const LqrEnv& env, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  return env.jacobians(s, a);
}

}  // namespace sobolev_td
