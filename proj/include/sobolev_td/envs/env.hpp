#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace sobolev_td {

/// First-order simulator information at one (s, a).
struct EnvJacobians {
  Eigen::MatrixXd df_ds;  // dim s' x dim s
  Eigen::MatrixXd df_da;  // dim s' x dim a
  Eigen::VectorXd dr_ds;
  Eigen::VectorXd dr_da;
};

struct StepResult {
  Eigen::VectorXd s_next;
  double r = 0.0;
};

struct TransitionRecord {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  EnvJacobians jac;
};

/// Deterministic differentiable environment s' = f(s, a), reward r(s, a).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual double gamma() const = 0;

  virtual StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const = 0;
  virtual EnvJacobians jacobians(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const = 0;

  /// step() plus jacobians() at the same point.
  TransitionRecord transition(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
};

/// s' = a, r = 0.2 a - (a - s)^2 on s, a in [-1, 1]. Inputs outside the box
/// are rejected, never clipped.
class Toy1DEnv final : public Environment {
 public:
  static constexpr double kLow = -1.0;
  static constexpr double kHigh = 1.0;

  explicit Toy1DEnv(double gamma = 0.9);

  std::string id() const override { return "toy1d"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  double gamma() const override { return gamma_; }

  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;
  EnvJacobians jacobians(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;

  static double reward(double s, double a) { return 0.2 * a - (a - s) * (a - s); }
  static double reward_ds(double s, double a) { return 2.0 * (a - s); }
  static double reward_da(double s, double a) { return 0.2 - 2.0 * (a - s); }

 private:
  double gamma_;
};

/// Scalar convenience forms of the toy dynamics.
std::pair<double, double> toy1d_step(double s, double a);
EnvJacobians toy1d_jacobians(double s, double a);

/// s' = A s + B a, r = -(s' Qc s + a' Rc a).
class LqrEnv final : public Environment {
 public:
  LqrEnv(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd q_cost, Eigen::MatrixXd r_cost, double gamma);

  /// Scalar A = B = Qc = Rc = 1, gamma = 0.9.
  static LqrEnv scalar_default();

  std::string id() const override { return "lqr"; }
  std::size_t state_dim() const override { return static_cast<std::size_t>(A_.rows()); }
  std::size_t action_dim() const override { return static_cast<std::size_t>(B_.cols()); }
  double gamma() const override { return gamma_; }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::MatrixXd& q_cost() const { return q_cost_; }
  const Eigen::MatrixXd& r_cost() const { return r_cost_; }

  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;
  EnvJacobians jacobians(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;

 private:
  void check(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;

  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
  Eigen::MatrixXd q_cost_;
  Eigen::MatrixXd r_cost_;
  double gamma_;
};

StepResult lqr_step(const LqrEnv& env, const Eigen::VectorXd& s, const Eigen::VectorXd& a);
EnvJacobians lqr_jacobians(const LqrEnv& env, const Eigen::VectorXd& s, const Eigen::VectorXd& a);

}  // namespace sobolev_td
