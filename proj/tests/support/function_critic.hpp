#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "sobolev_td/diff/critic_model.hpp"
#include "sobolev_td/oracle/oracle.hpp"

namespace sobolev_td::testing {

// Parameter-free scalar critic defined by closures. Used to plug oracles
// (tabulated Q*, Q* + c, constructed optima) into code that takes a
// CriticModel.
class FunctionCritic final : public CriticModel {
 public:
  using Fn = std::function<double(double, double)>;

  FunctionCritic(Fn q, Fn gs, Fn ga) : q_(std::move(q)), gs_(std::move(gs)), ga_(std::move(ga)) {}

  std::string kind() const override { return "function"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  FlatParams init_params(std::uint64_t) const override { return {}; }

  ParamTape::NodeId record(ParamTape&, ParamTape::NodeId) const override {
    throw std::logic_error("FunctionCritic has no tape form");
  }

  CriticEval eval(std::span<const double>, std::span<const double> s, std::span<const double> a) const override {
    check_dims(s, a);
    CriticEval e;
    e.q = q_(s[0], a[0]);
    e.gs = Eigen::VectorXd::Constant(1, gs_(s[0], a[0]));
    e.ga = Eigen::VectorXd::Constant(1, ga_(s[0], a[0]));
    return e;
  }

  void forward_plain(std::span<const double>, std::span<const double> x, PlainCache& cache) const override {
    cache.q = q_(x[0], x[1]);
  }
  void backprop_plain(std::span<const double>, std::span<const double>, const PlainCache&, double,
                      std::span<double>) const override {}

 private:
  Fn q_;
  Fn gs_;
  Fn ga_;
};

// Tabulated Q* of a grid solution, optionally shifted by a constant.
inline FunctionCritic oracle_critic(const GridSolution& sol, double offset = 0.0) {
  return FunctionCritic([&sol, offset](double s, double a) { return q_star_eval(sol, s, a) + offset; },
                        [&sol](double s, double a) { return q_star_grad_s(sol, s, a); },
                        [&sol](double s, double a) { return q_star_grad_a(sol, s, a); });
}

}  // namespace sobolev_td::testing
