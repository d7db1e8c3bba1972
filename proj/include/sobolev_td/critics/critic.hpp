#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/diff/critic_model.hpp"

namespace sobolev_td {

/// Q = t0 + t1 s + t2 a + t3 s^2 + t4 s a + t5 a^2 for scalar s and a.
class QuadraticCritic final : public CriticModel {
 public:
  static constexpr std::size_t kNumParams = 6;

  std::string kind() const override { return "quadratic"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  FlatParams init_params(std::uint64_t seed) const override;
  ParamTape::NodeId record(ParamTape& tape, ParamTape::NodeId input) const override;
  CriticEval eval(std::span<const double> params, std::span<const double> s,
                  std::span<const double> a) const override;
  void forward_plain(std::span<const double> params, std::span<const double> x, PlainCache& cache) const override;
  void backprop_plain(std::span<const double> params, std::span<const double> x, const PlainCache& cache,
                      double seed, std::span<double> grad) const override;
  void values(std::span<const double> params, std::span<const double> inputs, std::span<double> out) const override;
};

/// Fully connected network on (s, a) with leaky-ReLU hidden layers and a
/// scalar output. Weights are stored column-major per layer, segments
/// "w0", "b0", "w1", "b1", ...
class MlpCritic final : public CriticModel {
 public:
  MlpCritic(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_layers = 3, std::size_t width = 128,
            double slope = 0.01);

  std::string kind() const override { return "mlp"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  std::size_t hidden_layers() const { return hidden_layers_; }
  std::size_t width() const { return width_; }
  std::size_t num_params() const;

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  FlatParams init_params(std::uint64_t seed) const override;
  ParamTape::NodeId record(ParamTape& tape, ParamTape::NodeId input) const override;
  void forward_plain(std::span<const double> params, std::span<const double> x, PlainCache& cache) const override;
  void backprop_plain(std::span<const double> params, std::span<const double> x, const PlainCache& cache,
                      double seed, std::span<double> grad) const override;
  void values(std::span<const double> params, std::span<const double> inputs, std::span<double> out) const override;
  bool batched_loss(std::span<const double> params, std::span<const double> inputs, std::span<const double> y,
                    std::span<const double> dy, double lambda_s, double lambda_a, bool tangents,
                    std::span<double> terms, std::span<double> grad) const override;

  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;
  };
  const std::vector<Layer>& layers() const { return layers_; }
  double slope() const { return slope_; }

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t hidden_layers_;
  std::size_t width_;
  double slope_;
  std::vector<Layer> layers_;
};

enum class CriticKind { Quadratic, Mlp };

std::unique_ptr<CriticModel> make_critic(CriticKind kind, std::size_t state_dim = 1, std::size_t action_dim = 1,
                                         std::size_t hidden_layers = 3);

/// Dispatches to the model's evaluation (closed form where available).
CriticEval critic_eval(const CriticModel& model, const FlatParams& params, std::span<const double> s,
                       std::span<const double> a);

/// Deterministic linear policy a = K s.
class LinearActor {
 public:
  LinearActor(std::size_t state_dim, std::size_t action_dim);
  explicit LinearActor(Eigen::MatrixXd gain);

  std::size_t state_dim() const { return static_cast<std::size_t>(gain_.cols()); }
  std::size_t action_dim() const { return static_cast<std::size_t>(gain_.rows()); }
  const Eigen::MatrixXd& gain() const { return gain_; }

  /// Parameters are the entries of K in column-major order.
  FlatParams params() const;
  void set_params(const FlatParams& p);

  struct Output {
    Eigen::VectorXd a;
    Eigen::MatrixXd da_ds;
  };
  Output eval(const Eigen::VectorXd& s) const;

 private:
  Eigen::MatrixXd gain_;
};

LinearActor::Output actor_eval(const LinearActor& actor, const Eigen::VectorXd& s);

}  // namespace sobolev_td
