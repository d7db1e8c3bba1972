#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sobolev_td/diff/flat_params.hpp"
#include "sobolev_td/diff/tape.hpp"

namespace sobolev_td {

/// Q(s, a) together with its input gradients.
struct CriticEval {
  double q = 0.0;
  Eigen::VectorXd gs;
  Eigen::VectorXd ga;
};

/// Activations kept by a plain (tangent-free) forward pass for backprop.
struct PlainCache {
  std::vector<double> acts;
  double q = 0.0;
};

/// d loss / dq for one sample of a mean-squared term over n samples. Every
/// loss path uses this expression so that they agree bit for bit at lambda = 0.
inline double value_seed(double err, std::size_t n) { return 2.0 * err / static_cast<double>(n); }

/// Architecture of a critic Q(s, a). Parameters live outside, in FlatParams,
/// so that online and target copies share one model object.
///
/// Inputs are the concatenation x = (s, a).
class CriticModel {
 public:
  virtual ~CriticModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  std::size_t input_dim() const { return state_dim() + action_dim(); }

  virtual FlatParams init_params(std::uint64_t seed) const = 0;

  /// Records Q(x) on the tape; `input` must be a node of size input_dim().
  virtual ParamTape::NodeId record(ParamTape& tape, ParamTape::NodeId input) const = 0;

  /// Value and input gradients. The default goes through the tape.
  virtual CriticEval eval(std::span<const double> params, std::span<const double> s,
                          std::span<const double> a) const;

  /// Tangent-free forward pass.
  virtual void forward_plain(std::span<const double> params, std::span<const double> x, PlainCache& cache) const = 0;
  /// Accumulates seed * dQ/dparams into grad using the activations in cache.
  virtual void backprop_plain(std::span<const double> params, std::span<const double> x, const PlainCache& cache,
                              double seed, std::span<double> grad) const = 0;

  /// Q at each column of `inputs` (input_dim x n, column-major).
  virtual void values(std::span<const double> params, std::span<const double> inputs, std::span<double> out) const;

  /// Fused batched loss kernel over n samples. inputs and dy are input_dim x n
  /// column-major, y has n entries. Writes the per-sample loss terms
  /// (err^2 + lambda_s |es|^2 + lambda_a |ea|^2) and accumulates the gradient of
  /// their mean into grad. With tangents == false only the value term is
  /// formed. Returns false if the model has no such kernel.
  virtual bool batched_loss(std::span<const double> params, std::span<const double> inputs,
                            std::span<const double> y, std::span<const double> dy, double lambda_s, double lambda_a,
                            bool tangents, std::span<double> terms, std::span<double> grad) const;

  void check_dims(std::span<const double> s, std::span<const double> a) const;
};

}  // namespace sobolev_td
