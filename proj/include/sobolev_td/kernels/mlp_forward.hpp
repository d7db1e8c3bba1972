#pragma once

#include <span>

#include "sobolev_td/critics/critic.hpp"

namespace sobolev_td::kernels {

// Batched value-only forward pass of an MLP critic over the columns of
// `inputs` (input_dim x n, column-major).

/// Reference implementation: one column at a time, plain loops.
void mlp_values_serial(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                       std::span<double> out);

/// Fixed-size column blocks evaluated as dense matrix products, blocks
/// distributed over OpenMP threads. Results do not depend on thread count.
void mlp_values_omp(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                    std::span<double> out);

/// Loss terms and parameter gradient for a batch, all samples at once: the
/// value rows and one tangent block per input coordinate go through each
/// layer as matrix products. See CriticModel::batched_loss for the contract.
void mlp_loss_batched(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                      std::span<const double> y, std::span<const double> dy, double lambda_s, double lambda_a,
                      bool tangents, std::span<double> terms, std::span<double> grad);

}  // namespace sobolev_td::kernels
