#pragma once

#include <span>

namespace sobolev_td::kernels {

/// One Bellman backup of the toy problem on a shared state/action grid:
///   v_out[i] = max_j r(grid[i], grid[j]) + gamma * v_in[j]
/// with argmax_out[i] the smallest maximizing j. Returns max_i |v_out - v_in|.
double toy_bellman_sweep_serial(std::span<const double> grid, std::span<const double> v_in, double gamma,
                                std::span<double> v_out, std::span<std::size_t> argmax_out);

/// Same sweep with rows split across OpenMP threads; bit-identical to the
/// serial version.
double toy_bellman_sweep_omp(std::span<const double> grid, std::span<const double> v_in, double gamma,
                             std::span<double> v_out, std::span<std::size_t> argmax_out);

}  // namespace sobolev_td::kernels
