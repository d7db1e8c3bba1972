#include "sobolev_td/kernels/bellman_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sobolev_td/envs/env.hpp"

namespace sobolev_td::kernels {

namespace {

void check(std::span<const double> grid, std::span<const double> v_in, std::span<double> v_out,
           std::span<std::size_t> argmax_out) {
  if (grid.empty() || v_in.size() != grid.size() || v_out.size() != grid.size() || argmax_out.size() != grid.size()) {
    throw std::invalid_argument("toy_bellman_sweep: size mismatch");
  }
}

inline void backup_row(std::span<const double> grid, std::span<const double> v_in, double gamma, std::size_t i,
                       double& best, std::size_t& arg) {
  const double s = grid[i];
  best = Toy1DEnv::reward(s, grid[0]) + gamma * v_in[0];
  arg = 0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double q = Toy1DEnv::reward(s, grid[j]) + gamma * v_in[j];
    if (q > best) {
      best = q;
      arg = j;
    }
  }
}

}  // namespace

double toy_bellman_sweep_serial(std::span<const double> grid, std::span<const double> v_in, double gamma,
                                std::span<double> v_out, std::span<std::size_t> argmax_out) {
  check(grid, v_in, v_out, argmax_out);
  double change = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    backup_row(grid, v_in, gamma, i, v_out[i], argmax_out[i]);
    change = std::max(change, std::abs(v_out[i] - v_in[i]));
  }
  return change;
}

double toy_bellman_sweep_omp(std::span<const double> grid, std::span<const double> v_in, double gamma,
                             std::span<double> v_out, std::span<std::size_t> argmax_out) {
  check(grid, v_in, v_out, argmax_out);
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  double change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : change)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    backup_row(grid, v_in, gamma, row, v_out[row], argmax_out[row]);
    change = std::max(change, std::abs(v_out[row] - v_in[row]));
  }
  return change;
}

}  // namespace sobolev_td::kernels
