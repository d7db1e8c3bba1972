#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sobolev_td {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}
};

/// One bias-corrected Adam descent step on params.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// target <- rho * target + (1 - rho) * online
void polyak_update(std::span<double> target, std::span<const double> online, double rho);

}  // namespace sobolev_td
