#include "sobolev_td/diff/critic_model.hpp"

#include <stdexcept>

#include "sobolev_td/diff/sobolev_loss.hpp"

namespace sobolev_td {

void CriticModel::check_dims(std::span<const double> s, std::span<const double> a) const {
  if (s.size() != state_dim() || a.size() != action_dim()) {
    throw std::invalid_argument(kind() + " critic: input dimension mismatch");
  }
}

CriticEval CriticModel::eval(std::span<const double> params, std::span<const double> s,
                             std::span<const double> a) const {
  return eval_with_input_grads(*this, params, s, a);
}

void CriticModel::values(std::span<const double> params, std::span<const double> inputs,
                         std::span<double> out) const {
  const std::size_t d = input_dim();
  if (inputs.size() != out.size() * d) throw std::invalid_argument("CriticModel::values: size mismatch");
  PlainCache cache;
  for (std::size_t i = 0; i < out.size(); ++i) {
    forward_plain(params, inputs.subspan(i * d, d), cache);
    out[i] = cache.q;
  }
}

bool CriticModel::batched_loss(std::span<const double>, std::span<const double>, std::span<const double>,
                               std::span<const double>, double, double, bool, std::span<double>,
                               std::span<double>) const {
  return false;
}

}  // namespace sobolev_td
