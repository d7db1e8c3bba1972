#include "sobolev_td/targets/targets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sobolev_td {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

FirstOrderTarget assemble(const TransitionRecord& trans, double gamma, const CriticEval& boot,
                          const Eigen::VectorXd& bracket, Eigen::VectorXd a_prime, bool interior) {
  FirstOrderTarget t;
  t.y = trans.r + gamma * boot.q;
  t.dy_ds = trans.jac.dr_ds + gamma * (trans.jac.df_ds.transpose() * bracket);
  t.dy_da = trans.jac.dr_da + gamma * (trans.jac.df_da.transpose() * bracket);
  t.a_prime = std::move(a_prime);
  t.a_prime_interior = interior;
  return t;
}

}  // namespace

std::vector<FirstOrderTarget> max_targets(const CriticModel& q_model, std::span<const double> q_targ_params,
                                          std::span<const TransitionRecord> batch, double gamma,
                                          std::span<const double> a_grid) {
  if (a_grid.empty()) throw std::invalid_argument("max_target: empty action grid");
  if (q_model.action_dim() != 1) throw std::invalid_argument("max_target: grid argmax needs a scalar action");
  if (!std::is_sorted(a_grid.begin(), a_grid.end())) throw std::invalid_argument("max_target: grid must be sorted");

  const std::size_t ds = q_model.state_dim();
  const std::size_t d = ds + 1;
  const std::size_t g = a_grid.size();
  std::vector<double> inputs(batch.size() * g * d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (static_cast<std::size_t>(batch[i].s_next.size()) != ds) throw std::invalid_argument("max_target: bad s'");
    for (std::size_t j = 0; j < g; ++j) {
      double* col = inputs.data() + (i * g + j) * d;
      std::copy_n(batch[i].s_next.data(), ds, col);
      col[ds] = a_grid[j];
    }
  }
  std::vector<double> q(batch.size() * g);
  q_model.values(q_targ_params, inputs, q);

  std::vector<FirstOrderTarget> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* row = q.data() + i * g;
    std::size_t best = 0;
    for (std::size_t j = 1; j < g; ++j) {
      if (row[j] > row[best]) best = j;
    }
    bool unique = true;
    for (std::size_t j = 0; j < g; ++j) {
      if (j != best && row[j] == row[best]) unique = false;
    }
    const bool interior = unique && best > 0 && best + 1 < g;
    const Eigen::VectorXd a_prime = Eigen::VectorXd::Constant(1, a_grid[best]);
    const CriticEval boot = q_model.eval(q_targ_params, as_span(batch[i].s_next), as_span(a_prime));
    // Stop-gradient through a': only the direct dQ/ds' term survives.
    out.push_back(assemble(batch[i], gamma, boot, boot.gs, a_prime, interior));
  }
  return out;
}

FirstOrderTarget max_target(const CriticModel& q_model, std::span<const double> q_targ_params,
                            const TransitionRecord& trans, double gamma, std::span<const double> a_grid) {
  return max_targets(q_model, q_targ_params, {&trans, 1}, gamma, a_grid).front();
}

FirstOrderTarget actor_target(const CriticModel& q_model, std::span<const double> q_targ_params,
                              const LinearActor& mu_targ, const TransitionRecord& trans, double gamma) {
  const auto mu = mu_targ.eval(trans.s_next);
  const CriticEval boot = q_model.eval(q_targ_params, as_span(trans.s_next), as_span(mu.a));
  const Eigen::VectorXd bracket = boot.gs + mu.da_ds.transpose() * boot.ga;
  return assemble(trans, gamma, boot, bracket, mu.a, true);
}

ConsistencyReport target_gradient_consistency_check(const TargetFn& target,
                                                    std::span<const std::pair<Eigen::VectorXd, Eigen::VectorXd>> points,
                                                    double h, bool danskin_scoping) {
  if (!(h > 0.0)) throw std::invalid_argument("target_gradient_consistency_check: h must be positive");
  ConsistencyReport rep;
  for (const auto& [s, a] : points) {
    const FirstOrderTarget center = target(s, a);
    if (danskin_scoping && !center.a_prime_interior) {
      ++rep.skipped;
      continue;
    }
    const Eigen::Index ns = s.size();
    const Eigen::Index na = a.size();
    Eigen::VectorXd fd(ns + na);
    bool ok = true;
    for (Eigen::Index k = 0; k < ns + na && ok; ++k) {
      Eigen::VectorXd sp = s, sm = s, ap = a, am = a;
      if (k < ns) {
        sp[k] += h;
        sm[k] -= h;
      } else {
        ap[k - ns] += h;
        am[k - ns] -= h;
      }
      try {
        const FirstOrderTarget tp = target(sp, ap);
        const FirstOrderTarget tm = target(sm, am);
        if (danskin_scoping && (tp.a_prime != center.a_prime || tm.a_prime != center.a_prime)) ok = false;
        fd[k] = (tp.y - tm.y) / (2.0 * h);
      } catch (const std::invalid_argument&) {
        ok = false;
      }
    }
    if (!ok) {
      ++rep.skipped;
      continue;
    }
    for (Eigen::Index k = 0; k < ns; ++k) rep.max_error = std::max(rep.max_error, std::abs(fd[k] - center.dy_ds[k]));
    for (Eigen::Index k = 0; k < na; ++k) {
      rep.max_error = std::max(rep.max_error, std::abs(fd[ns + k] - center.dy_da[k]));
    }
    ++rep.scored;
  }
  return rep;
}

}  // namespace sobolev_td
