#include "sobolev_td/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>

namespace sobolev_td {

namespace {

void require_scalar(const CriticModel& model, const char* what) {
  if (model.state_dim() != 1 || model.action_dim() != 1) {
    throw std::invalid_argument(std::string(what) + ": needs scalar state and action");
  }
}

void require_points(std::size_t n, const char* what) {
  if (n == 0) throw std::invalid_argument(std::string(what) + ": empty grid");
}

std::vector<double> stack_inputs(const EvalPoints& pts) {
  const auto ds = pts.s.rows();
  const auto da = pts.a.rows();
  std::vector<double> x(static_cast<std::size_t>((ds + da) * pts.s.cols()));
  for (Eigen::Index c = 0; c < pts.s.cols(); ++c) {
    double* col = x.data() + c * (ds + da);
    for (Eigen::Index i = 0; i < ds; ++i) col[i] = pts.s(i, c);
    for (Eigen::Index i = 0; i < da; ++i) col[ds + i] = pts.a(i, c);
  }
  return x;
}

std::vector<double> critic_values(const CriticModel& model, std::span<const double> params, const EvalPoints& pts) {
  const auto x = stack_inputs(pts);
  std::vector<double> q(pts.size());
  model.values(params, x, q);
  return q;
}

// Squared errors are summed in index order after the parallel loop so the
// result does not depend on the thread count.
template <typename F>
double mean_of(std::size_t n, F&& f) {
  std::vector<double> terms(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) terms[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
  double total = 0.0;
  for (double t : terms) total += t;
  return total / static_cast<double>(n);
}

double sq(double x) { return x * x; }

}  // namespace

EvalPoints scalar_eval_grid(std::size_t n_s, std::size_t n_a) {
  const auto sg = uniform_grid(n_s);
  const auto ag = uniform_grid(n_a);
  EvalPoints pts;
  pts.s.resize(1, static_cast<Eigen::Index>(n_s * n_a));
  pts.a.resize(1, static_cast<Eigen::Index>(n_s * n_a));
  Eigen::Index c = 0;
  for (double s : sg) {
    for (double a : ag) {
      pts.s(0, c) = s;
      pts.a(0, c) = a;
      ++c;
    }
  }
  return pts;
}

EvalPoints lqr_eval_points(std::size_t state_dim, std::size_t action_dim, std::size_t n_s, std::size_t n_a) {
  if (state_dim == 1 && action_dim == 1) return scalar_eval_grid(n_s, n_a);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(n_s * n_a);
  EvalPoints pts;
  pts.s.resize(static_cast<Eigen::Index>(state_dim), n);
  pts.a.resize(static_cast<Eigen::Index>(action_dim), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < pts.s.rows(); ++i) pts.s(i, c) = unif(rng);
    for (Eigen::Index i = 0; i < pts.a.rows(); ++i) pts.a(i, c) = unif(rng);
  }
  return pts;
}

double q_mse(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
             const EvalPoints& grid) {
  require_scalar(model, "q_mse");
  require_points(grid.size(), "q_mse");
  const auto q = critic_values(model, params, grid);
  return mean_of(grid.size(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    return sq(q[i] - q_star_eval(sol, grid.s(0, c), grid.a(0, c)));
  });
}

double grad_a_mse(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                  const EvalPoints& grid) {
  require_scalar(model, "grad_a_mse");
  require_points(grid.size(), "grad_a_mse");
  return mean_of(grid.size(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double s = grid.s(0, c);
    const double a = grid.a(0, c);
    const CriticEval e = model.eval(params, {&s, 1}, {&a, 1});
    return sq(e.ga[0] - q_star_grad_a(sol, s, a));
  });
}

std::vector<double> greedy_actions(const CriticModel& model, std::span<const double> params,
                                   std::span<const double> states, std::span<const double> a_grid) {
  require_scalar(model, "greedy_actions");
  if (a_grid.empty()) throw std::invalid_argument("greedy_actions: empty action grid");
  constexpr std::size_t kChunk = 64;
  const std::size_t na = a_grid.size();
  std::vector<double> out(states.size());
  std::vector<double> x;
  std::vector<double> q;
  for (std::size_t start = 0; start < states.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, states.size() - start);
    x.resize(2 * len * na);
    q.resize(len * na);
    for (std::size_t k = 0; k < len; ++k) {
      for (std::size_t j = 0; j < na; ++j) {
        x[2 * (k * na + j)] = states[start + k];
        x[2 * (k * na + j) + 1] = a_grid[j];
      }
    }
    model.values(params, x, q);
    for (std::size_t k = 0; k < len; ++k) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < na; ++j) {
        if (q[k * na + j] > q[k * na + best]) best = j;
      }
      out[start + k] = a_grid[best];
    }
  }
  return out;
}

double policy_error(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                    std::span<const double> s_grid, std::span<const double> a_grid) {
  require_points(s_grid.size(), "policy_error");
  const auto greedy = greedy_actions(model, params, s_grid, a_grid);
  double total = 0.0;
  for (std::size_t i = 0; i < s_grid.size(); ++i) total += sq(greedy[i] - pi_star_eval(sol, s_grid[i]));
  return total / static_cast<double>(s_grid.size());
}

double mc_return(const Policy& policy, const Environment& env, std::span<const Eigen::VectorXd> starts,
                 std::size_t horizon, double gamma) {
  if (horizon == 0) throw std::invalid_argument("mc_return: horizon must be at least 1");
  if (starts.empty()) throw std::invalid_argument("mc_return: no start states");
  double total = 0.0;
  for (const auto& s0 : starts) {
    Eigen::VectorXd s = s0;
    double ret = 0.0;
    double disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const StepResult st = env.step(s, policy(s));
      ret += disc * st.r;
      disc *= gamma;
      s = st.s_next;
    }
    total += ret;
  }
  return total / static_cast<double>(starts.size());
}

Policy memoized_greedy_policy(const CriticModel& model, std::span<const double> params, std::vector<double> a_grid) {
  require_scalar(model, "memoized_greedy_policy");
  auto cache = std::make_shared<std::map<double, double>>();
  auto grid = std::make_shared<const std::vector<double>>(std::move(a_grid));
  return [&model, params, cache, grid](const Eigen::VectorXd& s) {
    auto it = cache->find(s[0]);
    if (it == cache->end()) {
      const double st = s[0];
      it = cache->emplace(st, greedy_actions(model, params, {&st, 1}, *grid)[0]).first;
    }
    return Eigen::VectorXd::Constant(1, it->second);
  };
}

std::vector<Eigen::VectorXd> scalar_starts(std::size_t n) {
  std::vector<Eigen::VectorXd> out;
  for (double s : uniform_grid(n)) out.push_back(Eigen::VectorXd::Constant(1, s));
  return out;
}

MetricsRow toy_metrics(const CriticModel& model, std::span<const double> params, const GridSolution& sol,
                       const Toy1DEnv& env, const ToyEvalSpec& spec) {
  MetricsRow row;
  row.q_mse = q_mse(model, params, sol, spec.grid);
  row.grad_a_mse = grad_a_mse(model, params, sol, spec.grid);
  row.policy_err = policy_error(model, params, sol, spec.policy_states, spec.policy_actions);
  row.mc_return = mc_return(memoized_greedy_policy(model, params, spec.policy_actions), env, spec.starts,
                            spec.horizon, env.gamma());
  return row;
}

double lqr_q_mse(const CriticModel& model, std::span<const double> params, const LqrEnv& env,
                 const RiccatiSolution& sol, const EvalPoints& pts) {
  require_points(pts.size(), "lqr_q_mse");
  const auto q = critic_values(model, params, pts);
  return mean_of(pts.size(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    return sq(q[i] - lqr_q_star_eval(env, sol, pts.s.col(c), pts.a.col(c)).q);
  });
}

double lqr_grad_a_mse(const CriticModel& model, std::span<const double> params, const LqrEnv& env,
                      const RiccatiSolution& sol, const EvalPoints& pts) {
  require_points(pts.size(), "lqr_grad_a_mse");
  return mean_of(pts.size(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd s = pts.s.col(c);
    const Eigen::VectorXd a = pts.a.col(c);
    const CriticEval e = model.eval(params, {s.data(), static_cast<std::size_t>(s.size())},
                                    {a.data(), static_cast<std::size_t>(a.size())});
    return (e.ga - lqr_q_star_eval(env, sol, s, a).ga).squaredNorm();
  });
}

double lqr_policy_error(const LinearActor& actor, const RiccatiSolution& sol, const Eigen::MatrixXd& states) {
  if (states.cols() == 0) throw std::invalid_argument("lqr_policy_error: no states");
  const Eigen::MatrixXd diff = (actor.gain() + sol.K) * states;
  return diff.colwise().squaredNorm().sum() / static_cast<double>(states.cols());
}

LqrEvalSpec default_lqr_eval_spec(const LqrEnv& env) {
  LqrEvalSpec spec;
  spec.points = lqr_eval_points(env.state_dim(), env.action_dim());
  if (env.state_dim() == 1) {
    const auto g = uniform_grid(kEvalGridPoints);
    spec.policy_states = Eigen::Map<const Eigen::RowVectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    spec.starts = scalar_starts();
  } else {
    const EvalPoints pts = lqr_eval_points(env.state_dim(), env.action_dim(), kEvalGridPoints, 1);
    spec.policy_states = pts.s;
    for (std::size_t i = 0; i < kMcStarts; ++i) spec.starts.push_back(pts.s.col(static_cast<Eigen::Index>(i)));
  }
  return spec;
}

MetricsRow lqr_metrics(const CriticModel& model, std::span<const double> params, const LinearActor& actor,
                       const LqrEnv& env, const RiccatiSolution& sol, const LqrEvalSpec& spec) {
  MetricsRow row;
  row.q_mse = lqr_q_mse(model, params, env, sol, spec.points);
  row.grad_a_mse = lqr_grad_a_mse(model, params, env, sol, spec.points);
  row.policy_err = lqr_policy_error(actor, sol, spec.policy_states);
  const Policy pol = [&actor](const Eigen::VectorXd& s) { return actor.eval(s).a; };
  row.mc_return = mc_return(pol, env, spec.starts, spec.horizon, env.gamma());
  return row;
}

std::vector<AggregateRow> aggregate_seeds(std::span<const MetricsRow> rows) {
  std::map<std::uint64_t, std::set<std::size_t>> steps_by_seed;
  std::map<std::size_t, std::vector<const MetricsRow*>> by_step;
  for (const auto& r : rows) {
    if (!steps_by_seed[r.seed].insert(r.step).second) {
      throw std::invalid_argument("aggregate_seeds: duplicate (seed, step) row");
    }
    by_step[r.step].push_back(&r);
  }
  for (const auto& [seed, steps] : steps_by_seed) {
    if (steps != steps_by_seed.begin()->second) {
      throw std::invalid_argument("aggregate_seeds: seed " + std::to_string(seed) + " has a different step set");
    }
  }
  auto stat = [](const std::vector<const MetricsRow*>& group, double MetricsRow::*field) {
    MeanStd out;
    double lo = group.front()->*field;
    double hi = lo;
    for (const auto* r : group) {
      out.mean += r->*field;
      lo = std::min(lo, r->*field);
      hi = std::max(hi, r->*field);
    }
    // Rounding in the sum can push the mean an ulp past the extremes.
    out.mean = std::clamp(out.mean / static_cast<double>(group.size()), lo, hi);
    if (group.size() > 1) {
      double ss = 0.0;
      for (const auto* r : group) ss += sq(r->*field - out.mean);
      out.std = std::sqrt(ss / static_cast<double>(group.size() - 1));
    }
    return out;
  };
  std::vector<AggregateRow> out;
  for (const auto& [step, group] : by_step) {
    AggregateRow a;
    a.step = step;
    a.n_seeds = group.size();
    a.q_mse = stat(group, &MetricsRow::q_mse);
    a.grad_a_mse = stat(group, &MetricsRow::grad_a_mse);
    a.policy_err = stat(group, &MetricsRow::policy_err);
    a.mc_return = stat(group, &MetricsRow::mc_return);
    out.push_back(a);
  }
  return out;
}

}  // namespace sobolev_td
