#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sobolev_td/eval/metrics.hpp"
#include "sobolev_td/oracle/oracle.hpp"
#include "sobolev_td/training/trainer.hpp"

namespace sobolev_td {

struct Snapshot {
  std::size_t step = 0;
  FlatParams critic;
  std::optional<LinearActor> actor;
};

struct RunOptions {
  /// Steps (after that many updates) at which online parameters are copied out.
  std::vector<std::size_t> snapshot_steps;
  /// Skip metric evaluation entirely (snapshots only).
  bool skip_metrics = false;
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  std::vector<Snapshot> snapshots;
  FlatParams final_critic;
  std::optional<LinearActor> final_actor;
};

/// Metric evaluation steps: 0, every eval_every, and total_steps.
std::vector<std::size_t> eval_schedule(std::size_t total_steps, std::size_t eval_every);

/// Toy Q-learning run. cfg.algo must be q_learning and cfg.gamma must match
/// the oracle's discount.
RunResult run_experiment(const TrainerConfig& cfg, const CriticModel& model, const Toy1DEnv& env,
                         const GridSolution& oracle, const RunOptions& opts = {});

/// LQR actor-critic run with a linear actor started at K = 0. The replay
/// buffer is warm-started with batch_size transitions; after that one
/// transition is collected before every update.
RunResult run_experiment(const TrainerConfig& cfg, const CriticModel& model, const LqrEnv& env,
                         const RiccatiSolution& oracle, const RunOptions& opts = {});

}  // namespace sobolev_td
