#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sobolev_td/cli/config.hpp"
#include "sobolev_td/eval/metrics.hpp"
#include "sobolev_td/oracle/oracle.hpp"

namespace sobolev_td::cli {

/// Nine significant digits, as used in every CSV.
std::string format_number(double x);

/// SOBOLEV_TD_SEED_OFFSET, 0 when unset.
std::uint64_t seed_offset_from_env();

/// cfg.seed + offset, cfg.seed + offset + 1, ...
std::vector<std::uint64_t> plan_seeds(const RunPlan& plan, std::uint64_t offset);

// ---- CSV ------------------------------------------------------------------

inline constexpr const char* kMetricsHeader = "step,seed,q_mse,grad_a_mse,policy_err,mc_return";
inline constexpr const char* kSummaryHeader =
    "model,method,q_mse_mean,q_mse_std,grad_a_mse_mean,grad_a_mse_std,policy_err_mean,policy_err_std";
inline constexpr const char* kSliceHeader = "step,s,a,q_sobolev,q_baseline,q_star";

void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& is);

struct SummaryRow {
  std::string model;
  std::string method;
  MeanStd q_mse;
  MeanStd grad_a_mse;
  MeanStd policy_err;
};

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows);
std::vector<SummaryRow> read_summary_csv(std::istream& is);

struct SliceRow {
  std::size_t step = 0;
  double s = 0.0;
  double a = 0.0;
  double q_sobolev = 0.0;
  double q_baseline = 0.0;
  double q_star = 0.0;
};

void write_slice_csv(std::ostream& os, std::span<const SliceRow> rows);
std::vector<SliceRow> read_slice_csv(std::istream& is);

// ---- oracles --------------------------------------------------------------

GridSolution toy_oracle(const RunPlan& plan);
LqrEnv lqr_env(const RunPlan& plan);

// ---- plateau summaries ------------------------------------------------------

/// Mean of one seed's eval points in the last 10% of the run (steps at or
/// after total_steps - total_steps / 10). With total_steps == 0 that is the
/// step-0 row.
MetricsRow plateau_value(std::span<const MetricsRow> seed_rows, std::size_t total_steps);

/// Per-seed plateau values, then mean and sample std over seeds.
SummaryRow summarize_cell(const std::string& model, const std::string& method,
                          const std::vector<std::vector<MetricsRow>>& per_seed, std::size_t total_steps);

/// |last - first| / |first| of the seed-mean series inside the plateau window,
/// worst over the three table metrics.
double plateau_relative_change(const std::vector<std::vector<MetricsRow>>& per_seed, std::size_t total_steps);

struct Table1Cell {
  SummaryRow summary;
  std::vector<std::vector<MetricsRow>> per_seed;
  std::size_t total_steps = 0;
  double plateau_change = 0.0;
};

// ---- commands -------------------------------------------------------------

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Rethrows the first
/// failure after all tasks have finished.
void run_parallel(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Writes <out>/manifest.txt: provenance as comments, then the resolved config
/// with the seed offset folded into `seed`, so `--config manifest.txt`
/// reproduces the run.
void write_manifest(const RunPlan& plan, std::uint64_t seed_offset, const std::string& oracle_desc);

/// `run`: per-seed metrics_seed<N>.csv, merged metrics.csv, aggregate.csv and
/// final checkpoints.
void run_command(const RunPlan& plan, std::ostream& log);

/// `table1`: every (model, method) cell over plan.seeds seeds. Writes
/// summary.csv, plateau.csv and per-seed metrics under <out>/table1/.
std::vector<Table1Cell> run_table1(const RunPlan& plan, std::ostream& log);

/// Checkpoint path for one (model, method, seed, step).
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const std::string& model,
                                      const std::string& method, std::uint64_t seed, std::size_t step);

/// Trains both methods up to the largest slice step, saving critic
/// checkpoints every plan.checkpoint_every steps (and at each slice step).
void train_slice_checkpoints(const RunPlan& plan, std::ostream& log);

/// Slice rows for one seed from saved checkpoints; throws naming the step
/// when a checkpoint is missing.
std::vector<SliceRow> dump_q_slices(const std::filesystem::path& checkpoint_dir, const CriticModel& model,
                                    const std::string& model_name, std::uint64_t seed, const GridSolution& oracle,
                                    std::span<const double> states, std::span<const std::size_t> steps);

/// `slices`: trains, then writes slices_seed<N>.csv and the seed-mean
/// slices.csv.
void run_slices(const RunPlan& plan, std::ostream& log);

/// Dispatch on plan.command.
void execute(const RunPlan& plan, std::ostream& log);

}  // namespace sobolev_td::cli
