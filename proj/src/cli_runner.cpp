#include "sobolev_td/cli/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sobolev_td/training/experiment.hpp"

#ifndef SOBOLEV_TD_VERSION
#define SOBOLEV_TD_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace sobolev_td::cli {

namespace {

constexpr double kOracleTol = 1e-12;
constexpr std::size_t kOracleMaxIter = 100000;
constexpr std::size_t kSliceActions = 201;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

void expect_header(std::istream& is, const char* header) {
  std::string line;
  if (!std::getline(is, line) || line != header) throw std::runtime_error(std::string("csv: expected header ") + header);
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("csv: bad number '" + s + "'");
  return v;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::unique_ptr<CriticModel> make_model(const RunPlan& plan, CriticKind kind) {
  return make_critic(kind, 1, 1, plan.hidden_layers);
}

TrainerConfig with_method(TrainerConfig cfg, Method m) {
  cfg.method = m;
  cfg.apply_method();
  return cfg;
}

void log_line(std::ostream& log, const std::string& msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  log << msg << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

std::uint64_t seed_offset_from_env() {
  const char* v = std::getenv("SOBOLEV_TD_SEED_OFFSET");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long long x = std::strtoll(v, &end, 10);
  if (*end != '\0' || x < 0) throw UsageError("SOBOLEV_TD_SEED_OFFSET", "expected a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

std::vector<std::uint64_t> plan_seeds(const RunPlan& plan, std::uint64_t offset) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < plan.seeds; ++i) seeds.push_back(plan.cfg.seed + offset + i);
  return seeds;
}

void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.seed << ',' << format_number(r.q_mse) << ',' << format_number(r.grad_a_mse) << ','
       << format_number(r.policy_err) << ',' << format_number(r.mc_return) << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  expect_header(is, kMetricsHeader);
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6) throw std::runtime_error("metrics csv: expected 6 fields");
    rows.push_back({std::stoull(c[0]), std::stoull(c[1]), to_double(c[2]), to_double(c[3]), to_double(c[4]),
                    to_double(c[5])});
  }
  return rows;
}

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    os << r.model << ',' << r.method << ',' << format_number(r.q_mse.mean) << ',' << format_number(r.q_mse.std) << ','
       << format_number(r.grad_a_mse.mean) << ',' << format_number(r.grad_a_mse.std) << ','
       << format_number(r.policy_err.mean) << ',' << format_number(r.policy_err.std) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& is) {
  expect_header(is, kSummaryHeader);
  std::vector<SummaryRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw std::runtime_error("summary csv: expected 8 fields");
    rows.push_back({c[0], c[1], {to_double(c[2]), to_double(c[3])}, {to_double(c[4]), to_double(c[5])},
                    {to_double(c[6]), to_double(c[7])}});
  }
  return rows;
}

void write_slice_csv(std::ostream& os, std::span<const SliceRow> rows) {
  os << kSliceHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << format_number(r.s) << ',' << format_number(r.a) << ',' << format_number(r.q_sobolev) << ','
       << format_number(r.q_baseline) << ',' << format_number(r.q_star) << '\n';
  }
}

std::vector<SliceRow> read_slice_csv(std::istream& is) {
  expect_header(is, kSliceHeader);
  std::vector<SliceRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6) throw std::runtime_error("slice csv: expected 6 fields");
    rows.push_back({std::stoull(c[0]), to_double(c[1]), to_double(c[2]), to_double(c[3]), to_double(c[4]),
                    to_double(c[5])});
  }
  return rows;
}

GridSolution toy_oracle(const RunPlan& plan) {
  return value_iteration_toy(plan.oracle_grid, plan.cfg.gamma, kOracleTol, kOracleMaxIter);
}

LqrEnv lqr_env(const RunPlan& plan) {
  const LqrEnv d = LqrEnv::scalar_default();
  return LqrEnv(d.A(), d.B(), d.q_cost(), d.r_cost(), plan.cfg.gamma);
}

MetricsRow plateau_value(std::span<const MetricsRow> seed_rows, std::size_t total_steps) {
  const std::size_t from = total_steps - total_steps / 10;
  MetricsRow acc;
  std::size_t n = 0;
  for (const auto& r : seed_rows) {
    if (r.step < from) continue;
    acc.q_mse += r.q_mse;
    acc.grad_a_mse += r.grad_a_mse;
    acc.policy_err += r.policy_err;
    acc.mc_return += r.mc_return;
    acc.seed = r.seed;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("plateau_value: no eval points in the last 10% of the run");
  const double k = static_cast<double>(n);
  acc.q_mse /= k;
  acc.grad_a_mse /= k;
  acc.policy_err /= k;
  acc.mc_return /= k;
  acc.step = total_steps;
  return acc;
}

SummaryRow summarize_cell(const std::string& model, const std::string& method,
                          const std::vector<std::vector<MetricsRow>>& per_seed, std::size_t total_steps) {
  std::vector<MetricsRow> plateaus;
  for (const auto& rows : per_seed) plateaus.push_back(plateau_value(rows, total_steps));
  const auto agg = aggregate_seeds(plateaus);
  if (agg.size() != 1) throw std::logic_error("summarize_cell: expected one aggregate row");
  return {model, method, agg[0].q_mse, agg[0].grad_a_mse, agg[0].policy_err};
}

double plateau_relative_change(const std::vector<std::vector<MetricsRow>>& per_seed, std::size_t total_steps) {
  std::vector<MetricsRow> all;
  for (const auto& rows : per_seed) all.insert(all.end(), rows.begin(), rows.end());
  const auto agg = aggregate_seeds(all);
  const std::size_t from = total_steps - total_steps / 10;
  const AggregateRow* first = nullptr;
  const AggregateRow* last = nullptr;
  for (const auto& r : agg) {
    if (r.step < from) continue;
    if (!first) first = &r;
    last = &r;
  }
  if (!first) return 0.0;
  auto rel = [](double a, double b) { return a == 0.0 ? (b == 0.0 ? 0.0 : INFINITY) : std::abs(b - a) / std::abs(a); };
  return std::max({rel(first->q_mse.mean, last->q_mse.mean), rel(first->grad_a_mse.mean, last->grad_a_mse.mean),
                   rel(first->policy_err.mean, last->policy_err.mean)});
}

void run_parallel(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_manifest(const RunPlan& plan, std::uint64_t seed_offset, const std::string& oracle_desc) {
  RunPlan resolved = plan;
  resolved.cfg.seed += seed_offset;
  auto os = open_out(fs::path(plan.out_dir) / "manifest.txt");
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  os << "# sobolev_td manifest v1\n";
  os << "# tool_version: " << SOBOLEV_TD_VERSION << '\n';
  os << "# started_utc: " << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ") << '\n';
  os << "# env: " << to_string(plan.env) << '\n';
  os << "# oracle: " << oracle_desc << '\n';
  os << "# out_dir: " << plan.out_dir << '\n';
  os << "# seed_offset: " << seed_offset << " (already added to seed below)\n";
  os << emit_config(resolved);
}

void run_command(const RunPlan& plan, std::ostream& log) {
  const std::uint64_t offset = seed_offset_from_env();
  const auto seeds = plan_seeds(plan, offset);
  const fs::path out(plan.out_dir);
  const auto model = make_model(plan, plan.model);
  std::vector<std::vector<MetricsRow>> per_seed(seeds.size());

  if (plan.env == EnvKind::Toy1D) {
    const GridSolution oracle = toy_oracle(plan);
    std::ostringstream desc;
    desc << "value_iteration grid=" << plan.oracle_grid << " residual=" << oracle.residual
         << " iterations=" << oracle.iterations;
    write_manifest(plan, offset, desc.str());
    const Toy1DEnv env(plan.cfg.gamma);
    run_parallel(seeds.size(), plan.jobs, [&](std::size_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainerConfig cfg = plan.cfg;
      cfg.seed = seeds[i];
      const RunResult res = run_experiment(cfg, *model, env, oracle);
      per_seed[i] = res.metrics;
      auto os = open_out(out / ("metrics_seed" + std::to_string(seeds[i]) + ".csv"));
      write_metrics_csv(os, res.metrics);
      auto ck = open_out(out / ("checkpoint_seed" + std::to_string(seeds[i]) + ".txt"));
      save_params(ck, res.final_critic);
      log_line(log, "seed " + std::to_string(seeds[i]) + " done in " + format_number(seconds_since(t0)) + " s");
    });
  } else {
    const LqrEnv env = lqr_env(plan);
    const RiccatiSolution oracle = riccati_solve(env, kOracleTol, kOracleMaxIter);
    std::ostringstream desc;
    desc << std::setprecision(17) << "riccati P=" << oracle.P(0, 0) << " K=" << oracle.K(0, 0)
         << " residual=" << oracle.residual;
    write_manifest(plan, offset, desc.str());
    run_parallel(seeds.size(), plan.jobs, [&](std::size_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainerConfig cfg = plan.cfg;
      cfg.seed = seeds[i];
      const RunResult res = run_experiment(cfg, *model, env, oracle);
      per_seed[i] = res.metrics;
      auto os = open_out(out / ("metrics_seed" + std::to_string(seeds[i]) + ".csv"));
      write_metrics_csv(os, res.metrics);
      auto ck = open_out(out / ("checkpoint_seed" + std::to_string(seeds[i]) + ".txt"));
      save_params(ck, res.final_critic);
      auto ak = open_out(out / ("actor_seed" + std::to_string(seeds[i]) + ".txt"));
      save_params(ak, res.final_actor->params());
      log_line(log, "seed " + std::to_string(seeds[i]) + " done in " + format_number(seconds_since(t0)) + " s");
    });
  }

  std::vector<MetricsRow> all;
  for (const auto& rows : per_seed) all.insert(all.end(), rows.begin(), rows.end());
  auto os = open_out(out / "metrics.csv");
  write_metrics_csv(os, all);
  auto ag = open_out(out / "aggregate.csv");
  ag << "step,n_seeds,q_mse_mean,q_mse_std,grad_a_mse_mean,grad_a_mse_std,policy_err_mean,policy_err_std,"
        "mc_return_mean,mc_return_std\n";
  for (const auto& r : aggregate_seeds(all)) {
    ag << r.step << ',' << r.n_seeds;
    for (const MeanStd* m : {&r.q_mse, &r.grad_a_mse, &r.policy_err, &r.mc_return}) {
      ag << ',' << format_number(m->mean) << ',' << format_number(m->std);
    }
    ag << '\n';
  }
}

std::vector<Table1Cell> run_table1(const RunPlan& plan, std::ostream& log) {
  const std::uint64_t offset = seed_offset_from_env();
  const auto seeds = plan_seeds(plan, offset);
  const fs::path out(plan.out_dir);
  const GridSolution oracle = toy_oracle(plan);
  std::ostringstream desc;
  desc << "value_iteration grid=" << plan.oracle_grid << " residual=" << oracle.residual
       << " iterations=" << oracle.iterations;
  write_manifest(plan, offset, desc.str());
  const Toy1DEnv env(plan.cfg.gamma);

  struct CellSpec {
    CriticKind kind;
    Method method;
    std::size_t steps;
  };
  const std::vector<CellSpec> specs{{CriticKind::Quadratic, Method::Baseline, plan.table1_steps_quadratic},
                                    {CriticKind::Quadratic, Method::Sobolev, plan.table1_steps_quadratic},
                                    {CriticKind::Mlp, Method::Baseline, plan.table1_steps_mlp},
                                    {CriticKind::Mlp, Method::Sobolev, plan.table1_steps_mlp}};
  const auto quad = make_model(plan, CriticKind::Quadratic);
  const auto mlp = make_model(plan, CriticKind::Mlp);
  std::vector<Table1Cell> cells(specs.size());
  for (auto& c : cells) c.per_seed.resize(seeds.size());

  run_parallel(specs.size() * seeds.size(), plan.jobs, [&](std::size_t task) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t ci = task / seeds.size();
    const std::size_t si = task % seeds.size();
    const CellSpec& spec = specs[ci];
    TrainerConfig cfg = with_method(plan.cfg, spec.method);
    cfg.seed = seeds[si];
    cfg.total_steps = spec.steps;
    const CriticModel& model = spec.kind == CriticKind::Quadratic ? *quad : *mlp;
    const RunResult res = run_experiment(cfg, model, env, oracle);
    cells[ci].per_seed[si] = res.metrics;
    const std::string tag = to_string(spec.kind) + "_" + to_string(spec.method);
    auto os = open_out(out / "table1" / (tag + "_seed" + std::to_string(seeds[si]) + ".csv"));
    write_metrics_csv(os, res.metrics);
    log_line(log, "table1 " + tag + " seed " + std::to_string(seeds[si]) + " done in " +
                      format_number(seconds_since(t0)) + " s");
  });

  std::vector<SummaryRow> rows;
  for (std::size_t ci = 0; ci < specs.size(); ++ci) {
    Table1Cell& c = cells[ci];
    c.total_steps = specs[ci].steps;
    c.summary = summarize_cell(to_string(specs[ci].kind), to_string(specs[ci].method), c.per_seed, c.total_steps);
    c.plateau_change = plateau_relative_change(c.per_seed, c.total_steps);
    rows.push_back(c.summary);
  }
  auto os = open_out(out / "summary.csv");
  write_summary_csv(os, rows);
  auto pl = open_out(out / "plateau.csv");
  pl << "model,method,total_steps,max_relative_change_last_10pct\n";
  for (const auto& c : cells) {
    pl << c.summary.model << ',' << c.summary.method << ',' << c.total_steps << ','
       << format_number(c.plateau_change) << '\n';
  }
  return cells;
}

fs::path checkpoint_path(const fs::path& dir, const std::string& model, const std::string& method, std::uint64_t seed,
                         std::size_t step) {
  return dir / (model + "_" + method + "_seed" + std::to_string(seed) + "_step" + std::to_string(step) + ".txt");
}

void train_slice_checkpoints(const RunPlan& plan, std::ostream& log) {
  if (plan.slice_steps.empty()) throw UsageError("slice-steps", "must not be empty");
  const std::uint64_t offset = seed_offset_from_env();
  const auto seeds = plan_seeds(plan, offset);
  const fs::path dir = fs::path(plan.out_dir) / "checkpoints";
  const GridSolution oracle = toy_oracle(plan);
  const Toy1DEnv env(plan.cfg.gamma);
  const auto model = make_model(plan, plan.model);
  const std::size_t last = *std::max_element(plan.slice_steps.begin(), plan.slice_steps.end());
  RunOptions opts;
  opts.skip_metrics = true;
  for (std::size_t s = 0; s <= last; s += plan.checkpoint_every) opts.snapshot_steps.push_back(s);
  for (std::size_t s : plan.slice_steps) {
    if (std::find(opts.snapshot_steps.begin(), opts.snapshot_steps.end(), s) == opts.snapshot_steps.end()) {
      opts.snapshot_steps.push_back(s);
    }
  }
  const Method methods[] = {Method::Baseline, Method::Sobolev};
  run_parallel(2 * seeds.size(), plan.jobs, [&](std::size_t task) {
    const Method m = methods[task % 2];
    TrainerConfig cfg = with_method(plan.cfg, m);
    cfg.seed = seeds[task / 2];
    cfg.total_steps = last;
    const RunResult res = run_experiment(cfg, *model, env, oracle, opts);
    for (const auto& snap : res.snapshots) {
      auto os = open_out(checkpoint_path(dir, to_string(plan.model), to_string(m), cfg.seed, snap.step));
      save_params(os, snap.critic);
    }
    log_line(log, "checkpoints " + to_string(m) + " seed " + std::to_string(cfg.seed) + " written");
  });
}

std::vector<SliceRow> dump_q_slices(const fs::path& checkpoint_dir, const CriticModel& model,
                                    const std::string& model_name, std::uint64_t seed, const GridSolution& oracle,
                                    std::span<const double> states, std::span<const std::size_t> steps) {
  auto load = [&](const std::string& method, std::size_t step) {
    const fs::path p = checkpoint_path(checkpoint_dir, model_name, method, seed, step);
    std::ifstream is(p);
    if (!is) throw std::runtime_error("missing checkpoint for step " + std::to_string(step) + ": " + p.string());
    return load_params(is);
  };
  const auto a_grid = uniform_grid(kSliceActions);
  std::vector<SliceRow> rows;
  std::vector<double> x(2 * kSliceActions);
  std::vector<double> q_sob(kSliceActions);
  std::vector<double> q_base(kSliceActions);
  for (std::size_t step : steps) {
    const FlatParams sob = load("sobolev", step);
    const FlatParams base = load("baseline", step);
    for (double s : states) {
      for (std::size_t j = 0; j < kSliceActions; ++j) {
        x[2 * j] = s;
        x[2 * j + 1] = a_grid[j];
      }
      model.values(sob.values(), x, q_sob);
      model.values(base.values(), x, q_base);
      for (std::size_t j = 0; j < kSliceActions; ++j) {
        rows.push_back({step, s, a_grid[j], q_sob[j], q_base[j], q_star_eval(oracle, s, a_grid[j])});
      }
    }
  }
  return rows;
}

void run_slices(const RunPlan& plan, std::ostream& log) {
  const std::uint64_t offset = seed_offset_from_env();
  const GridSolution oracle = toy_oracle(plan);
  std::ostringstream desc;
  desc << "value_iteration grid=" << plan.oracle_grid << " residual=" << oracle.residual;
  write_manifest(plan, offset, desc.str());
  train_slice_checkpoints(plan, log);
  const fs::path out(plan.out_dir);
  const auto model = make_model(plan, plan.model);
  std::vector<SliceRow> mean;
  const auto seeds = plan_seeds(plan, offset);
  for (std::uint64_t seed : seeds) {
    const auto rows = dump_q_slices(out / "checkpoints", *model, to_string(plan.model), seed, oracle,
                                    plan.slice_states, plan.slice_steps);
    auto os = open_out(out / ("slices_seed" + std::to_string(seed) + ".csv"));
    write_slice_csv(os, rows);
    if (mean.empty()) mean.assign(rows.size(), SliceRow{});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      mean[i].step = rows[i].step;
      mean[i].s = rows[i].s;
      mean[i].a = rows[i].a;
      mean[i].q_star = rows[i].q_star;
      mean[i].q_sobolev += rows[i].q_sobolev / static_cast<double>(seeds.size());
      mean[i].q_baseline += rows[i].q_baseline / static_cast<double>(seeds.size());
    }
  }
  auto os = open_out(out / "slices.csv");
  write_slice_csv(os, mean);
}

void execute(const RunPlan& plan, std::ostream& log) {
  if (plan.command == "run") {
    run_command(plan, log);
  } else if (plan.command == "table1") {
    run_table1(plan, log);
  } else if (plan.command == "slices") {
    run_slices(plan, log);
  } else {
    throw UsageError("command", "unknown command " + plan.command);
  }
}

}  // namespace sobolev_td::cli
