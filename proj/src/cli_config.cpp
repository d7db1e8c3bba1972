#include "sobolev_td/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

namespace sobolev_td::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key, "expected a number, got '" + v + "'");
  return x;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v, T (*one)(const std::string&, const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(one(key, trim(item)));
  if (out.empty()) throw UsageError(key, "expected a comma-separated list");
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> opts) {
  std::string allowed;
  for (const auto& [name, val] : opts) {
    if (v == name) return val;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw UsageError(key, "expected one of " + allowed + ", got '" + v + "'");
}

EnvKind parse_env(const std::string& key, const std::string& v) {
  return parse_enum<EnvKind>(key, v, {{"toy1d", EnvKind::Toy1D}, {"lqr", EnvKind::Lqr}});
}

struct Key {
  std::string name;
  std::function<void(RunPlan&, const std::string&)> set;
  std::function<std::string(const RunPlan&)> get;
};

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> t;
    auto real = [&t](const char* name, double TrainerConfig::*field) {
      t.push_back({name, [name, field](RunPlan& p, const std::string& v) { p.cfg.*field = parse_double(name, v); },
                   [field](const RunPlan& p) { return fmt(p.cfg.*field); }});
    };
    auto count = [&t](const char* name, std::size_t TrainerConfig::*field) {
      t.push_back({name, [name, field](RunPlan& p, const std::string& v) { p.cfg.*field = parse_count(name, v); },
                   [field](const RunPlan& p) { return std::to_string(p.cfg.*field); }});
    };
    auto plan_count = [&t](const char* name, std::size_t RunPlan::*field) {
      t.push_back({name, [name, field](RunPlan& p, const std::string& v) { p.*field = parse_count(name, v); },
                   [field](const RunPlan& p) { return std::to_string(p.*field); }});
    };
    t.push_back({"command",
                 [](RunPlan& p, const std::string& v) {
                   p.command = parse_enum<std::string>("command", v,
                                                       {{"run", "run"}, {"table1", "table1"}, {"slices", "slices"}});
                 },
                 [](const RunPlan& p) { return p.command; }});
    t.push_back({"env", [](RunPlan& p, const std::string& v) { p.env = parse_env("env", v); },
                 [](const RunPlan& p) { return to_string(p.env); }});
    t.push_back({"algo",
                 [](RunPlan& p, const std::string& v) {
                   p.cfg.algo = parse_enum<Algo>("algo", v,
                                                 {{"q_learning", Algo::QLearning}, {"actor_critic", Algo::ActorCritic}});
                 },
                 [](const RunPlan& p) { return to_string(p.cfg.algo); }});
    t.push_back({"method",
                 [](RunPlan& p, const std::string& v) {
                   p.cfg.method =
                       parse_enum<Method>("method", v, {{"baseline", Method::Baseline}, {"sobolev", Method::Sobolev}});
                 },
                 [](const RunPlan& p) { return to_string(p.cfg.method); }});
    t.push_back({"model",
                 [](RunPlan& p, const std::string& v) {
                   p.model = parse_enum<CriticKind>("model", v,
                                                    {{"quadratic", CriticKind::Quadratic}, {"mlp", CriticKind::Mlp}});
                 },
                 [](const RunPlan& p) { return to_string(p.model); }});
    t.push_back({"loss-path",
                 [](RunPlan& p, const std::string& v) {
                   p.cfg.loss_path = parse_enum<LossPath>("loss-path", v,
                                                          {{"sobolev", LossPath::Sobolev}, {"value_only", LossPath::ValueOnly}});
                 },
                 [](const RunPlan& p) { return std::string(p.cfg.loss_path == LossPath::Sobolev ? "sobolev" : "value_only"); }});
    plan_count("hidden-layers", &RunPlan::hidden_layers);
    plan_count("seeds", &RunPlan::seeds);
    count("steps", &TrainerConfig::total_steps);
    real("lr", &TrainerConfig::lr);
    real("actor-lr", &TrainerConfig::actor_lr);
    count("batch", &TrainerConfig::batch_size);
    real("gamma", &TrainerConfig::gamma);
    real("lambda-s", &TrainerConfig::lambda_s);
    real("lambda-a", &TrainerConfig::lambda_a);
    real("polyak-rho", &TrainerConfig::polyak_rho);
    count("warmup-steps", &TrainerConfig::warmup_steps);
    count("grid-points", &TrainerConfig::grid_points);
    count("eval-every", &TrainerConfig::eval_every);
    t.push_back({"seed",
                 [](RunPlan& p, const std::string& v) { p.cfg.seed = parse_count("seed", v); },
                 [](const RunPlan& p) { return std::to_string(p.cfg.seed); }});
    count("replay-capacity", &TrainerConfig::replay_capacity);
    count("episode-length", &TrainerConfig::episode_length);
    real("explore-sigma", &TrainerConfig::explore_sigma);
    real("init-state-sigma", &TrainerConfig::init_state_sigma);
    t.push_back({"out", [](RunPlan& p, const std::string& v) { p.out_dir = v; },
                 [](const RunPlan& p) { return p.out_dir; }});
    plan_count("jobs", &RunPlan::jobs);
    plan_count("oracle-grid", &RunPlan::oracle_grid);
    plan_count("table1-steps-quadratic", &RunPlan::table1_steps_quadratic);
    plan_count("table1-steps-mlp", &RunPlan::table1_steps_mlp);
    plan_count("checkpoint-every", &RunPlan::checkpoint_every);
    t.push_back({"slice-steps",
                 [](RunPlan& p, const std::string& v) { p.slice_steps = parse_list<std::size_t>("slice-steps", v, parse_count); },
                 [](const RunPlan& p) { return join(p.slice_steps); }});
    t.push_back({"slice-states",
                 [](RunPlan& p, const std::string& v) { p.slice_states = parse_list<double>("slice-states", v, parse_double); },
                 [](const RunPlan& p) { return join(p.slice_states); }});
    return t;
  }();
  return table;
}

const Key& find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return k;
  }
  throw UsageError(name, "unknown key");
}

void check_plan(const RunPlan& p) {
  if (p.seeds == 0) throw UsageError("seeds", "must be at least 1");
  if (p.jobs == 0) throw UsageError("jobs", "must be at least 1");
  if (p.hidden_layers == 0) throw UsageError("hidden-layers", "must be at least 1");
  if (p.oracle_grid < 3) throw UsageError("oracle-grid", "must be at least 3");
  if (p.checkpoint_every == 0) throw UsageError("checkpoint-every", "must be positive");
  if (p.out_dir.empty()) throw UsageError("out", "must not be empty");
  for (double s : p.slice_states) {
    if (!(s >= -1.0 && s <= 1.0)) throw UsageError("slice-states", "states must lie in [-1, 1]");
  }
  if (p.env == EnvKind::Toy1D && p.cfg.algo != Algo::QLearning) throw UsageError("algo", "toy1d runs use q_learning");
  if (p.env == EnvKind::Lqr && p.cfg.algo != Algo::ActorCritic) throw UsageError("algo", "lqr runs use actor_critic");
  if (p.env == EnvKind::Lqr && p.model != CriticKind::Quadratic) throw UsageError("model", "lqr runs use quadratic");
  if (p.command != "run" && p.env != EnvKind::Toy1D) throw UsageError("env", p.command + " needs toy1d");
  try {
    p.cfg.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    throw UsageError(what.substr(0, colon), colon == std::string::npos ? what : trim(what.substr(colon + 1)));
  }
}

}  // namespace

std::string to_string(EnvKind env) { return env == EnvKind::Toy1D ? "toy1d" : "lqr"; }
std::string to_string(CriticKind model) { return model == CriticKind::Quadratic ? "quadratic" : "mlp"; }
std::string to_string(Method m) { return m == Method::Baseline ? "baseline" : "sobolev"; }
std::string to_string(Algo a) { return a == Algo::QLearning ? "q_learning" : "actor_critic"; }

RunPlan default_plan(EnvKind env) {
  RunPlan p;
  p.env = env;
  if (env == EnvKind::Lqr) {
    p.cfg.algo = Algo::ActorCritic;
    p.cfg.lr = 1e-3;
    p.cfg.actor_lr = 1e-3;
    p.cfg.batch_size = 64;
    p.cfg.total_steps = 30000;
  }
  return p;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return keys;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw UsageError("config", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    find_key(key);
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

RunPlan resolve_plan(const std::map<std::string, std::string>& file_values,
                     const std::map<std::string, std::string>& flag_values) {
  auto lookup = [&](const std::string& key) -> const std::string* {
    if (auto it = flag_values.find(key); it != flag_values.end()) return &it->second;
    if (auto it = file_values.find(key); it != file_values.end()) return &it->second;
    return nullptr;
  };
  const std::string* env = lookup("env");
  RunPlan plan = default_plan(env ? parse_env("env", *env) : EnvKind::Toy1D);
  for (const auto* layer : {&file_values, &flag_values}) {
    for (const auto& [k, v] : *layer) find_key(k).set(plan, v);
  }
  if (!lookup("actor-lr")) plan.cfg.actor_lr = plan.cfg.lr;
  if (plan.cfg.method == Method::Baseline) {
    for (const char* k : {"lambda-s", "lambda-a"}) {
      if (lookup(k) && parse_double(k, *lookup(k)) != 0.0) throw UsageError(k, "baseline requires 0");
    }
    plan.cfg.apply_method();
  }
  check_plan(plan);
  return plan;
}

RunPlan parse_config_text(std::string_view text) { return resolve_plan(parse_key_values(text), {}); }

RunPlan parse_config(int argc, const char* const* argv) {
  CLI::App app{"Sobolev TD experiments"};
  std::string command = "run";
  app.add_option("command", command, "run | table1 | slices");
  std::string config_file;
  app.add_option("--config", config_file, "key = value file; flags take precedence");
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> opts;
  std::map<std::string, std::string> raw;
  for (const auto& k : key_table()) {
    if (k.name == "command") continue;
    opts[k.name] = app.add_option("--" + k.name, raw[k.name]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw;
  } catch (const CLI::ParseError& e) {
    throw UsageError("argv", e.what());
  }
  for (const auto& [name, opt] : opts) {
    if (opt->count() > 0) flags[name] = raw[name];
  }
  if (app.get_option("command")->count() > 0) flags["command"] = command;

  std::map<std::string, std::string> file_values;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw UsageError("config", "cannot open " + config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    file_values = parse_key_values(ss.str());
  }
  return resolve_plan(file_values, flags);
}

std::string emit_config(const RunPlan& plan) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(plan) + "\n";
  return out;
}

}  // namespace sobolev_td::cli
