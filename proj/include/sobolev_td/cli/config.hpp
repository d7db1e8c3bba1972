#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sobolev_td/critics/critic.hpp"
#include "sobolev_td/training/trainer.hpp"

namespace sobolev_td::cli {

enum class EnvKind { Toy1D, Lqr };

struct RunPlan {
  std::string command = "run";  // run | table1 | slices
  TrainerConfig cfg;
  EnvKind env = EnvKind::Toy1D;
  CriticKind model = CriticKind::Quadratic;
  std::size_t hidden_layers = 3;
  std::size_t seeds = 1;
  std::string out_dir = "out";
  std::size_t jobs = 1;
  std::size_t oracle_grid = 1001;
  std::size_t table1_steps_quadratic = 60000;
  std::size_t table1_steps_mlp = 20000;
  std::size_t checkpoint_every = 100;
  std::vector<std::size_t> slice_steps{200, 400};
  std::vector<double> slice_states{0.0, 0.5};

  friend bool operator==(const RunPlan&, const RunPlan&) = default;
};

/// Bad flag, bad value or violated constraint; key() names the culprit.
class UsageError : public std::invalid_argument {
 public:
  UsageError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Defaults for an environment before any file or flag is applied.
RunPlan default_plan(EnvKind env);

/// Every recognised key, in emission order.
const std::vector<std::string>& config_keys();

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Resolves defaults < file < flags. Both maps use config keys.
RunPlan resolve_plan(const std::map<std::string, std::string>& file_values,
                     const std::map<std::string, std::string>& flag_values);

/// Full command line (argv[0] is the program name). Reads --config if given.
RunPlan parse_config(int argc, const char* const* argv);

/// Plan from config file text alone.
RunPlan parse_config_text(std::string_view text);

/// All keys as `key = value` lines; parse_config_text(emit_config(p)) == p.
std::string emit_config(const RunPlan& plan);

std::string to_string(EnvKind env);
std::string to_string(CriticKind model);
std::string to_string(Method m);
std::string to_string(Algo a);

}  // namespace sobolev_td::cli
