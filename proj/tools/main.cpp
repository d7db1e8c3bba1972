#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "sobolev_td/cli/config.hpp"
#include "sobolev_td/cli/runner.hpp"

int main(int argc, char** argv) {
  using namespace sobolev_td::cli;
  try {
    const RunPlan plan = parse_config(argc, argv);
    execute(plan, std::cerr);
    return 0;
  } catch (const CLI::CallForHelp&) {
    std::cout << "usage: sobolev_td [run|table1|slices] [--KEY VALUE ...] [--config FILE]\nkeys:";
    for (const auto& k : config_keys()) {
      if (k != "command") std::cout << " --" << k;
    }
    std::cout << '\n';
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error kind=usage key=" << e.key() << " message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error kind=run message=\"" << e.what() << "\"\n";
    return 1;
  }
}
