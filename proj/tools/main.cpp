#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "randsemi.hpp"

// Exit codes: 0 all invariants hold, 1 an invariant failed, 2 config error,
// 3 numerical non-convergence (partial results are flushed with an aborted
// marker in the CSV).

namespace {

struct cli_options {
  std::string config_path;
  std::string out_dir = ".";
  int workers = 1;
  bool seed_given = false;
  uint64_t seed = 0;
};

void add_run_options(CLI::App* sub, cli_options& opt) {
  sub->add_option("--config", opt.config_path, "experiment config file")->required();
  sub->add_option("--out", opt.out_dir, "output directory (default: current)");
  sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", opt.seed, "override the config seed")
      ->each([&opt](const std::string&) { opt.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"law-of-large-numbers experiments for random semigroup compositions"};
  app.require_subcommand(1);

  cli_options opt;
  for (const auto& name : randsemi::subcommand_names())
    add_run_options(app.add_subcommand(name), opt);

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  try {
    randsemi::experiment_config cfg = randsemi::load_config(opt.config_path);
    if (opt.seed_given) cfg.seed = opt.seed;
    randsemi::run_result res =
        randsemi::run_subcommand(sub->get_name(), std::move(cfg), opt.out_dir, opt.workers);
    for (const auto& inv : res.invariants)
      std::cout << (inv.pass ? "[ OK ] " : "[FAIL] ") << inv.name << ": " << inv.detail << "\n";
    for (const auto& path : res.artifacts) std::cout << "wrote " << path << "\n";
    return res.exit_code;
  } catch (const randsemi::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const randsemi::convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
