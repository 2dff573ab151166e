// Command-line driver: optimize | robustness | sweep | pmp-check.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 I/O error.

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "qanneal/qanneal.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool resume = false;
  std::string protocol_path;  // pmp-check positional
};

qanneal::CommandContext make_context(const CliArgs& args) {
  qanneal::CommandContext ctx;
  ctx.config = qanneal::load_run_config(args.config_path);
  if (args.seed_given) ctx.config.seed = args.seed;
  ctx.out_dir = args.out_dir.empty() ? ctx.config.out_dir : args.out_dir;
  if (args.jobs < 1) throw qanneal::ConfigError("--jobs must be >= 1");
  ctx.jobs = args.jobs;
  ctx.resume = args.resume;
  ctx.protocol_override = args.protocol_path;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annealing-protocol synthesis, robustness evaluation and "
               "optimality checking for Ising models"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CliArgs args;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "JSON config file")
        ->required();
    cmd->add_option("--out", args.out_dir,
                    "output directory (default: out_dir from config)");
    cmd->add_option("--jobs", args.jobs, "worker threads for ensembles");
    cmd->add_option("--seed", args.seed, "override the config master seed")
        ->each([&](const std::string&) { args.seed_given = true; });
  };

  CLI::App* optimize = app.add_subcommand(
      "optimize", "synthesize a protocol and write protocol.csv/report.json");
  add_common(optimize);
  CLI::App* robustness = app.add_subcommand(
      "robustness",
      "compare nominal/qaoa/spectral/frobenius protocols under noise");
  add_common(robustness);
  CLI::App* sweep = app.add_subcommand(
      "sweep", "aggregate robustness curves over random Ising models");
  add_common(sweep);
  sweep->add_flag("--resume", args.resume,
                  "continue a sweep from an existing models.jsonl");
  CLI::App* pmp_check = app.add_subcommand(
      "pmp-check", "verify optimality conditions for a stored protocol");
  add_common(pmp_check);
  pmp_check->add_option("protocol", args.protocol_path,
                        "protocol.csv to check (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? 0 : 2;
  }

  try {
    if (optimize->parsed()) return qanneal::cmd_optimize(make_context(args));
    if (robustness->parsed()) return qanneal::cmd_robustness(make_context(args));
    if (sweep->parsed()) return qanneal::cmd_sweep(make_context(args));
    if (pmp_check->parsed()) return qanneal::cmd_pmp_check(make_context(args));
  } catch (const qanneal::ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return 2;
  } catch (const qanneal::IoError& error) {
    std::cerr << "io error: " << error.what() << "\n";
    return 4;
  } catch (const qanneal::NumericalError& error) {
    std::cerr << "numerical error: " << error.what() << "\n";
    return 3;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 3;
  }
  return 0;
}
