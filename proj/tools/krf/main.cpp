// SPDX-License-Identifier: Apache-2.0
// krf: command-line front end. Exit status: 0 pass, 1 check failure,
// 2 usage, configuration or missing-artifact error, 3 runtime error.
#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "krf/config.hpp"
#include "krf/error.hpp"
#include "krf/parallel.hpp"
#include "pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalized Kahler-Ricci flow lab on toric-periodic models"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "Experiment config (INI)")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output base directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized checks (overrides verify.seed)");
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  app.add_flag("--verbose", verbose, "Progress messages on stderr");

  using Command = std::function<int(const krf::cli::Context&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"run-flow", {"Run the flow and write trajectory, snapshots and CSV", krf::cli::cmd_run_flow}},
      {"solve-static", {"Solve the static equation on the base", krf::cli::cmd_solve_static}},
      {"semiflat", {"Solve the fiberwise semi-flat problems", krf::cli::cmd_semiflat}},
      {"barriers", {"Build barrier parameters and fields", krf::cli::cmd_barriers}},
      {"verify", {"Run the configured checks on stored artifacts", krf::cli::cmd_verify}},
      {"report", {"Collate artifacts into plot data", krf::cli::cmd_report}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    krf::set_thread_count(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads);
    const krf::EnvLookup process = krf::process_environment();
    const krf::EnvLookup env = [&](const std::string& key) -> std::optional<std::string> {
      if (key == "KRF_VERIFY_SEED" && seed_opt->count() > 0) return std::to_string(seed);
      return process(key);
    };
    krf::RunConfig config = krf::parse_config(config_path, env);
    if (out_opt->count() > 0) config.output.dir = out_dir;
    const krf::cli::Context ctx = krf::cli::make_context(config, verbose, std::cout);
    std::cout << "experiment " << ctx.dir << '\n';
    return commands.at(app.get_subcommands().front()->get_name()).second(ctx);
  } catch (const krf::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const krf::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
