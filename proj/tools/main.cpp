// autonomy: run one experiment and write results.csv, report.json and plot files.
//
//   autonomy <experiment> [--config file.json] [--seed N] [--out DIR] [--threads N]
//
// Exit status: 0 when every check passes, 1 when a check fails,
// 2 on usage errors, 3 on numerical failures.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "autonomy/cli.hpp"

int main(int argc, char** argv) {
  using namespace autonomy::cli;

  CLI::App app{"Continual photodetection and heterodyne instruments: simulation and verification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<unsigned> threads;

  for (const auto& kind : experiment_kinds()) {
    CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "64-bit seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (fallback: INSTRUMENT_AUTONOMY_THREADS)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const std::string experiment = app.get_subcommands().front()->get_name();
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    ExperimentConfig cfg = parse_config(j, experiment);
    if (seed) cfg.seed = *seed;
    cfg.out = out_dir;
    cfg.threads = resolve_threads(threads);

    const VerificationReport report = run(cfg);
    for (const auto& c : report.checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " measured=" << format_number(c.measured)
                << " threshold=" << format_number(c.threshold) << '\n';
    }
    std::cout << (report.pass() ? "overall PASS" : "overall FAIL") << " -> " << cfg.out.string() << '\n';
    return report.pass() ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const autonomy::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
