#include "polaron/parallel.hpp"
#include "polaron/scenarios.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace polaron;

int main(int argc, char** argv) {
  CLI::App app{"Pekar, multi-polaron and crystal polaron calculations"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config, out;
  int threads = 0;
  auto* run = app.add_subcommand("run", "Run the scenario of a config file");
  run->add_option("--config", config, "JSON config")->required();
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_option("--threads", threads, "Worker threads (default: POLARON_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("--config", config, "JSON config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig c = load_config(config);
    if (validate->parsed()) {
      std::cout << "valid " << c.scenario << " config, hash " << c.hash << "\n";
      return kExitOk;
    }
    if (threads > 0) set_thread_count(threads);
    if (!out.empty()) {
      c.output = out;
      c.doc["output"] = out;
    }
    const ResultRecord r = run_scenario(c);
    const std::string path = write_record(r, c.output);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << c.scenario << ": " << r.status << " in " << r.wall_time << " s, record " << path << "\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
