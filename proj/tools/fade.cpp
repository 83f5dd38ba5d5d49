#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "fade/cli.hpp"
#include "fade/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation toolkit for distributed parameter estimation over "
               "randomly switching networks"};
  app.set_version_flag("--version", std::string(fade::kVersion));
  app.require_subcommand(1);

  std::string validate_config;
  auto* validate = app.add_subcommand(
      "validate", "Check a configuration against the estimator assumptions");
  validate->add_option("config", validate_config, "configuration file")->required();

  fade::RunOptions opts;
  std::optional<int> runs, horizon;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run the configured Monte Carlo experiment");
  run->add_option("config", opts.config_path, "configuration file")->required();
  run->add_option("--out", opts.out_dir,
                  "output directory (FADE_OUT_DIR overrides this)");
  run->add_option("--runs", runs, "override the number of Monte Carlo runs");
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--horizon", horizon, "override the time horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (validate->parsed()) return fade::cmd_validate(validate_config, std::cout, std::cerr);
  opts.runs = runs;
  opts.horizon = horizon;
  opts.seed = seed;
  return fade::cmd_run(opts, std::cout, std::cerr);
}
