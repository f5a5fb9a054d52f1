// einop command-line tool: identity suites, spectral reports, linearization
// checks, and prescribed-curvature solves driven by a JSON config.
// See README.md for the config schema and output formats.

#include <CLI11.hpp>
#include <iostream>

#include "einop/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"einop: curvature operators and prescribed-curvature solves on periodic grids"};

  std::string config_path;
  std::string output_dir;
  bool exploratory = false;
  app.add_option("--config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--output", output_dir, "output directory (overrides the config)");
  app.add_flag("--exploratory", exploratory,
               "run solves even when the hypothesis report fails");

  CLI11_PARSE(app, argc, argv);

  try {
    einop::RunConfig cfg = einop::RunConfig::from_json_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (exploratory) cfg.exploratory = true;
    return einop::run(cfg);
  } catch (const einop::NotLicensedError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
