#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bubbler/config.hpp"
#include "bubbler/errors.hpp"
#include "bubbler/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-bubble constructor and verifier for the singular Liouville problem on the unit disk"};
  app.set_version_flag("--version", bubbler::version_string() + " (" + bubbler::git_revision() + ")");
  std::string stage, config_path, output_dir;
  bool verbose = false;
  app.add_option("stage", stage, "construct | maximize | energy | verify | solve | all")
      ->required()
      ->check(CLI::IsMember({"construct", "maximize", "energy", "verify", "solve", "all"}));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--output-dir", output_dir, "overrides output_dir from the config");
  app.add_flag("--verbose", verbose, "progress on stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    bubbler::RunConfig cfg = bubbler::parse_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const bubbler::RunReport report = bubbler::run_pipeline(cfg, bubbler::stage_from_string(stage), verbose);
    bubbler::emit(report, cfg.output_dir);
    for (const auto& c : report.checks)
      if (verbose || !c.passed)
        std::cerr << (c.passed ? "pass " : "FAIL ") << c.name << " value=" << c.value << " tol=" << c.tolerance << '\n';
    for (const auto& [name, st] : report.stages.items())
      if (st.contains("error")) std::cerr << "stage " << name << " failed: " << st["error"].get<std::string>() << '\n';
    return report.exit_code;
  } catch (const bubbler::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
