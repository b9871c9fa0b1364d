#pragma once

#include <map>
#include <string>
#include <vector>

#include "bubbler/config.hpp"
#include "bubbler/json_io.hpp"

namespace bubbler {

enum class Stage { construct, maximize, energy, verify, solve, all };

Stage stage_from_string(const std::string& s);
std::string stage_to_string(Stage s);

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct RunReport {
  Json config;
  std::string version;
  std::string git_rev;
  Json stages = Json::object();  ///< stage name -> results or {"status": "failed", ...}
  std::vector<Check> checks;
  /// path under tables/ -> table
  std::map<std::string, CsvTable> tables;
  /// JSON sidecars written next to tables (same stem)
  std::map<std::string, Json> sidecars;
  /// wall-clock seconds per stage, kept out of report.json
  std::map<std::string, double> timings;
  int exit_code = 0;

  Json to_json() const;
  static RunReport from_json(const Json& j);
  bool all_passed() const;
};

/// Runs the requested stage and the stages it depends on. Stage failures are recorded, not thrown.
RunReport run_pipeline(const RunConfig& cfg, Stage stage, bool verbose = false);

/// Writes report.json (atomically), timings.json and tables/*.csv under dir.
void emit(const RunReport& report, const std::string& dir);

std::string version_string();
std::string git_revision();

}  // namespace bubbler
