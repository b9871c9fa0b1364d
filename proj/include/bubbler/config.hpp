#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bubbler/domain.hpp"
#include "bubbler/json_io.hpp"

namespace bubbler {

struct RunConfig {
  double alpha = 0.0;
  int m = 0;
  std::vector<double> t_ladder;
  HSpec h_spec;
  int grid_n = 768;
  std::size_t quadrature_budget = 200000;
  int quadrature_level = 1;
  std::map<std::string, double> tolerances;
  std::uint64_t seed = 0;
  std::string output_dir = "bubbler_out";
  double d = 0.3;
  double R0 = 10.0;
  std::optional<double> alpha_hat;
  int random_starts = 6;
  /// keys that were absent and took their default value
  std::vector<std::string> defaulted;

  double tol(const std::string& key) const { return tolerances.at(key); }
  Json to_json() const;
};

/// Default tolerance table; parse_config only accepts these keys.
std::map<std::string, double> default_tolerances();

RunConfig parse_config_string(const std::string& text, const std::string& origin = "<string>");
RunConfig parse_config(const std::string& path);

}  // namespace bubbler
