#include <filesystem>
#include <fstream>
#include <sstream>

#include "bubbler/config.hpp"
#include "bubbler/errors.hpp"
#include "bubbler/pipeline.hpp"
#include "doctest.h"

using namespace bubbler;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bubbler_unit_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults") {
  const RunConfig c = parse_config_string(R"({"alpha": 0.5, "m": 1, "t_ladder": [20, 40]})");
  CHECK(c.grid_n == 768);
  CHECK(c.quadrature_budget == 200000);
  CHECK(c.seed == 0);
  CHECK(c.t_ladder.size() == 2);
  CHECK(c.tol("corrector_residual") == 1e-8);
  CHECK(c.tol("orthogonality") == 1e-10);
  CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "grid_n") != c.defaulted.end());
  CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "alpha") == c.defaulted.end());
}

TEST_CASE("config rejections") {
  auto bad = [](const std::string& text, const std::string& needle) {
    try {
      parse_config_string(text);
      FAIL("accepted: " << text);
    } catch (const ConfigurationError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  bad(R"({"alpha": 2.0, "m": 1, "t_ladder": [20]})", "alpha");
  bad(R"({"alpha": -1.0, "m": 1, "t_ladder": [20]})", "alpha");
  bad(R"({"alpha": 0.5, "alpha": 0.7, "m": 1, "t_ladder": [20]})", "duplicate");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": [20], "colour": 3})", "unknown");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": [20], "tolerances": {"bogus": 1}})", "unknown");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": []})", "t_ladder");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": [-3]})", "t_ladder");
  bad(R"({"alpha": 0.5, "m": 1.5, "t_ladder": [20]})", "m");
  bad(R"({"alpha": 0.5, "t_ladder": [20]})", "required");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": [20],)", "parse");
  bad(R"({"alpha": 0.5, "m": 1, "t_ladder": [20], "seed": -4})", "seed");
}

TEST_CASE("stage names") {
  for (Stage s : {Stage::construct, Stage::maximize, Stage::energy, Stage::verify, Stage::solve, Stage::all})
    CHECK(stage_from_string(stage_to_string(s)) == s);
  CHECK_THROWS(stage_from_string("bake"));
}

TEST_CASE("report round trip") {
  RunReport r;
  r.config = Json{{"alpha", 0.5}};
  r.version = "x";
  r.git_rev = "abc";
  r.stages["construct"] = {{"status", "ok"}};
  r.checks.push_back({"boundary", true, 1e-12, 1e-9, "t=20"});
  r.checks.push_back({"mass", false, 0.2, 0.05, ""});
  r.exit_code = 1;
  const RunReport q = RunReport::from_json(r.to_json());
  CHECK(q.to_json() == r.to_json());
  CHECK_FALSE(q.all_passed());
  CHECK(q.checks[0].note == "t=20");
}

TEST_CASE("pipeline: one bubble skips the maximizer") {
  const RunConfig c = parse_config_string(R"({"alpha": 0.0, "m": 0, "t_ladder": [20], "quadrature_budget": 20000})");
  const RunReport r = run_pipeline(c, Stage::maximize);
  CHECK(r.stages["construct"]["status"] == "ok");
  CHECK(r.stages["maximize"]["results"].contains("skipped"));
  CHECK(r.tables.count("fields_t20.csv") == 1);
  CHECK(r.tables.count("maximizer_trace.csv") == 0);
  CHECK_FALSE(r.stages.contains("energy"));
}

TEST_CASE("pipeline: energy ladder table") {
  const RunConfig c =
      parse_config_string(R"({"alpha": 0.5, "m": 1, "t_ladder": [30, 60], "quadrature_budget": 20000, "random_starts": 2})");
  const RunReport r = run_pipeline(c, Stage::energy);
  REQUIRE(r.tables.count("ladder.csv") == 1);
  const CsvTable& t = r.tables.at("ladder.csv");
  CHECK(t.header == std::vector<std::string>{"t", "J_quadrature", "surrogate", "remainder", "mass", "mass_rel_err"});
  CHECK(t.rows.size() == 2);
  CHECK(t.rows[0][3] == doctest::Approx(t.rows[0][1] - t.rows[0][2]));
  CHECK(r.tables.count("maximizer_trace.csv") == 1);
  CHECK_FALSE(r.stages.contains("solve"));
  const CsvTable& f = r.tables.at("fields_t30.csv");
  std::size_t inside = 0;
  for (int j = 0; j < 81; ++j)
    for (int i = 0; i < 81; ++i) inside += Point(-1.0 + (2 * i + 1) / 81.0, -1.0 + (2 * j + 1) / 81.0).squaredNorm() < 1.0;
  CHECK(f.rows.size() == inside);
  CHECK(r.sidecars.count("fields_t30.json") == 1);
}

TEST_CASE("pipeline: setup failure is reported, not thrown") {
  RunConfig c = parse_config_string(R"({"alpha": 0.5, "m": 1, "t_ladder": [30]})");
  c.d = 5.0;
  const RunReport r = run_pipeline(c, Stage::all);
  CHECK(r.exit_code == 2);
  CHECK(r.stages["setup"]["status"] == "failed");
  CHECK_FALSE(r.stages.contains("construct"));
}

TEST_CASE("pipeline: unresolved grid skips the solve") {
  const RunConfig c = parse_config_string(
      R"({"alpha": 0.5, "m": 1, "t_ladder": [30], "grid_n": 64, "quadrature_budget": 20000, "random_starts": 1})");
  const RunReport r = run_pipeline(c, Stage::solve);
  REQUIRE(r.stages["solve"]["status"] == "ok");
  CHECK(r.stages["solve"]["results"][0].contains("skipped"));
  CHECK_FALSE(r.stages.contains("energy"));
}

TEST_CASE("emitted output is deterministic") {
  const RunConfig c =
      parse_config_string(R"({"alpha": 0.5, "m": 2, "t_ladder": [40], "quadrature_budget": 20000, "random_starts": 2})");
  const auto a = scratch("det_a"), b = scratch("det_b");
  emit(run_pipeline(c, Stage::energy), a.string());
  emit(run_pipeline(c, Stage::energy), b.string());
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "tables" / "ladder.csv") == slurp(b / "tables" / "ladder.csv"));
  CHECK(std::filesystem::exists(a / "timings.json"));
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) CHECK(e.path().extension() != ".tmp");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}
