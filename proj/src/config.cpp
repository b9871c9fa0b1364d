#include "bubbler/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bubbler/errors.hpp"
#include "bubbler/params.hpp"

namespace bubbler {

// ---------------------------------------------------------------- json_io

Json to_json(const Point& x) { return Json::array({x.x(), x.y()}); }

Json to_json(const PointList& xs) {
  Json a = Json::array();
  for (const Point& x : xs) a.push_back(to_json(x));
  return a;
}

Json to_json(const ProblemSpec& s) {
  Json j;
  j["alpha"] = s.alpha;
  j["m"] = s.m;
  j["t"] = s.t;
  j["p"] = to_json(s.p);
  j["d"] = s.d;
  j["beta"] = s.beta;
  j["alpha_hat"] = s.alpha_hat;
  j["R0"] = s.R0;
  return j;
}

Json to_json(const BubbleConfig& c) {
  Json j;
  j["alpha"] = c.alpha;
  j["t"] = c.t;
  j["xi"] = to_json(c.xi);
  j["mu0"] = c.mu0;
  j["mu"] = c.mu;
  j["log_mu0"] = c.log_mu0;
  j["log_mu"] = c.log_mu;
  j["eps0"] = c.eps0;
  j["eps"] = c.eps;
  j["rho0"] = c.rho0;
  j["v0"] = c.v0;
  j["gamma"] = c.gamma;
  return j;
}

Point point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigurationError("a point must be a two-element array");
  return Point(j[0].get<double>(), j[1].get<double>());
}

PointList points_from_json(const Json& j) {
  PointList out;
  for (const auto& e : j) out.push_back(point_from_json(e));
  return out;
}

ProblemSpec spec_from_json(const Json& j) {
  ProblemSpec s = ProblemSpec::make(j.at("alpha").get<double>(), j.at("m").get<int>(), j.at("t").get<double>(),
                                    j.at("alpha_hat").get<double>(), j.at("d").get<double>(), j.at("R0").get<double>());
  return s;
}

BubbleConfig config_from_json(const Json& j) {
  BubbleConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.t = j.at("t").get<double>();
  c.xi = points_from_json(j.at("xi"));
  c.mu0 = j.at("mu0").get<double>();
  c.mu = j.at("mu").get<std::vector<double>>();
  c.log_mu0 = j.at("log_mu0").get<double>();
  c.log_mu = j.at("log_mu").get<std::vector<double>>();
  c.eps0 = j.at("eps0").get<double>();
  c.eps = j.at("eps").get<std::vector<double>>();
  c.rho0 = j.at("rho0").get<double>();
  c.v0 = j.at("v0").get<double>();
  c.gamma = j.at("gamma").get<std::vector<double>>();
  return c;
}

// ---------------------------------------------------------------- RunConfig

std::map<std::string, double> default_tolerances() {
  return {{"mass_relative", 0.05},   {"corrector_residual", 1e-8}, {"orthogonality", 1e-10},
          {"boundary", 1e-9},        {"fixed_point", 1e-10},       {"energy_quadrature", 1e-6}};
}

Json RunConfig::to_json() const {
  Json j;
  j["alpha"] = alpha;
  j["m"] = m;
  j["t_ladder"] = t_ladder;
  j["h_spec"] = {{"kind", HSpec::kind_to_string(h_spec.kind)}, {"coeffs", h_spec.coeffs}};
  j["grid_n"] = grid_n;
  j["quadrature_budget"] = quadrature_budget;
  j["quadrature_level"] = quadrature_level;
  Json tj = Json::object();
  for (const auto& [k, v] : tolerances) tj[k] = v;
  j["tolerances"] = tj;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["d"] = d;
  j["R0"] = R0;
  if (alpha_hat) j["alpha_hat"] = *alpha_hat;
  else j["alpha_hat"] = nullptr;
  j["random_starts"] = random_starts;
  j["defaulted"] = defaulted;
  return j;
}

namespace {

int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

[[noreturn]] void fail(const std::string& origin, const std::string& field, const std::string& msg) {
  throw ConfigurationError(origin + ": field '" + field + "': " + msg);
}

double number(const Json& j, const std::string& origin, const std::string& field) {
  if (!j.is_number()) fail(origin, field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(origin, field, "must be finite");
  return v;
}

long long integer(const Json& j, const std::string& origin, const std::string& field) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(origin, field, "expected an integer");
  return j.get<long long>();
}

}  // namespace

RunConfig parse_config_string(const std::string& text, const std::string& origin) {
  // duplicate keys are rejected while parsing; the callback sees every key in document order
  std::vector<std::set<std::string>> seen;
  std::string duplicate;
  Json doc;
  try {
    doc = Json::parse(text, [&](int /*depth*/, Json::parse_event_t ev, Json& parsed) {
      switch (ev) {
        case Json::parse_event_t::object_start: seen.emplace_back(); break;
        case Json::parse_event_t::object_end:
          if (!seen.empty()) seen.pop_back();
          break;
        case Json::parse_event_t::key: {
          const std::string k = parsed.get<std::string>();
          if (!seen.empty() && !seen.back().insert(k).second && duplicate.empty()) duplicate = k;
          break;
        }
        default: break;
      }
      return true;
    });
  } catch (const Json::parse_error& e) {
    std::ostringstream os;
    os << origin << ":" << line_of(text, e.byte) << ": JSON parse error: " << e.what();
    throw ConfigurationError(os.str());
  }
  if (!duplicate.empty()) fail(origin, duplicate, "duplicate key");
  if (!doc.is_object()) throw ConfigurationError(origin + ": top level must be a JSON object");

  static const std::set<std::string> known{"alpha", "m", "t_ladder", "h_spec", "grid_n", "quadrature_budget",
                                           "quadrature_level", "tolerances", "seed", "output_dir", "d", "R0",
                                           "alpha_hat", "random_starts"};
  for (const auto& [k, v] : doc.items())
    if (!known.count(k)) fail(origin, k, "unknown key");

  RunConfig c;
  for (const char* req : {"alpha", "m", "t_ladder"})
    if (!doc.contains(req)) fail(origin, req, "required");
  c.alpha = number(doc["alpha"], origin, "alpha");
  const long long m = integer(doc["m"], origin, "m");
  if (m < 0 || m > 16) fail(origin, "m", "must be an integer in [0, 16]");
  c.m = static_cast<int>(m);
  if (!doc["t_ladder"].is_array() || doc["t_ladder"].empty()) fail(origin, "t_ladder", "expected a non-empty array");
  for (std::size_t i = 0; i < doc["t_ladder"].size(); ++i) {
    const double t = number(doc["t_ladder"][i], origin, "t_ladder[" + std::to_string(i) + "]");
    if (!(t > 0.0)) fail(origin, "t_ladder[" + std::to_string(i) + "]", "must be positive");
    c.t_ladder.push_back(t);
  }

  auto opt_number = [&](const char* key, double& dst) {
    if (doc.contains(key)) dst = number(doc[key], origin, key);
    else c.defaulted.push_back(key);
  };
  auto opt_int = [&](const char* key, auto& dst, long long lo, long long hi) {
    if (doc.contains(key)) {
      const long long v = integer(doc[key], origin, key);
      if (v < lo || v > hi) fail(origin, key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(v);
    } else {
      c.defaulted.push_back(key);
    }
  };
  opt_int("grid_n", c.grid_n, 8, 8192);
  opt_int("quadrature_budget", c.quadrature_budget, 1000, 2000000000LL);
  opt_int("quadrature_level", c.quadrature_level, 0, 4);
  opt_int("random_starts", c.random_starts, 0, 64);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
      fail(origin, "seed", "expected a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  } else {
    c.defaulted.push_back("seed");
  }
  opt_number("d", c.d);
  opt_number("R0", c.R0);
  if (doc.contains("alpha_hat")) c.alpha_hat = number(doc["alpha_hat"], origin, "alpha_hat");
  else c.defaulted.push_back("alpha_hat");
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) fail(origin, "output_dir", "expected a string");
    c.output_dir = doc["output_dir"].get<std::string>();
  } else {
    c.defaulted.push_back("output_dir");
  }

  if (doc.contains("h_spec")) {
    const Json& h = doc["h_spec"];
    if (!h.is_object()) fail(origin, "h_spec", "expected an object");
    for (const auto& [k, v] : h.items())
      if (k != "kind" && k != "coeffs") fail(origin, "h_spec." + k, "unknown key");
    if (!h.contains("kind") || !h["kind"].is_string()) fail(origin, "h_spec.kind", "required string");
    c.h_spec.kind = HSpec::kind_from_string(h["kind"].get<std::string>());
    if (h.contains("coeffs")) {
      if (!h["coeffs"].is_array()) fail(origin, "h_spec.coeffs", "expected an array");
      for (std::size_t i = 0; i < h["coeffs"].size(); ++i)
        c.h_spec.coeffs.push_back(number(h["coeffs"][i], origin, "h_spec.coeffs[" + std::to_string(i) + "]"));
    }
    (void)PotentialData(c.h_spec, c.alpha);  // validates the family
  } else {
    c.defaulted.push_back("h_spec");
  }

  c.tolerances = default_tolerances();
  if (doc.contains("tolerances")) {
    const Json& t = doc["tolerances"];
    if (!t.is_object()) fail(origin, "tolerances", "expected an object");
    for (const auto& [k, v] : t.items()) {
      if (!c.tolerances.count(k)) fail(origin, "tolerances." + k, "unknown tolerance");
      const double x = number(v, origin, "tolerances." + k);
      if (!(x > 0.0)) fail(origin, "tolerances." + k, "must be positive");
      c.tolerances[k] = x;
    }
  } else {
    c.defaulted.push_back("tolerances");
  }

  // problem-level validation (alpha, d, R0, alpha_hat) through the spec constructor
  try {
    (void)ProblemSpec::make(c.alpha, c.m, c.t_ladder.front(), c.alpha_hat, c.d, c.R0);
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(origin + ": " + e.what());
  }
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

}  // namespace bubbler
