// SPDX-License-Identifier: Apache-2.0
#include <map>
#include <string>

#include "doctest.h"
#include "krf/config.hpp"
#include "krf/error.hpp"

using namespace krf;

namespace {

const char* kMinimal =
    "# product model\n"
    "[model]\n"
    "dims = 2\n"
    "kappa = 1\n"
    "points = 32\n"
    "A0.potential = 0.15*cos(y1)*cos(y2) + 0.1*sin(y1)\n"
    "Achi.11 = 1 + 0.3*sin(y1)\n"
    "f_mu = 1 + 0.3*cos(y1)\n"
    "\n"
    "[flow]\n"
    "phi0 = 0.01*cos(y1 + y2)\n"
    "t_end = 12\n";

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars](const std::string& key) -> std::optional<std::string> {
    const auto it = vars.find(key);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const RunConfig c = parse_config_text(kMinimal);
  CHECK(c.model.n_dims == 2);
  CHECK(c.model.kappa == 1);
  CHECK(c.model.points == std::vector<int>{32, 32});
  CHECK(c.flow.t_end == 12.0);
  CHECK(c.flow.dt0 == 1e-2);
  CHECK(c.flow.scheme == TimeScheme::kLinearlyImplicit);
  CHECK(c.solver.method == StaticMethod::kDampedNewton);
  CHECK(c.barrier.epsilons == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(!c.barrier.divisor.has_value());
  CHECK(c.wants("sandwich"));
  CHECK(!c.wants("comparison"));
  CHECK(c.output.dir == "runs");
}

TEST_CASE("hash is stable and sensitive to values but not to layout") {
  const RunConfig a = parse_config_text(kMinimal);
  const RunConfig b = parse_config_text(std::string("\n\n") + kMinimal + "# trailing comment\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  const RunConfig c = parse_config_text(std::string(kMinimal) + "dt0 = 0.005\n");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("unknown keys and syntax errors report their position") {
  try {
    parse_config_text("[model]\ndims = 2\nkapa = 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 1);
    CHECK(std::string(e.what()).find("kapa") != std::string::npos);
  }
  try {
    parse_config_text("[model]\ndims = 2\n[flow\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_config_text("[nonsense]\nx = 1\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text("dims = 2\n"), ConfigurationError);
}

TEST_CASE("range and consistency checks") {
  const std::string base = kMinimal;
  CHECK_THROWS_AS(parse_config_text(base + "dt0 = -1\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text(base + "stencil = wide\n"), ConfigurationError);
  CHECK_NOTHROW(parse_config_text(base + "stencil = wide\nscheme = explicit\n"));
  CHECK_THROWS_AS(parse_config_text(base + "[barrier]\nepsilons = 0.2 0.6\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text(base + "[barrier]\ndivisor = exp(-(1 - cos(y2)))\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text(base + "[verify]\nchecks = sandwich nope\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text("[model]\ndims = 2\nf_mu = 1 + y3\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config_text("[model]\ndims = 2\nf_mu = 1 + t\n"), ConfigurationError);
  const RunConfig all = parse_config_text(base + "[verify]\nchecks = all\n");
  CHECK(all.wants("comparison"));
  CHECK(all.wants("regular"));
}

TEST_CASE("environment overrides take precedence") {
  const RunConfig c = parse_config_text(kMinimal, fake_env({{"KRF_FLOW_T_END", "3.5"}, {"KRF_MODEL_ACHI_11", "2"}}));
  CHECK(c.flow.t_end == 3.5);
  const RunConfig plain = parse_config_text(kMinimal);
  CHECK(config_hash(c) != config_hash(plain));
  CHECK_THROWS_AS(parse_config_text(kMinimal, fake_env({{"KRF_FLOW_T_END", "soon"}})), ConfigurationError);
}

TEST_CASE("missing file is a dependency error") {
  CHECK_THROWS_AS(parse_config("/nonexistent/krf/config.ini"), DependencyError);
}
