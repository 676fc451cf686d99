// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/io.hpp"
#include "models.hpp"

using namespace krf;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "krf_test_io";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("property: field round trip is bit exact") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int trial = 0; trial < 5; ++trial) {
    const TorusGrid g = build_torus_grid(2 + trial % 2, std::vector<int>(static_cast<std::size_t>(2 + trial % 2), 4 + trial), 1);
    ScalarField f(g);
    for (double& v : f.values) v = u(rng) * std::pow(10.0, trial - 2);
    f[0] = std::numeric_limits<double>::denorm_min();
    const std::string path = scratch("field.krf");
    write_field(path, f, "abc", {{"t", 1.5}});
    const ScalarField back = read_field(path);
    CHECK(back.grid == g);
    CHECK(std::memcmp(back.values.data(), f.values.data(), f.values.size() * sizeof(double)) == 0);
    CHECK(read_config_hash(path + ".json") == "abc");
  }
}

TEST_CASE("corrupt field files") {
  const TorusGrid g = build_torus_grid(1, {8}, 1);
  const std::string path = scratch("bad.krf");
  write_field(path, ScalarField(g, 1.0));
  std::string bytes = slurp(path);
  {
    std::string m = bytes;
    m[0] = 'X';
    std::ofstream(path, std::ios::binary) << m;
    CHECK_THROWS_AS(read_field(path), IoError);
  }
  {
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(read_field(path), IoError);
  }
  {
    std::ofstream(path, std::ios::binary) << bytes << "extra";
    CHECK_THROWS_AS(read_field(path), IoError);
  }
  CHECK_THROWS_AS(read_field(scratch("missing.krf")), DependencyError);
}

TEST_CASE("trajectory CSV is deterministic and round trips") {
  std::vector<DiagnosticRow> rows(3);
  for (int k = 0; k < 3; ++k) {
    rows[static_cast<std::size_t>(k)] = {0.1 * k, 1.0 / 3 + k, -2.0 / 7, std::exp(k), 1e-17 * k,
                                         std::nan(""), 0.25, 0.1};
  }
  const std::string a = scratch("a.csv");
  const std::string b = scratch("b.csv");
  write_trajectory_csv(a, rows);
  write_trajectory_csv(b, rows);
  const std::string text = slurp(a);
  CHECK(text == slurp(b));
  CHECK(text.rfind(kTrajectoryCsvHeader, 0) == 0);
  const auto back = read_trajectory_csv(a);
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back[k].t == rows[k].t);
    CHECK(back[k].sup_phi == rows[k].sup_phi);
    CHECK(back[k].inf_phi == rows[k].inf_phi);
    CHECK(back[k].i_t == rows[k].i_t);
    CHECK(back[k].excess == rows[k].excess);
    CHECK(std::isnan(back[k].dist_static));
  }
}

TEST_CASE("barrier records and reports") {
  BarrierRecord r;
  r.name = "u_eps";
  r.kind = BarrierKind::kSuper;
  r.params.epsilon = 0.1;
  r.params.T0 = 2.5;
  r.limit_offset = 0.125;
  const std::string path = scratch("barriers.json");
  write_barrier_records(path, {r}, "h");
  const auto back = read_barrier_records(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].name == "u_eps");
  CHECK(back[0].kind == BarrierKind::kSuper);
  CHECK(back[0].params.T0 == 2.5);
  CHECK(back[0].limit_offset == 0.125);

  std::ofstream(path) << "{\"barriers\": [ {\"name\": ";
  CHECK_THROWS_AS(read_barrier_records(path), DependencyError);
  CHECK_THROWS_AS(read_barrier_records(scratch("none.json")), DependencyError);

  ComparisonReport rep;
  rep.check_id = "sandwich";
  rep.per_time = {{-0.5, 3, 1.0}, {0.25, 4, 2.0}};
  rep.tolerance = 0.1;
  rep.metadata["x"] = std::numeric_limits<double>::infinity();
  rep.finalize();
  CHECK(!rep.pass);
  const std::string rp = scratch("reports.json");
  write_reports(rp, {rep}, "h");
  const auto reps = read_reports(rp);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].worst.magnitude == 0.25);
  CHECK(reps[0].worst.node == 4);
  CHECK(!reps[0].pass);
  CHECK(reps[0].per_time.size() == 2);
}

TEST_CASE("static and semi-flat artifacts round trip") {
  const FlowProblem p = testing::product_problem(8);
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  const std::string dir = scratch("artifacts");
  write_semiflat(dir, sf, "h");
  const SemiFlatField sb = read_semiflat(dir);
  CHECK(sb.rho.values == sf.rho.values);
  CHECK(sb.fiber_constants == sf.fiber_constants);
  StaticSolution st;
  st.psi = ScalarField(p.grid.base_grid(), 0.5);
  st.lifted = ScalarField(p.grid, 0.5);
  st.residual_history = {{0, 1.0}, {1, 1e-13}};
  st.final_residual = 1e-13;
  write_static_solution(dir, st, "h");
  const StaticSolution back = read_static_solution(dir);
  CHECK(back.psi.values == st.psi.values);
  CHECK(back.lifted.values == st.lifted.values);
  CHECK(back.final_residual == st.final_residual);
  CHECK(experiment_directory(scratch("exp"), "0123").find("0123") != std::string::npos);
  CHECK(path_exists(experiment_directory(scratch("exp"), "0123")));
}
