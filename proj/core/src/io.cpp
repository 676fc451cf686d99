// SPDX-License-Identifier: Apache-2.0
#include "krf/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "krf/error.hpp"

namespace krf {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "field files assume a little-endian host");

constexpr char kMagic[4] = {'K', 'R', 'F', '1'};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing artifact '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated field file '" + path + "'");
  return v;
}

json grid_json(const TorusGrid& g) {
  return {{"n_dims", g.n_dims()}, {"kappa", g.base_dims()}, {"points", g.points_per_dim()}};
}

}  // namespace

void write_field(const std::string& path, const ScalarField& field, const std::string& config_hash,
                 const std::map<std::string, double>& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  const TorusGrid& g = field.grid;
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.n_dims()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.base_dims()));
  for (int p : g.points_per_dim()) put<std::uint32_t>(out, static_cast<std::uint32_t>(p));
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed for '" + path + "'");

  json side = grid_json(g);
  side["config_hash"] = config_hash;
  side["format"] = "KRF1 little-endian f64, row-major, axis 0 slowest";
  json meta = json::object();
  for (const auto& [k, v] : metadata) meta[k] = number_or_null(v);
  side["metadata"] = meta;
  write_json(path + ".json", side);
}

ScalarField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing field file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad magic in '" + path + "'");
  const auto n = get<std::uint32_t>(in, path);
  const auto kappa = get<std::uint32_t>(in, path);
  if (n < 1 || n > static_cast<std::uint32_t>(kMaxDims) || kappa > n) throw IoError("bad header in '" + path + "'");
  std::vector<int> points;
  for (std::uint32_t d = 0; d < n; ++d) points.push_back(static_cast<int>(get<std::uint32_t>(in, path)));
  TorusGrid g;
  try {
    g = build_torus_grid(static_cast<int>(n), points, static_cast<int>(kappa));
  } catch (const ConfigurationError& e) {
    throw IoError("bad grid in '" + path + "': " + e.what());
  }
  std::vector<double> values(g.node_count());
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
    throw IoError("truncated field file '" + path + "'");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in '" + path + "'");
  return ScalarField(std::move(g), std::move(values));
}

void write_trajectory_csv(const std::string& path, const std::vector<DiagnosticRow>& rows) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write '" + path + "'");
  std::fprintf(f, "%s\n", kTrajectoryCsvHeader);
  for (const DiagnosticRow& r : rows) {
    std::fprintf(f, "%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e\n", r.t, r.sup_phi, r.inf_phi, r.i_t,
                 r.excess, r.dist_static, r.max_residual, r.dt);
  }
  if (std::fclose(f) != 0) throw IoError("write failed for '" + path + "'");
}

std::vector<DiagnosticRow> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing trajectory '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryCsvHeader) throw IoError("unexpected header in '" + path + "'");
  std::vector<DiagnosticRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[8];
    std::istringstream s(line);
    for (int k = 0; k < 8; ++k) {
      std::string cell;
      if (!std::getline(s, cell, ',')) throw IoError("short row in '" + path + "'");
      char* end = nullptr;
      v[k] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw IoError("bad number '" + cell + "' in '" + path + "'");
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
  }
  return rows;
}

void write_snapshots(const std::string& dir, const Trajectory& trajectory, const std::string& config_hash) {
  make_directories(dir);
  json index = json::array();
  for (std::size_t k = 0; k < trajectory.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%05zu.krf", k);
    const FlowState& s = trajectory.snapshots[k];
    write_field(join(dir, name), s.phi, config_hash,
                {{"t", s.t}, {"step_index", static_cast<double>(s.step_index)}});
    index.push_back({{"file", name}, {"t", s.t}, {"step_index", s.step_index}});
  }
  write_json(join(dir, "snapshots.json"), {{"config_hash", config_hash}, {"snapshots", index}});
}

std::vector<FlowState> read_snapshots(const std::string& dir) {
  const std::string path = join(dir, "snapshots.json");
  const json j = read_json(path);
  std::vector<FlowState> out;
  try {
    for (const json& e : j.at("snapshots")) {
      FlowState s;
      s.t = e.at("t").get<double>();
      s.step_index = e.at("step_index").get<long>();
      s.phi = read_field(join(dir, e.at("file").get<std::string>()));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
  return out;
}

void write_trajectory(const std::string& dir, const Trajectory& trajectory, const std::string& config_hash) {
  make_directories(dir);
  write_trajectory_csv(join(dir, "trajectory.csv"), trajectory.rows);
  json rates = json::array();
  for (const DiagnosticRow& r : trajectory.rows) rates.push_back(number_or_null(r.i_rate));
  const bool explicit_scheme = trajectory.scheme == TimeScheme::kExplicit;
  write_json(join(dir, "trajectory.json"), {{"config_hash", config_hash},
                                            {"scheme", explicit_scheme ? "explicit" : "implicit"},
                                            {"rows", trajectory.rows.size()},
                                            {"i_rate", rates}});
  write_snapshots(join(dir, "snapshots"), trajectory, config_hash);
}

Trajectory read_trajectory(const std::string& dir) {
  Trajectory tr;
  const std::string csv = join(dir, "trajectory.csv");
  if (!fs::exists(csv)) throw DependencyError("missing artifact '" + csv + "'");
  tr.rows = read_trajectory_csv(csv);
  const std::string meta = join(dir, "trajectory.json");
  const json j = read_json(meta);
  try {
    tr.scheme = j.at("scheme").get<std::string>() == "explicit" ? TimeScheme::kExplicit : TimeScheme::kLinearlyImplicit;
    const json& rates = j.at("i_rate");
    if (rates.size() != tr.rows.size()) throw DependencyError("artifact '" + meta + "' does not match " + csv);
    for (std::size_t k = 0; k < rates.size(); ++k) tr.rows[k].i_rate = number_from(rates[k]);
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + meta + "': " + e.what());
  }
  tr.snapshots = read_snapshots(join(dir, "snapshots"));
  if (tr.snapshots.empty()) throw DependencyError("no snapshots under '" + join(dir, "snapshots") + "'");
  tr.final_state = tr.snapshots.back();
  return tr;
}

void write_static_solution(const std::string& dir, const StaticSolution& solution, const std::string& config_hash) {
  make_directories(dir);
  write_field(join(dir, "psi.krf"), solution.psi, config_hash, {{"final_residual", solution.final_residual}});
  if (solution.lifted.size() > 0) write_field(join(dir, "psi_lifted.krf"), solution.lifted, config_hash);
  json hist = json::array();
  for (const auto& [it, r] : solution.residual_history) hist.push_back({it, number_or_null(r)});
  write_json(join(dir, "static.json"), {{"config_hash", config_hash},
                                        {"final_residual", number_or_null(solution.final_residual)},
                                        {"residual_history", hist}});
}

StaticSolution read_static_solution(const std::string& dir) {
  const std::string path = join(dir, "static.json");
  const json j = read_json(path);
  StaticSolution s;
  try {
    s.final_residual = number_from(j.at("final_residual"));
    for (const json& e : j.at("residual_history")) s.residual_history.emplace_back(e.at(0).get<int>(), number_from(e.at(1)));
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
  s.psi = read_field(join(dir, "psi.krf"));
  if (path_exists(join(dir, "psi_lifted.krf"))) s.lifted = read_field(join(dir, "psi_lifted.krf"));
  return s;
}

void write_semiflat(const std::string& dir, const SemiFlatField& semiflat, const std::string& config_hash) {
  make_directories(dir);
  write_field(join(dir, "rho.krf"), semiflat.rho, config_hash);
  json c = json::array();
  for (double v : semiflat.fiber_constants) c.push_back(v);
  write_json(join(dir, "semiflat.json"), {{"config_hash", config_hash},
                                          {"fiber_constants", c},
                                          {"max_residual", semiflat.max_residual},
                                          {"max_fiber_mean", semiflat.max_fiber_mean},
                                          {"max_iterations", semiflat.max_iterations}});
}

SemiFlatField read_semiflat(const std::string& dir) {
  const std::string path = join(dir, "semiflat.json");
  const json j = read_json(path);
  SemiFlatField s;
  try {
    s.fiber_constants = j.at("fiber_constants").get<std::vector<double>>();
    s.max_residual = j.at("max_residual").get<double>();
    s.max_fiber_mean = j.at("max_fiber_mean").get<double>();
    s.max_iterations = j.at("max_iterations").get<int>();
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
  s.rho = read_field(join(dir, "rho.krf"));
  if (s.fiber_constants.size() != s.rho.grid.base_count()) {
    throw DependencyError("malformed artifact '" + path + "': fiber constant count does not match rho.krf");
  }
  return s;
}

void write_barrier_records(const std::string& path, const std::vector<BarrierRecord>& records,
                           const std::string& config_hash) {
  json arr = json::array();
  for (const BarrierRecord& r : records) {
    arr.push_back({{"name", r.name},
                   {"kind", r.kind == BarrierKind::kSub ? "sub" : "super"},
                   {"C", r.params.C},
                   {"B", number_or_null(r.params.B)},
                   {"epsilon", r.params.epsilon},
                   {"A", r.params.A},
                   {"r", r.params.r},
                   {"T0", r.params.T0},
                   {"limit_offset", number_or_null(r.limit_offset)}});
  }
  write_json(path, {{"config_hash", config_hash}, {"barriers", arr}});
}

std::vector<BarrierRecord> read_barrier_records(const std::string& path) {
  const json j = read_json(path);
  std::vector<BarrierRecord> out;
  try {
    for (const json& e : j.at("barriers")) {
      BarrierRecord r;
      r.name = e.at("name").get<std::string>();
      const std::string kind = e.at("kind").get<std::string>();
      if (kind != "sub" && kind != "super") throw DependencyError("malformed artifact '" + path + "': bad kind '" + kind + "'");
      r.kind = kind == "sub" ? BarrierKind::kSub : BarrierKind::kSuper;
      r.params.C = e.at("C").get<double>();
      r.params.B = number_from(e.at("B"));
      r.params.epsilon = e.at("epsilon").get<double>();
      r.params.A = e.at("A").get<double>();
      r.params.r = e.at("r").get<double>();
      r.params.T0 = e.at("T0").get<double>();
      r.limit_offset = number_from(e.at("limit_offset"));
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
  return out;
}

void write_reports(const std::string& path, const std::vector<ComparisonReport>& reports,
                   const std::string& config_hash) {
  json arr = json::array();
  for (const ComparisonReport& r : reports) {
    json per = json::array();
    for (const Violation& v : r.per_time) per.push_back({number_or_null(v.t), v.node, number_or_null(v.magnitude)});
    json meta = json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = number_or_null(v);
    arr.push_back({{"check_id", r.check_id},
                   {"pass", r.pass},
                   {"tolerance", number_or_null(r.tolerance)},
                   {"worst", {{"magnitude", number_or_null(r.worst.magnitude)}, {"node", r.worst.node}, {"t", number_or_null(r.worst.t)}}},
                   {"per_time", per},
                   {"metadata", meta},
                   {"notes", r.notes}});
  }
  write_json(path, {{"config_hash", config_hash}, {"reports", arr}});
}

std::vector<ComparisonReport> read_reports(const std::string& path) {
  const json j = read_json(path);
  std::vector<ComparisonReport> out;
  try {
    for (const json& e : j.at("reports")) {
      ComparisonReport r;
      r.check_id = e.at("check_id").get<std::string>();
      r.pass = e.at("pass").get<bool>();
      r.tolerance = number_from(e.at("tolerance"));
      r.worst = {number_from(e.at("worst").at("magnitude")), e.at("worst").at("node").get<std::size_t>(),
                 number_from(e.at("worst").at("t"))};
      for (const json& p : e.at("per_time")) {
        r.per_time.push_back({number_from(p.at(2)), p.at(1).get<std::size_t>(), number_from(p.at(0))});
      }
      for (const auto& [k, v] : e.at("metadata").items()) r.metadata[k] = number_from(v);
      r.notes = e.at("notes").get<std::vector<std::string>>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DependencyError("malformed artifact '" + path + "': " + e.what());
  }
  return out;
}

std::string read_config_hash(const std::string& json_path) {
  const json j = read_json(json_path);
  if (!j.contains("config_hash") || !j["config_hash"].is_string()) {
    throw DependencyError("artifact '" + json_path + "' has no config_hash");
  }
  return j["config_hash"].get<std::string>();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void make_directories(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

bool path_exists(const std::string& path) { return fs::exists(path); }

std::string experiment_directory(const std::string& base, const std::string& config_hash) {
  const std::string dir = join(base, config_hash);
  make_directories(dir);
  return dir;
}

}  // namespace krf
