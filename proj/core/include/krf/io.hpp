// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "krf/barriers.hpp"
#include "krf/flow.hpp"
#include "krf/geometry.hpp"
#include "krf/static_solver.hpp"
#include "krf/verification.hpp"

namespace krf {

/// Field file layout (little endian):
///   "KRF1", u32 n_dims, u32 kappa, u32 points[n_dims], f64 values[node_count]
/// with a JSON sidecar at path + ".json" holding the grid, the config hash and
/// free-form numeric metadata.
void write_field(const std::string& path, const ScalarField& field, const std::string& config_hash = {},
                 const std::map<std::string, double>& metadata = {});

/// Missing file: DependencyError naming the path. Bad magic, truncation or
/// trailing bytes: IoError.
ScalarField read_field(const std::string& path);

/// Columns: t,sup_phi,inf_phi,I_t,excess_IplusIprime,dist_static,max_residual,dt
/// in "%.16e" (17 significant digits).
inline constexpr const char* kTrajectoryCsvHeader =
    "t,sup_phi,inf_phi,I_t,excess_IplusIprime,dist_static,max_residual,dt";

void write_trajectory_csv(const std::string& path, const std::vector<DiagnosticRow>& rows);
std::vector<DiagnosticRow> read_trajectory_csv(const std::string& path);

/// Writes every snapshot as dir/snap_NNNNN.krf plus dir/snapshots.json.
void write_snapshots(const std::string& dir, const Trajectory& trajectory, const std::string& config_hash);
/// Snapshots listed in dir/snapshots.json (phi and t only).
std::vector<FlowState> read_snapshots(const std::string& dir);

/// dir/trajectory.csv, dir/trajectory.json (scheme and the per-row realized
/// rates, which the CSV does not carry) and the snapshots under dir/snapshots.
void write_trajectory(const std::string& dir, const Trajectory& trajectory, const std::string& config_hash);
/// Inverse of write_trajectory; final_state is the last snapshot. Missing or
/// malformed pieces throw DependencyError naming the path.
Trajectory read_trajectory(const std::string& dir);

/// dir/psi.krf (base grid), dir/psi_lifted.krf and dir/static.json.
void write_static_solution(const std::string& dir, const StaticSolution& solution, const std::string& config_hash);
StaticSolution read_static_solution(const std::string& dir);

/// dir/rho.krf and dir/semiflat.json.
void write_semiflat(const std::string& dir, const SemiFlatField& semiflat, const std::string& config_hash);
SemiFlatField read_semiflat(const std::string& dir);

struct BarrierRecord {
  std::string name;
  BarrierKind kind = BarrierKind::kSub;
  BarrierParams params;
  double limit_offset = 0.0;  // sup |barrier - psi| at the largest sampled time
};

void write_barrier_records(const std::string& path, const std::vector<BarrierRecord>& records,
                           const std::string& config_hash);
/// Missing or malformed file: DependencyError naming the path.
std::vector<BarrierRecord> read_barrier_records(const std::string& path);

void write_reports(const std::string& path, const std::vector<ComparisonReport>& reports,
                   const std::string& config_hash);
/// Missing or malformed file: DependencyError naming the path.
std::vector<ComparisonReport> read_reports(const std::string& path);

/// Reads the "config_hash" entry of a JSON sidecar or artifact.
std::string read_config_hash(const std::string& json_path);

void write_text(const std::string& path, const std::string& text);
void make_directories(const std::string& dir);
bool path_exists(const std::string& path);

/// base/hash, created on demand.
std::string experiment_directory(const std::string& base, const std::string& config_hash);

}  // namespace krf
