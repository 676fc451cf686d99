// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "krf/config.hpp"
#include "krf/geometry.hpp"

namespace krf::cli {

/// Everything a subcommand needs: the validated config, its hash and the
/// experiment directory <out>/<hash> that holds every artifact:
///
///   semiflat/   rho.krf, semiflat.json
///   static/     psi.krf, psi_lifted.krf, static.json
///   flow/       trajectory.csv, trajectory.json, snapshots/
///   barriers/   barriers.json, <name>_T.krf (barrier fields at t_end)
///   verify/     reports.json
///   report/     plot_data.csv, barrier_params.csv, summary.json
struct Context {
  RunConfig config;
  std::string hash;
  std::string dir;
  FlowProblem problem;
  bool verbose = false;       // progress messages on stderr
  std::ostream* log = nullptr;  // command summaries
};

Context make_context(const RunConfig& config, bool verbose, std::ostream& log);

// Each command returns the process exit status (0 pass, 1 check failure) and
// lets krf::Error escape for the caller to map.
int cmd_semiflat(const Context& ctx);
int cmd_solve_static(const Context& ctx);
int cmd_run_flow(const Context& ctx);
int cmd_barriers(const Context& ctx);
int cmd_verify(const Context& ctx);
int cmd_report(const Context& ctx);

}  // namespace krf::cli
