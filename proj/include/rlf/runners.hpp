#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "rlf/errors.hpp"
#include "rlf/scenario.hpp"

namespace rlf {

/// Files written by one subcommand and the lines it reports on stdout.
struct RunReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> summary;
};

/// Flow grid, compressibility, round-trip and semigroup errors, assumption
/// report and Lusin sets per epsilon.
RunReport run_flow(const Scenario& s, const std::filesystem::path& out);
/// Lagrangian solution, its pullback and the constancy of U/R along trajectories.
RunReport run_transport(const Scenario& s, const std::filesystem::path& out);
/// Eulerian and Lagrangian residuals and the change-of-variables gap per level.
RunReport run_residual(const Scenario& s, const std::filesystem::path& out);
/// Lusin sets per epsilon.
RunReport run_lusin(const Scenario& s, const std::filesystem::path& out);
/// Graph statistics, (lambda, L_lambda) scan, equivalence constants, sample distances.
RunReport run_metric_scan(const Scenario& s, const std::filesystem::path& out);
/// Epsilon sweep: convergence scans, certificates, change of variables with
/// the extension, Step-4 error bound.
RunReport run_extension(const Scenario& s, const std::filesystem::path& out);
/// fv_solve against the Lagrangian solution across the dx levels.
RunReport run_uniqueness(const Scenario& s, const std::filesystem::path& out);

/// Subcommand names in CLI order.
const std::vector<std::string>& subcommands();
RunReport run_subcommand(const std::string& name, const Scenario& s, const std::filesystem::path& out);

/// 0 success, 2 config, 3 infeasible, 4 invariant.
int exit_code(ErrorKind kind);

}  // namespace rlf
