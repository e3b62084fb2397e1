#include <omp.h>

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "rlf/runners.hpp"

namespace {

const std::map<std::string, std::string> kDescriptions{
    {"flow", "flow grid, assumption report, density bounds, round trips, Lusin sets"},
    {"transport", "Lagrangian solution, pullback and density ratio"},
    {"residual", "Eulerian and Lagrangian residuals under refinement"},
    {"lusin", "Lusin Lipschitz sets across epsilon"},
    {"metric-scan", "L_lambda convergence scan and d_lambda samples"},
    {"extend", "McShane extension certificates and the Step-4 bound"},
    {"uniqueness", "finite volumes against the Lagrangian solution"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian flow and renormalization experiments"};
  app.set_version_flag("--version", std::string(rlf::kVersion));
  app.require_subcommand(1);

  std::string scenario_file;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  for (const auto& name : rlf::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("scenario", scenario_file, "scenario file")->required();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "overrides the scenario seed");
    sub->add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) omp_set_num_threads(threads);
    rlf::Scenario s = rlf::load_scenario(scenario_file);
    if (seed) s.seed = *seed;
    const std::string name = app.get_subcommands().front()->get_name();
    const rlf::RunReport report = rlf::run_subcommand(name, s, out_dir);
    for (const auto& line : report.summary) std::cout << line << "\n";
    for (const auto& f : report.files) std::cout << "wrote " << f.string() << "\n";
    return 0;
  } catch (const rlf::Error& e) {
    std::cerr << "rlf-lab: " << e.what() << "\n";
    return rlf::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "rlf-lab: " << e.what() << "\n";
    return 4;
  }
}
