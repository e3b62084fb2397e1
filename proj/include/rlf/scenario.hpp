#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlf/extension.hpp"
#include "rlf/geometry.hpp"
#include "rlf/transport.hpp"
#include "rlf/vectorfield.hpp"
#include "rlf/weakform.hpp"

namespace rlf {

inline constexpr const char* kVersion = "1.0.0";

/// Initial datum u0.
struct DataSpec {
  std::string kind = "gaussian";  ///< gaussian | zero | constant
  Vec center{};
  double sigma = 0.15;
  double amplitude = 1.0;
};

/// Test function Psi (or psi for the Eulerian residual).
struct TestFunctionSpec {
  std::string kind = "bump";  ///< bump | static | constant
  BumpSpec bump;
};

/// One experiment record. Every field has a default so a scenario file only
/// lists what it changes; see README.md for the key reference.
struct Scenario {
  std::string name = "scenario";
  std::string source;       ///< file name, for messages
  std::uint64_t hash = 0;   ///< FNV-1a of the file bytes
  std::uint64_t seed = 1;

  FieldSpec field;

  double radius = 1.0;      ///< base-point ball B_R
  double dy = 0.1;
  double dt = 0.1;          ///< flow grid time spacing
  double step = 1e-3;       ///< RK4 step
  double escape_radius = kDefaultEscapeRadius;

  DataSpec data;
  TestFunctionSpec test;

  std::vector<double> quad{0.1, 0.05, 0.025};
  std::vector<double> residual_step{0.02, 0.01, 0.005};
  double support = 3.0;     ///< half-width of the Eulerian data box

  std::vector<double> epsilon{0.05, 0.1, 0.2};  ///< fractions of |B_R|
  std::vector<double> lambda{0.4, 0.2, 0.1, 0.05, 0.025};
  double lattice_dx = 0.1;
  std::size_t pair_budget = 20'000'000;
  std::size_t equivalence_sources = 32;
  std::string weight = "one";  ///< Step-4 weight: one | data

  double box = 1.2;                           ///< finite-volume box half-width
  std::vector<double> dx{0.04, 0.02, 0.01};   ///< finite-volume refinement levels
  double cfl = 0.5;

  int samples = 100;        ///< round-trip sample count

  double horizon() const { return field.horizon; }
  std::vector<double> times() const;
  double ball_volume() const;
  std::vector<double> epsilon_measures() const;
  SpatialFunction initial_datum() const;
  TestFunction test_function() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

/// Parses `[section]` / `key = value` text. `#` and `;` start comments.
/// Errors are ConfigError with a `source:line:` prefix.
Scenario parse_scenario(const std::string& text, const std::string& source);
Scenario load_scenario(const std::filesystem::path& path);

/// `# scenario=...,hash=...,version=...` line plus the tolerance list.
void write_table_preamble(std::ostream& out, const Scenario& s, const std::map<std::string, double>& tolerances);

}  // namespace rlf
