#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlf/errors.hpp"
#include "rlf/runners.hpp"
#include "rlf/scenario.hpp"
#include "rlf/svg.hpp"

using namespace rlf;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text, "s.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rlf_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmall = R"(# small rotation
[scenario]
name = small
seed = 4

[field]
name = rotation
omega = 1

[grid]
radius = 0.3
dy = 0.1
dt = 0.25

[test_function]
center = 0 0
radius = 0.3
t_center = 0.5
t_radius = 0.4

[residual]
quad = 0.1 0.05
step = 0.05 0.025
support = 1

[lusin]
epsilon = 0.1 0.2

[metric]
lambda = 0.4 0.2
lattice_dx = 0.1
equivalence_sources = 4

[uniqueness]
box = 0.8
dx = 0.08 0.04

[flow]
samples = 10
)";

}  // namespace

TEST_CASE("scenario defaults and values") {
  const Scenario d = parse_scenario("", "empty.ini");
  CHECK(d.field.name == "zero");
  CHECK(d.times().size() == 11);
  CHECK(d.ball_volume() == doctest::Approx(M_PI));

  const Scenario s = parse_scenario(kSmall, "small.ini");
  CHECK(s.name == "small");
  CHECK(s.seed == 4);
  CHECK(s.field.params.at("omega") == 1.0);
  CHECK(s.times() == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
  CHECK(s.quad == std::vector<double>{0.1, 0.05});
  CHECK(s.epsilon_measures()[0] == doctest::Approx(0.1 * M_PI * 0.09));
  CHECK(s.hash == fnv1a(kSmall));
  CHECK(s.test_function()(0.5, Vec{}) == doctest::Approx(1.0));
  CHECK(s.initial_datum()(Vec{}) == doctest::Approx(1.0));
}

TEST_CASE("scenario errors carry the line") {
  CHECK(error_of("[grid]\ndy = -1\n") == "s.ini:2: 'dy' must be positive");
  CHECK(error_of("[grid]\ndy = abc\n").rfind("s.ini:2:", 0) == 0);
  CHECK(error_of("\n\n[nope]\n").rfind("s.ini:3:", 0) == 0);
  CHECK(error_of("[grid]\nradius = 1\nfoo = 2\n").rfind("s.ini:3:", 0) == 0);
  CHECK(error_of("[grid]\ndy = 0.1\ndy = 0.2\n").rfind("s.ini:3:", 0) == 0);
  CHECK(error_of("[grid]\ndt = 0.3\n").rfind("s.ini:2:", 0) == 0);
  CHECK(error_of("[field]\nname = rotation\nalpha = 2\n").rfind("s.ini:", 0) == 0);
  CHECK(error_of("[metric]\nlambda = 0.1 0.2\n").rfind("s.ini:2:", 0) == 0);
  CHECK(error_of("[lusin]\nepsilon = 1.5\n").rfind("s.ini:2:", 0) == 0);
  CHECK(error_of("[residual]\nquad = 0.1 0.05\n").rfind("s.ini:2:", 0) == 0);
  CHECK(error_of("key = 1\n").rfind("s.ini:1:", 0) == 0);
  CHECK(error_of("[grid]\nnot a pair\n").rfind("s.ini:2:", 0) == 0);
  CHECK_THROWS_AS(load_scenario("/nonexistent/x.ini"), ConfigError);
}

TEST_CASE("table preamble") {
  const Scenario s = parse_scenario(kSmall, "small.ini");
  std::ostringstream out;
  write_table_preamble(out, s, {{"b", 0.5}, {"a", 1e-12}});
  const std::string line = out.str();
  CHECK(line.rfind("# scenario=small hash=", 0) == 0);
  CHECK(line.find("version=1.0.0") != std::string::npos);
  CHECK(line.find("seed=4") != std::string::npos);
  CHECK(line.find("tolerances=a:1e-12;b:0.5") != std::string::npos);
  CHECK(line.back() == '\n');
}

TEST_CASE("svg chart") {
  std::ostringstream out;
  write_line_chart(out, {{"a<b", {1, 2, 4}, {1, 0.5, 0.25}}, {"neg", {1, 2}, {-1, 0}}},
                   {"title & more", "x", "y", true, true});
  const std::string svg = out.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg.find("title &amp; more") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  CHECK(polylines == 2);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::config) == 2);
  CHECK(exit_code(ErrorKind::infeasible) == 3);
  CHECK(exit_code(ErrorKind::invariant) == 4);
  const Scenario s = parse_scenario(kSmall, "small.ini");
  CHECK_THROWS_AS(run_subcommand("bogus", s, scratch("bogus")), ConfigError);
  CHECK(subcommands().size() == 7);
}

TEST_CASE("every subcommand writes deterministic tables with a preamble") {
  const Scenario s = parse_scenario(kSmall, "small.ini");
  for (const auto& name : subcommands()) {
    CAPTURE(name);
    const fs::path a = scratch(name + "_a"), b = scratch(name + "_b");
    const RunReport ra = run_subcommand(name, s, a);
    const RunReport rb = run_subcommand(name, s, b);
    REQUIRE(ra.files.size() == rb.files.size());
    CHECK(!ra.files.empty());
    bool has_svg = false;
    for (std::size_t k = 0; k < ra.files.size(); ++k) {
      CHECK(fs::exists(ra.files[k]));
      const std::string text = slurp(ra.files[k]);
      CHECK(text == slurp(rb.files[k]));
      if (ra.files[k].extension() == ".csv") CHECK(text.rfind("# scenario=small hash=", 0) == 0);
      has_svg |= ra.files[k].extension() == ".svg";
    }
    CHECK(has_svg);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("infeasible runs map to exit code 3") {
  Scenario s = parse_scenario(kSmall, "small.ini");
  s.cfl = 5.0;
  try {
    run_uniqueness(s, scratch("cfl"));
    FAIL("expected an infeasible CFL");
  } catch (const Error& e) {
    CHECK(exit_code(e.kind()) == 3);
  }
}
