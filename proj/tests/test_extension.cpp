#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "rlf/errors.hpp"
#include "rlf/extension.hpp"

using namespace rlf;

namespace {

FlowGrid small_grid(const char* name) {
  return build_flow_grid(oracle::field(name), 0.2, 0.1, oracle::unit_times(4), 1e-3);
}

TestFunction ripple() {
  BumpSpec s;
  s.x_center = vec2(0.05, 0);
  s.x_radius = 0.3;
  s.t_center = 0.5;
  s.t_radius = 0.45;
  s.wavenumber = 8.0;
  return tensor_bump(s, 1.0);
}

LusinSet whole(const FlowGrid& grid) { return lusin_lipschitz_set(grid, 0.5 * M_PI * grid.radius * grid.radius, default_lusin_thresholds()); }

}  // namespace

TEST_CASE("McShane extension against brute force") {
  const FlowGrid grid = small_grid("swirl_power");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.2);
  const TubeFunction tube = build_tube_function(ripple(), grid, whole(grid));
  const ExtendedFunction f = mcshane_extend(tube, g, false);
  const std::vector<std::size_t> nodes = tube_nodes(g, tube.members);
  CHECK(f.slope == f.L_lambda * (1.0 + 1e-12));

  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (!g.active(v)) continue;
    const auto d = shortest_paths(g, v);
    double best = HUGE_VAL;
    for (std::size_t q = 0; q < nodes.size(); ++q) best = std::min(best, tube.values[q] + f.slope * from_ticks(d[nodes[q]]));
    CHECK(f.values[v] == doctest::Approx(best).epsilon(1e-13).scale(1.0));
  }
  // exact on the tube
  for (std::size_t q = 0; q < nodes.size(); ++q) CHECK(f.values[nodes[q]] == tube.values[q]);

  const ExtendedFunction s = mcshane_extend_serial(tube, g, false);
  CHECK(s.values.size() == f.values.size());
  for (std::size_t v = 0; v < f.values.size(); ++v)
    if (g.active(v)) CHECK(s.values[v] == f.values[v]);

  const std::vector<double> multi = mcshane_multisource(tube, g, f.slope);
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (g.active(v)) CHECK(multi[v] == doctest::Approx(f.values[v]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("extension certificate and clamping") {
  const FlowGrid grid = small_grid("rotation");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.2);
  const TubeFunction tube = build_tube_function(ripple(), grid, whole(grid));
  const ExtendedFunction plain = mcshane_extend(tube, g, false);
  const ExtendedFunction clamped = mcshane_extend(tube, g, true);
  const Certificate cp = certify_extension(tube, plain, g);
  const Certificate cc = certify_extension(tube, clamped, g);
  CHECK(cp.exact_on_tube);
  CHECK(cc.exact_on_tube);
  CHECK(cc.within_bounds);
  // off the tube the extension is Lipschitz with its slope L_lambda (1 + 1e-12)
  CHECK(cp.lip_d_lambda <= plain.slope);
  CHECK(cc.lip_d_lambda <= clamped.slope);
  CHECK(cp.lip_d_lambda >= cp.L_lambda * (1 - 1e-12));
  CHECK(cp.L_prime >= cp.L * (1 - 1e-12));
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (!g.active(v)) continue;
    CHECK(clamped.values[v] >= clamped.lo);
    CHECK(clamped.values[v] <= clamped.hi);
    CHECK(plain.values[v] >= plain.lo);  // an inf-convolution never undershoots the tube minimum
  }
  CHECK(verify_directional_lipschitz(plain, g) == cp.L_prime);

  std::ostringstream out;
  write_certificate_header(out);
  write_certificate_row(out, 0.1, cp);
  write_extension_csv(out, plain, g);
  CHECK(!out.str().empty());
}

TEST_CASE("constant tube extends to the constant") {
  const FlowGrid grid = small_grid("rotation");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.2);
  const TubeFunction tube = tube_from_closure(grid, whole(grid).members, [](double, const Vec&) { return 2.5; });
  const ExtendedFunction f = mcshane_extend(tube, g, false);
  CHECK(f.L_lambda == 0.0);
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (g.active(v)) CHECK(f.values[v] == 2.5);
}

TEST_CASE("Euclidean Lipschitz constant of affine functions") {
  std::mt19937_64 rng(61);
  std::vector<SpaceTimePoint> pts;
  std::vector<double> vals;
  for (int k = 0; k < 200; ++k) {
    const SpaceTimePoint p{oracle::uniform(rng, 0, 1), oracle::disc_point(rng, 1.0)};
    pts.push_back(p);
    vals.push_back(3 * p.t + 4 * p.x[0]);
  }
  const double exact = euclidean_lipschitz(pts, vals);
  CHECK(exact <= 5.0 * (1 + 1e-12));
  CHECK(exact >= 4.5);
  const double sampled = euclidean_lipschitz(pts, vals, 1000, 3);
  CHECK(sampled <= exact);
  // coincident points are skipped rather than divided by zero
  pts.push_back(pts.front());
  vals.push_back(vals.front());
  CHECK(euclidean_lipschitz(pts, vals) == exact);
}

TEST_CASE("flow-derived constants") {
  const FlowGrid rot = build_flow_grid(oracle::field("rotation"), 0.5, 0.1, oracle::unit_times(4), 1e-3);
  std::vector<std::size_t> all(rot.num_points());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CHECK(inverse_flow_lipschitz(rot, all) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(field_sup_on_tube(oracle::field("rotation"), rot, all) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(lemma_bound(2.0, 1.0, 0.5, 3.0) == doctest::Approx(std::hypot(2.0, 4.0)));

  const FlowGrid lin = build_flow_grid(oracle::field("linear"), 0.5, 0.1, oracle::unit_times(4), 1e-3);
  CHECK(inverse_flow_lipschitz(lin, all) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pullback and interpolated extension") {
  const FlowGrid grid = small_grid("rotation");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.2);
  const TubeFunction tube = build_tube_function(ripple(), grid, whole(grid));
  const ExtendedFunction f = mcshane_extend(tube, g, false);
  const DensityField Psi = pullback_extension(f, g, grid);
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i) CHECK(Psi.value(j, i) == f.values[g.trajectory_node(j, i)]);
  const TestFunction psi = extension_test_function(f, g, 10.0);
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (std::size_t k = 0; k < g.lattice().size(); ++k) {
      const std::size_t v = g.lattice_node(j, k);
      if (g.active(v) && psi.in_support(g.time(v), g.position(v)))
        CHECK(psi(g.time(v), g.position(v)) == doctest::Approx(f.values[v]).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("degenerate tube") {
  const FlowGrid grid = small_grid("rotation");
  LusinSet empty;
  CHECK_THROWS_AS(build_tube_function(ripple(), grid, empty), DegenerateError);
}

TEST_CASE("Step-4 bound on a tube with a nonempty complement") {
  const VectorField sw = oracle::field("swirl_power");
  const FlowGrid grid = build_flow_grid(sw, 1.0, 0.1, oracle::unit_times(10), 1e-3);
  BumpSpec s;
  s.x_radius = 0.9;
  s.t_center = 0.5;
  s.t_radius = 0.45;
  s.wavenumber = 20.94;
  StudyOptions opt;
  opt.lambdas = {0.4, 0.2};
  const EpsilonStudy st = run_epsilon_study(grid, tensor_bump(s, 1.0), 0.2 * M_PI, [](const Vec&) { return 1.0; }, opt);
  CHECK(st.K.members.size() < grid.num_points());
  CHECK(st.step4.lhs <= st.step4.rhs);
  CHECK(std::abs(st.step4.split_term) <= st.step4.rhs);
  CHECK(st.step4.rhs > 0.0);
  CHECK(st.plain.exact_on_tube);
  CHECK(st.clamped.within_bounds);
}
