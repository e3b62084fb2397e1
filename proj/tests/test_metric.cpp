#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "rlf/errors.hpp"
#include "rlf/metric.hpp"

using namespace rlf;

namespace {

FlowGrid small_grid(const char* name) {
  return build_flow_grid(oracle::field(name), 0.2, 0.1, oracle::unit_times(4), 1e-3);
}

/// All-pairs distances by Floyd-Warshall over the CSR edges.
std::vector<std::vector<Ticks>> floyd(const SpaceTimeGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<Ticks>> d(n, std::vector<Ticks>(n, kUnreachable));
  for (std::size_t v = 0; v < n; ++v) {
    d[v][v] = 0;
    for (std::size_t e = g.offsets()[v]; e < g.offsets()[v + 1]; ++e)
      d[v][g.targets()[e]] = std::min(d[v][g.targets()[e]], g.weights()[e]);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i][k] == kUnreachable) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (d[k][j] != kUnreachable) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  return d;
}

NodeValues tube_values(const SpaceTimeGraph& g, const FlowGrid& grid, double (*f)(double, const Vec&)) {
  NodeValues out;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i) {
      out.nodes.push_back(g.trajectory_node(j, i));
      out.values.push_back(f(grid.times[j], grid.position(j, i)));
    }
  return out;
}

double wave(double t, const Vec& x) { return std::sin(3 * t) * std::cos(4 * x[0]) + x[1] * x[1]; }

}  // namespace

TEST_CASE("ticks") {
  CHECK(to_ticks(0.0) == 0);
  CHECK(to_ticks(1.0) == 1'000'000'000'000);
  CHECK(from_ticks(to_ticks(0.25)) == 0.25);
  std::mt19937_64 rng(51);
  for (int k = 0; k < 1000; ++k) {
    const double a = oracle::uniform(rng, 0, 10), b = oracle::uniform(rng, 0, 10);
    CHECK((a <= b) <= (to_ticks(a) <= to_ticks(b)));
  }
  CHECK_THROWS_AS(to_ticks(-1.0), InternalError);
}

TEST_CASE("graph counts and structure") {
  const FlowGrid grid = small_grid("rotation");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.5);
  CHECK(grid.num_points() == 13);
  CHECK(g.num_trajectories() == 13);
  CHECK(g.flow_edges() == 13 * 4);
  CHECK(g.snap_edges() == 13 * 5);
  CHECK(g.num_nodes() == 13 * 5 + 5 * g.lattice().size());
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    for (std::size_t e = g.offsets()[v]; e < g.offsets()[v + 1]; ++e) {
      const std::size_t w = g.targets()[e];
      CHECK(g.weights()[e] >= 1);
      if (g.slice(v) != g.slice(w)) CHECK((g.is_trajectory_node(v) && g.is_trajectory_node(w)));
    }
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t i = 0; i < 13; ++i) {
      const std::size_t v = g.trajectory_node(j, i);
      CHECK(g.position(v) == grid.position(j, i));
      CHECK(g.snap_distance(v) <= g.max_snap());
      CHECK(g.snap_distance(v) <= 0.5 * std::sqrt(2.0) * 0.1 + 1e-12);
      CHECK(g.snap({grid.times[j], grid.position(j, i)}) == v);
    }
  const SpaceTimeGraph bare = build_graph(grid, 0.1, 0.5, false);
  CHECK(bare.num_edges() == bare.flow_edges());
}

TEST_CASE("d_lambda is a metric on nodes and matches brute force") {
  const FlowGrid grid = small_grid("swirl_power");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.3);
  const auto d = floyd(g);
  const std::size_t n = g.num_nodes();
  std::mt19937_64 rng(52);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t s = pick(rng);
    CHECK(shortest_paths(g, s) == d[s]);
  }
  for (int k = 0; k < 20000; ++k) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    CHECK(d[a][b] == d[b][a]);
    CHECK(d[a][c] <= d[a][b] + d[b][c]);
    CHECK((d[a][b] == 0) == (a == b));
  }
  CHECK(distance_ticks(g, 3, 40) == d[3][40]);
}

TEST_CASE("d_lambda is monotone in lambda and exact along trajectories") {
  const FlowGrid grid = small_grid("rotation");
  const std::vector<double> lambdas{0.8, 0.4, 0.2, 0.1};
  std::vector<std::vector<std::vector<Ticks>>> all;
  std::vector<SpaceTimeGraph> graphs;
  for (const double l : lambdas) {
    graphs.push_back(build_graph(grid, 0.1, l));
    all.push_back(floyd(graphs.back()));
  }
  const std::size_t traj = grid.num_points() * grid.num_times();
  for (std::size_t k = 1; k < lambdas.size(); ++k)
    for (std::size_t a = 0; a < traj; ++a)
      for (std::size_t b = 0; b < traj; ++b) CHECK(all[k][a][b] >= all[k - 1][a][b]);

  const D0Metric d0(grid);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const SpaceTimeGraph& g = graphs[k];
    for (std::size_t i = 0; i < grid.num_points(); ++i)
      for (std::size_t j = 0; j < grid.num_times(); ++j)
        for (std::size_t m = 0; m < grid.num_times(); ++m) {
          const std::size_t a = g.trajectory_node(j, i), b = g.trajectory_node(m, i);
          CHECK(all[k][a][b] == g.time_ticks(j, m));
          const D0 z = d0(g.point(a), g.point(b), 1e-9);
          REQUIRE(z.is_finite());
          CHECK(from_ticks(all[k][a][b]) <= z.value() + 2.0 * g.max_snap() / lambdas[k] + kTick);
        }
  }
}

TEST_CASE("d0 is finite only along a trajectory") {
  const FlowGrid grid = small_grid("rotation");
  const D0Metric d0(grid);
  const SpaceTimePoint a{0.25, grid.position(1, 0)}, b{1.0, grid.position(4, 0)}, c{1.0, grid.position(4, 1)};
  CHECK(d0(a, b, 1e-9) == D0::finite(0.75));
  CHECK(d0(a, c, 1e-9) == D0::infinity());
  CHECK_THROWS_AS(D0::infinity().value(), InternalError);
  CHECK(d0_distance(grid, b, a, 1e-9).value() == 0.75);
}

TEST_CASE("Lipschitz constant: exhaustive scan matches brute force") {
  const FlowGrid grid = small_grid("swirl_power");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.2);
  const auto d = floyd(g);
  const NodeValues f = tube_values(g, grid, wave);
  double brute = 0.0;
  for (std::size_t a = 0; a < f.nodes.size(); ++a)
    for (std::size_t b = 0; b < f.nodes.size(); ++b)
      if (a != b) brute = std::max(brute, std::abs(f.values[a] - f.values[b]) / from_ticks(d[f.nodes[a]][f.nodes[b]]));
  const LipschitzEstimate par = lipschitz_constant(f, g);
  const LipschitzEstimate ser = lipschitz_constant_serial(f, g);
  CHECK(par.exhaustive);
  CHECK(par.constant == doctest::Approx(brute).epsilon(1e-14));
  CHECK(par.constant == ser.constant);
  CHECK(par.witness_a == ser.witness_a);
  CHECK(par.pairs == ser.pairs);
  const std::size_t wa = par.witness_a, wb = par.witness_b;
  CHECK(wa != wb);

  // sampled scans never exceed the exhaustive constant and are reproducible
  const LipschitzEstimate s1 = lipschitz_constant(f, g, 500, 9), s2 = lipschitz_constant(f, g, 500, 9);
  CHECK(!s1.exhaustive);
  CHECK(s1.constant <= par.constant);
  CHECK(s1.constant == s2.constant);
  CHECK(s1.pairs == s2.pairs);
  CHECK(s1.constant >= directional_constant(f, g));
}

TEST_CASE("directional constant and the convergence scan") {
  const FlowGrid grid = small_grid("rotation");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.4);
  const NodeValues f = tube_values(g, grid, wave);
  double brute = 0.0;
  for (std::size_t i = 0; i < grid.num_points(); ++i)
    for (std::size_t j = 0; j < grid.num_times(); ++j)
      for (std::size_t m = j + 1; m < grid.num_times(); ++m)
        brute = std::max(brute, std::abs(wave(grid.times[j], grid.position(j, i)) - wave(grid.times[m], grid.position(m, i))) /
                                    (grid.times[m] - grid.times[j]));
  CHECK(directional_constant(f, g) == doctest::Approx(brute).epsilon(1e-14));

  std::vector<std::size_t> members(grid.num_points());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  const ConvergenceTable t = convergence_scan(grid, members, f.values, {0.4, 0.2, 0.1, 0.05}, 0.1);
  CHECK(t.monotone);
  CHECK(t.L == doctest::Approx(brute).epsilon(1e-14));
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    CHECK(t.rows[k].L_lambda >= t.L * (1 - 1e-12));
    if (k > 0) CHECK(t.rows[k].L_lambda <= t.rows[k - 1].L_lambda);
  }
  CHECK(select_lambda(t, 1e9) == 0.4);
  CHECK(select_lambda(t, 0.0) == 0.05);
  CHECK_THROWS_AS(convergence_scan(grid, members, f.values, {0.1, 0.2}, 0.1), ConfigError);

  std::ostringstream out;
  write_convergence_csv(out, t);
  CHECK(out.str().find("lambda,L_lambda,nodes,edges") != std::string::npos);
}

TEST_CASE("equivalence constants") {
  const FlowGrid grid = small_grid("swirl_power");
  const SpaceTimeGraph g = build_graph(grid, 0.1, 0.25);
  const Equivalence a = equivalence_constants(g, 8, 3), b = equivalence_constants(g, 8, 3);
  CHECK(a.c1 == b.c1);
  CHECK(a.c2 == b.c2);
  CHECK(a.c1 > 0.0);
  CHECK(a.c1 <= a.c2 * (1.0 + a.slack / 1e-3));
  CHECK(a.pairs > 0);
  CHECK(a.slack == 0.1);
}
