#include <doctest.h>

#include "oracles.hpp"
#include "rlf/errors.hpp"
#include "rlf/transport.hpp"
#include "rlf/weakform.hpp"

using namespace rlf;

TEST_CASE("Lagrangian solutions keep U/R constant along trajectories") {
  const SpatialFunction u0 = gaussian(vec2(0.3, 0.1), 0.2);
  for (const auto& name : catalog_names()) {
    const VectorField b = oracle::field(name);
    const FlowGrid g = build_flow_grid(b, 1.0, 0.1, oracle::unit_times(10), 1e-3);
    const DensityField u = lagrangian_solution(b, g, u0);
    const DensityField U = pullback_along_flow(u, g);
    CHECK(check_lagrangian_property(U, g) <= 1e-12);
  }
}

TEST_CASE("a non-solution is detected") {
  // u = t phi(x) under the zero field
  const FlowGrid g = build_flow_grid(oracle::field("zero"), 1.0, 0.1, oracle::unit_times(10), 1e-3);
  const SpatialFunction phi = gaussian(vec2(0, 0), 0.3);
  std::vector<std::vector<Vec>> pts(g.num_times(), g.base_points);
  std::vector<std::vector<double>> vals(g.num_times());
  double phi_max = 0.0;
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (const Vec& y : g.base_points) {
      vals[j].push_back(g.times[j] * phi(y));
      phi_max = std::max(phi_max, phi(y));
    }
  const DensityField U = DensityField::scattered(2, g.times, pts, vals, Box::cube(2, 2.0));
  CHECK(check_lagrangian_property(U, g) > 0.1 * phi_max);
}

TEST_CASE("Lagrangian solution of a linear flow matches the exact density") {
  const VectorField lin = oracle::field("linear");
  const SpatialFunction u0 = gaussian(vec2(0.1, 0.05), 0.2);
  const FlowGrid g = build_flow_grid(lin, 0.5, 0.1, oracle::unit_times(4), 1e-3);
  const DensityField u = lagrangian_solution(lin, g, u0);
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (std::size_t i = 0; i < g.num_points(); ++i)
      CHECK(u.value(j, i) ==
            doctest::Approx(oracle::linear_density(u0, g.times[j], g.position(j, i))).epsilon(1e-8));

  const DensityField e = eulerian_view(lin, u0, 1e-3, Box::cube(2, 3.0));
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const Vec x = oracle::disc_point(rng, 1.0);
    const double t = oracle::uniform(rng, 0, 1);
    CHECK(e.at(t, x) == doctest::Approx(oracle::linear_density(u0, t, x)).epsilon(1e-8).scale(1e-12));
  }
  CHECK(e.at(0.5, vec2(4, 0)) == 0.0);
}

TEST_CASE("density ratio field and sampling") {
  const FlowGrid g = build_flow_grid(oracle::field("linear"), 0.5, 0.1, oracle::unit_times(2), 1e-3);
  const DensityField R = density_ratio_field(g);
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (std::size_t i = 0; i < g.num_points(); ++i) CHECK(R.value(j, i) == g.density_ratio(j, i));

  const Lattice lat(2, vec2(-1, -1), 0.5, {5, 5, 1});
  const auto f = DensityField::analytic(2, [](double t, const Vec& x) { return t * x[0]; }, Box::cube(2, 2.0));
  const auto s = sample_on_lattice(f, 0.5, lat);
  for (std::size_t k = 0; k < lat.size(); ++k) CHECK(s[k] == 0.5 * lat.point(k)[0]);
}

TEST_CASE("pullback requires the grid times") {
  const FlowGrid g = build_flow_grid(oracle::field("rotation"), 0.5, 0.1, oracle::unit_times(4), 1e-3);
  const Lattice lat(2, vec2(-1, -1), 0.5, {5, 5, 1});
  const auto u = DensityField::on_lattice(lat, {0.0, 1.0}, {std::vector<double>(25, 1.0), std::vector<double>(25)});
  CHECK_THROWS_AS(pullback_along_flow(u, g), ConfigError);
}

TEST_CASE("mass by change of variables matches an Eulerian quadrature") {
  const SpatialFunction u0 = gaussian(vec2(0.3, 0.1), 0.2);
  for (const char* name : {"rotation", "linear", "shear", "swirl_power"}) {
    const VectorField b = oracle::field(name);
    const FlowGrid g = build_flow_grid(b, 1.2, 0.02, oracle::unit_times(4), 1e-3);
    const DensityField u = lagrangian_solution(b, g, u0);
    double initial = 0.0;
    for (const Vec& y : g.base_points) initial += u0(y);
    initial *= g.cell_volume();
    const Lattice cells = Lattice::covering(g.trajectory_bounds(), 0.04);
    for (const std::size_t j : {std::size_t{2}, std::size_t{4}}) {
      double eulerian = 0.0;
      for (std::size_t k = 0; k < cells.size(); ++k) eulerian += u.at(j, cells.point(k));
      eulerian *= 0.04 * 0.04;
      CHECK(std::abs(eulerian - initial) <= 0.02 * initial);
    }
  }
}
