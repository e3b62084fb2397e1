#include "rlf/transport.hpp"

#include <algorithm>
#include <cmath>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

namespace {

Box padded(Box b, double pad) {
  for (int d = 0; d < b.dim; ++d) {
    b.lo[d] -= pad;
    b.hi[d] += pad;
  }
  return b;
}

Box base_box(const FlowGrid& grid) { return padded(Box::cube(grid.dim, grid.radius), grid.spacing); }

}  // namespace

DensityField lagrangian_solution(const VectorField& field, const FlowGrid& grid, const SpatialFunction& u0) {
  if (field.dim() != grid.dim) throw ConfigError("lagrangian_solution: field and grid dimensions differ");
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();
  std::vector<double> datum(np);
  for (std::size_t i = 0; i < np; ++i) datum[i] = u0(grid.base_points[i]);

  std::vector<std::vector<Vec>> points(nt, std::vector<Vec>(np));
  std::vector<std::vector<double>> values(nt, std::vector<double>(np, 0.0));
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t i = 0; i < np; ++i) {
      points[j][i] = grid.position(j, i);
      if (grid.active(i)) values[j][i] = datum[i] * std::exp(-grid.div_integral(j, i));
    }
  }
  DensityField u = DensityField::scattered(grid.dim, grid.times, std::move(points), std::move(values),
                                           padded(grid.trajectory_bounds(), grid.spacing));
  u.set_initial_datum([u0](double, const Vec& x) { return u0(x); });
  return u;
}

DensityField pullback_along_flow(const DensityField& u, const FlowGrid& grid) {
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();
  std::vector<std::vector<double>> values(nt, std::vector<double>(np, 0.0));
  for (std::size_t j = 0; j < nt; ++j) {
    std::optional<std::size_t> slice;
    if (u.kind() != DensityKind::analytic) {
      slice = u.slice_of(grid.times[j]);
      if (!slice)
        throw ConfigError("pullback_along_flow: density has no slice at t = " + format_double(grid.times[j]));
    }
    for (std::size_t i = 0; i < np; ++i) {
      if (!grid.active(i)) continue;
      const Vec& x = grid.position(j, i);
      values[j][i] = slice ? u.at(*slice, x) : u.at(grid.times[j], x);
    }
  }
  return DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                                 std::move(values), base_box(grid));
}

DensityField density_ratio_field(const FlowGrid& grid) {
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();
  std::vector<std::vector<double>> values(nt, std::vector<double>(np, 1.0));
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < np; ++i)
      if (grid.active(i)) values[j][i] = grid.density_ratio(j, i);
  return DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                                 std::move(values), base_box(grid));
}

double check_lagrangian_property(const DensityField& U, const FlowGrid& grid) {
  if (U.num_times() != grid.num_times()) throw ConfigError("check_lagrangian_property: U is not on the grid times");
  for (std::size_t j = 0; j < U.num_times(); ++j)
    if (U.num_samples(j) != grid.num_points())
      throw ConfigError("check_lagrangian_property: U is not on the grid lattice");
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.num_points(); ++i) {
    if (!grid.active(i)) continue;
    double lo = HUGE_VAL;
    double hi = -HUGE_VAL;
    for (std::size_t j = 0; j < grid.num_times(); ++j) {
      const double q = U.value(j, i) / grid.density_ratio(j, i);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

DensityField eulerian_view(const VectorField& field, SpatialFunction u0, double step, Box support) {
  auto closure = [field, u0, step](double t, const Vec& x) {
    if (t == 0.0) return u0(x);
    try {
      const FlowSample back = integrate_with_divergence(field, t, 0.0, x, step);
      // back.div_integral = -int_0^t div b along the trajectory.
      return u0(back.position) * std::exp(back.div_integral);
    } catch (const EscapeError&) {
      return 0.0;
    }
  };
  DensityField u = DensityField::analytic(field.dim(), closure, support);
  u.set_initial_datum([u0](double, const Vec& x) { return u0(x); });
  return u;
}

std::vector<double> sample_on_lattice(const DensityField& u, double t, const Lattice& lattice) {
  std::vector<double> out(lattice.size());
  const auto n = static_cast<std::ptrdiff_t>(lattice.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = u.at(t, lattice.point(static_cast<std::size_t>(k)));
  return out;
}

SpatialFunction gaussian(const Vec& center, double sigma, double amplitude) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian width must be positive");
  return [center, sigma, amplitude](const Vec& x) {
    const Vec d = x - center;
    return amplitude * std::exp(-dot(d, d) / (2.0 * sigma * sigma));
  };
}

}  // namespace rlf
