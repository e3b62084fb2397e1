#include "rlf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <tuple>

#include "rlf/csv.hpp"
#include "rlf/compensated.hpp"
#include "rlf/errors.hpp"
#include "rlf/kernels.hpp"

namespace rlf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int substeps(double span, double step) {
  if (!(step > 0.0)) throw ConfigError("integrator step must be positive");
  const double n = std::ceil(std::abs(span) / step - 1e-9);
  return std::max(1, static_cast<int>(n));
}

void check_escape(const Vec& x, double escape_radius, double t) {
  const double r = norm(x);
  if (!(r <= escape_radius))
    throw EscapeError("trajectory left the safety ball |x| <= " + format_double(escape_radius) + " at t = " +
                      format_double(t));
}

Vec rk4_step(const VectorField& field, double t, const Vec& x, double h) {
  const Vec k1 = field(t, x);
  const Vec k2 = field(t + 0.5 * h, x + (0.5 * h) * k1);
  const Vec k3 = field(t + 0.5 * h, x + (0.5 * h) * k2);
  const Vec k4 = field(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Vec integrate_flow(const VectorField& field, double s, double t, const Vec& x0, double step, double escape_radius) {
  const int n = substeps(t - s, step);
  const double h = (t - s) / n;
  Vec x = x0;
  for (int k = 0; k < n; ++k) {
    x = rk4_step(field, s + k * h, x, h);
    check_escape(x, escape_radius, s + (k + 1) * h);
  }
  return x;
}

Vec inverse_flow(const VectorField& field, double t, const Vec& x, double step, double escape_radius) {
  return integrate_flow(field, t, 0.0, x, step, escape_radius);
}

FlowSample integrate_with_divergence(const VectorField& field, double s, double t, const Vec& x0, double step,
                                     double escape_radius) {
  const int n = substeps(t - s, step);
  const double h = (t - s) / n;
  FlowSample out{x0, 0.0};
  double div_prev = field.divergence(s, x0);
  CompensatedSum acc;
  for (int k = 0; k < n; ++k) {
    const double tau = s + k * h;
    out.position = rk4_step(field, tau, out.position, h);
    check_escape(out.position, escape_radius, tau + h);
    const double div_next = field.divergence(tau + h, out.position);
    acc.add(0.5 * h * (div_prev + div_next));
    div_prev = div_next;
  }
  out.div_integral = acc.value();
  return out;
}

// ---------------------------------------------------------------------------
// FlowGrid

double FlowGrid::density_ratio(std::size_t j, std::size_t i) const { return std::exp(-div_integral(j, i)); }

std::size_t FlowGrid::active_count() const {
  return static_cast<std::size_t>(std::count(escaped.begin(), escaped.end(), std::uint8_t{0}));
}

double FlowGrid::cell_volume() const { return std::pow(spacing, dim); }

std::optional<std::size_t> FlowGrid::index_of(const std::array<int, kMaxDim>& k) const {
  const int side = 2 * half_extent + 1;
  std::size_t f = 0;
  for (int d = 0; d < dim; ++d) {
    if (k[d] < -half_extent || k[d] > half_extent) return std::nullopt;
    f = f * static_cast<std::size_t>(side) + static_cast<std::size_t>(k[d] + half_extent);
  }
  const std::int64_t id = cube[f];
  if (id < 0) return std::nullopt;
  return static_cast<std::size_t>(id);
}

std::vector<std::size_t> FlowGrid::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (int d = 0; d < dim; ++d) {
    for (int sgn : {-1, 1}) {
      auto k = lattice_index[i];
      k[d] += sgn;
      if (const auto nb = index_of(k)) out.push_back(*nb);
    }
  }
  return out;
}

Box FlowGrid::trajectory_bounds() const {
  Box b{dim, {}, {}};
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = HUGE_VAL;
    b.hi[d] = -HUGE_VAL;
  }
  for (const Vec& x : forward) {
    if (!std::isfinite(x[0])) continue;
    for (int d = 0; d < dim; ++d) {
      b.lo[d] = std::min(b.lo[d], x[d]);
      b.hi[d] = std::max(b.hi[d], x[d]);
    }
  }
  return b;
}

FlowGrid make_flow_lattice(int dim, double radius, double spacing, std::vector<double> times, double step,
                           double escape_radius) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("flow grid dimension must be in 1..3");
  if (!(spacing > 0.0)) throw ConfigError("flow grid spacing must be positive");
  if (!(radius > 0.0)) throw ConfigError("flow grid radius must be positive");
  if (!(step > 0.0)) throw ConfigError("integrator step must be positive");
  if (times.empty() || times.front() != 0.0) throw ConfigError("flow grid times must start at 0");
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) throw ConfigError("flow grid times must be strictly increasing");

  FlowGrid g;
  g.dim = dim;
  g.radius = radius;
  g.spacing = spacing;
  g.step = step;
  g.escape_radius = escape_radius;
  g.times = std::move(times);
  g.half_extent = static_cast<int>(std::floor(radius / spacing + 1e-9));
  const int side = 2 * g.half_extent + 1;
  std::size_t cube_size = 1;
  for (int d = 0; d < dim; ++d) cube_size *= static_cast<std::size_t>(side);
  g.cube.assign(cube_size, -1);

  for (std::size_t f = 0; f < cube_size; ++f) {
    std::array<int, kMaxDim> k{0, 0, 0};
    std::size_t rest = f;
    for (int d = dim - 1; d >= 0; --d) {
      k[d] = static_cast<int>(rest % static_cast<std::size_t>(side)) - g.half_extent;
      rest /= static_cast<std::size_t>(side);
    }
    Vec y{};
    for (int d = 0; d < dim; ++d) y[d] = k[d] * spacing;
    if (norm(y) <= radius * (1.0 + 1e-12)) {
      g.cube[f] = static_cast<std::int64_t>(g.base_points.size());
      g.base_points.push_back(y);
      g.lattice_index.push_back(k);
    }
  }
  const std::size_t total = g.num_times() * g.num_points();
  g.forward.assign(total, Vec{});
  g.div_integrals.assign(total, 0.0);
  g.escaped.assign(g.num_points(), 0);
  for (std::size_t i = 0; i < g.num_points(); ++i) g.forward[i] = g.base_points[i];
  return g;
}

void integrate_trajectory(const VectorField& field, FlowGrid& grid, std::size_t i) {
  Vec x = grid.base_points[i];
  CompensatedSum acc;
  grid.forward[grid.flat(0, i)] = x;
  grid.div_integrals[grid.flat(0, i)] = 0.0;
  for (std::size_t j = 1; j < grid.num_times(); ++j) {
    if (!grid.escaped[i]) {
      try {
        const FlowSample s =
            integrate_with_divergence(field, grid.times[j - 1], grid.times[j], x, grid.step, grid.escape_radius);
        x = s.position;
        acc.add(s.div_integral);
      } catch (const EscapeError&) {
        grid.escaped[i] = 1;
      }
    }
    grid.forward[grid.flat(j, i)] = grid.escaped[i] ? Vec{{kNaN, kNaN, kNaN}} : x;
    grid.div_integrals[grid.flat(j, i)] = grid.escaped[i] ? kNaN : acc.value();
  }
}

FlowGrid build_flow_grid(const VectorField& field, double radius, double spacing, const std::vector<double>& times,
                         double step, double escape_radius) {
  FlowGrid grid = make_flow_lattice(field.dim(), radius, spacing, times, step, escape_radius);
  const auto n = static_cast<std::ptrdiff_t>(grid.num_points());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      integrate_trajectory(field, grid, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return grid;
}

FlowGrid build_flow_grid_serial(const VectorField& field, double radius, double spacing,
                                const std::vector<double>& times, double step, double escape_radius) {
  FlowGrid grid = make_flow_lattice(field.dim(), radius, spacing, times, step, escape_radius);
  for (std::size_t i = 0; i < grid.num_points(); ++i) integrate_trajectory(field, grid, i);
  return grid;
}

DensityField pushforward_density(const FlowGrid& grid, std::size_t j) {
  if (j >= grid.num_times()) throw ConfigError("pushforward_density: time index out of range");
  std::vector<Vec> pts;
  std::vector<double> vals;
  for (std::size_t i = 0; i < grid.num_points(); ++i) {
    if (!grid.active(i)) continue;
    pts.push_back(grid.position(j, i));
    vals.push_back(grid.density_ratio(j, i));
  }
  return DensityField::scattered(grid.dim, {grid.times[j]}, {std::move(pts)}, {std::move(vals)},
                                 Box::unbounded(grid.dim));
}

double estimate_compressibility(const FlowGrid& grid) {
  double c = 1.0;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i) {
      if (!grid.active(i)) continue;
      const double d = grid.div_integral(j, i);
      c = std::max({c, std::exp(d), std::exp(-d)});
    }
  return c;
}

// ---------------------------------------------------------------------------
// Lusin-type sets

std::vector<double> default_lusin_thresholds() {
  std::vector<double> t{0.0};
  for (int k = 0; k <= 240; ++k) t.push_back(1e-10 * std::pow(10.0, k / 20.0));
  return t;
}

std::vector<double> stretching_scores(const FlowGrid& grid) {
  std::vector<double> score(grid.num_points(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(grid.num_points());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    if (!grid.active(i)) {
      score[i] = HUGE_VAL;
      continue;
    }
    double g = 0.0;
    for (const std::size_t nb : grid.neighbors(i)) {
      if (!grid.active(nb)) continue;
      const double base = distance(grid.base_points[i], grid.base_points[nb]);
      for (std::size_t j = 0; j < grid.num_times(); ++j) {
        const double now = distance(grid.position(j, i), grid.position(j, nb));
        g = std::max(g, std::abs(std::log(now / base)));
      }
    }
    score[i] = g;
  }
  return score;
}

double measured_flow_lipschitz(const FlowGrid& grid, const std::vector<std::size_t>& members,
                               std::size_t* witness_a, std::size_t* witness_b, std::size_t* witness_time) {
  struct Best {
    double ratio = 0.0;
    std::size_t a = 0, b = 0, j = 0;
    bool better_than(const Best& o) const {
      if (ratio != o.ratio) return ratio > o.ratio;
      return std::tie(a, b, j) < std::tie(o.a, o.b, o.j);
    }
  };
  Best best;
  const auto m = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel
  {
    Best local;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t p = 0; p < m; ++p) {
      const std::size_t a = members[static_cast<std::size_t>(p)];
      for (std::size_t q = static_cast<std::size_t>(p) + 1; q < members.size(); ++q) {
        const std::size_t b = members[q];
        const double base = distance(grid.base_points[a], grid.base_points[b]);
        for (std::size_t j = 0; j < grid.num_times(); ++j) {
          const Best cand{distance(grid.position(j, a), grid.position(j, b)) / base, a, b, j};
          if (cand.better_than(local)) local = cand;
        }
      }
    }
#pragma omp critical
    if (local.better_than(best)) best = local;
  }
  if (witness_a) *witness_a = best.a;
  if (witness_b) *witness_b = best.b;
  if (witness_time) *witness_time = best.j;
  return best.ratio;
}

LusinSet lusin_lipschitz_set(const FlowGrid& grid, double epsilon, const std::vector<double>& thresholds) {
  const double ball = std::pow(std::numbers::pi, grid.dim / 2.0) / std::tgamma(grid.dim / 2.0 + 1.0) *
                      std::pow(grid.radius, grid.dim);
  if (!(epsilon > 0.0 && epsilon < ball))
    throw ConfigError("Lusin budget epsilon must lie in (0, |B_R|) = (0, " + format_double(ball) + ")");
  if (thresholds.empty()) throw ConfigError("Lusin threshold grid is empty");

  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());

  LusinSet set;
  set.epsilon = epsilon;
  set.scores = stretching_scores(grid);
  const double w = grid.cell_volume();

  bool found = false;
  for (const double tau : sorted) {
    std::size_t kept = 0;
    for (const double s : set.scores) kept += s <= tau ? 1 : 0;
    const double excluded = static_cast<double>(grid.num_points() - kept) * w;
    if (excluded <= epsilon) {
      set.threshold = tau;
      set.complement_measure = excluded;
      found = true;
      break;
    }
  }
  if (!found)
    throw InfeasibleError("no Lusin threshold keeps the excluded measure below epsilon = " + format_double(epsilon) +
                          " (lattice too coarse or too many escaped trajectories)");

  for (std::size_t i = 0; i < grid.num_points(); ++i)
    if (set.scores[i] <= set.threshold) set.members.push_back(i);
  if (set.members.size() >= 2) {
    set.lip_constant =
        measured_flow_lipschitz(grid, set.members, &set.witness_a, &set.witness_b, &set.witness_time);
  }
  return set;
}

// ---------------------------------------------------------------------------
// CSV

void write_flow_grid_csv(std::ostream& out, const FlowGrid& grid) {
  const int n = grid.dim;
  out << "j,i,t";
  for (int d = 0; d < n; ++d) out << ",y" << d;
  for (int d = 0; d < n; ++d) out << ",X" << d;
  out << ",D,escaped\n";
  for (std::size_t j = 0; j < grid.num_times(); ++j) {
    for (std::size_t i = 0; i < grid.num_points(); ++i) {
      out << j << ',' << i << ',' << format_double(grid.times[j]);
      for (int d = 0; d < n; ++d) out << ',' << format_double(grid.base_points[i][d]);
      for (int d = 0; d < n; ++d) out << ',' << format_double(grid.position(j, i)[d]);
      out << ',' << format_double(grid.div_integral(j, i)) << ',' << int(grid.escaped[i]) << '\n';
    }
  }
}

void write_lusin_csv(std::ostream& out, const FlowGrid& grid, const LusinSet& set) {
  out << "index";
  for (int d = 0; d < grid.dim; ++d) out << ",y" << d;
  out << ",score\n";
  for (const std::size_t i : set.members) {
    out << i;
    for (int d = 0; d < grid.dim; ++d) out << ',' << format_double(grid.base_points[i][d]);
    out << ',' << format_double(set.scores[i]) << '\n';
  }
  out << "# summary: epsilon,threshold,members,complement_measure,lip_constant\n";
  out << "# " << format_double(set.epsilon) << ',' << format_double(set.threshold) << ',' << set.members.size()
      << ',' << format_double(set.complement_measure) << ',' << format_double(set.lip_constant) << '\n';
}

}  // namespace rlf
